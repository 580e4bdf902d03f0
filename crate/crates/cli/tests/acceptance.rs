//! One PASS/FAIL line per acceptance criterion.

use std::process::ExitCode;

use glvortex_cli::acceptance::Suite;

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the default harness are ignored
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let suite = Suite::new();
    let outcomes = suite.run_all(&(1..=14).collect::<Vec<_>>(), |o| println!("{} [{:.1} s]", o.line(), o.seconds));
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("\n{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
