//! Command-line front end for `glvortex`: config loading, pipelines and
//! artifact output.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod output;

/// Process exit code for a failed run: 2 when the failure contradicts a
/// theorem-level guarantee, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match commands::library_error(err) {
        Some(e) if e.is_theorem_contradiction() => 2,
        _ => 1,
    }
}
