use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use glvortex::SurfaceKind;
use glvortex_cli::acceptance::Suite;
use glvortex_cli::commands::{self, Command, PartialFailure};
use glvortex_cli::config::RunConfig;
use glvortex_cli::output::{Artifact, Meta};

#[derive(Parser)]
#[command(name = "glvortex", version, about = "Vortex equilibria, spiral waves and attractors of the Ginzburg-Landau equation on surfaces of revolution")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `out` from the config, else `.`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "GLVORTEX_THREADS")]
    threads: Option<usize>,
    /// Multiply every convergence tolerance.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
    /// Override the surface kind.
    #[arg(long, global = true, value_parser = ["sphere", "disk"])]
    surface: Option<String>,
    #[arg(long, global = true)]
    m: Option<u32>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Number of bifurcation points for `eigen`.
    #[arg(long, global = true)]
    count: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bifurcation points of the trivial equilibrium.
    Eigen,
    /// All equilibria at one lambda.
    Equilibria,
    /// Equilibria over `lambda_range`.
    Diagram,
    /// Connection graph of the global attractor.
    Attractor,
    /// Spiral waves continued from each vortex equilibrium.
    Spiral,
    /// PDE integration: heteroclinic harvest or a single trace.
    Evolve,
    /// Run the acceptance criteria.
    Verify {
        /// Criteria to run (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(kind) = &cli.surface {
        cfg.surface.kind = if kind == "disk" { SurfaceKind::Disk } else { SurfaceKind::Sphere };
    }
    if let Some(m) = cli.m {
        cfg.m = m;
    }
    if let Some(l) = cli.lambda {
        cfg.lambda = Some(l);
    }
    if let Some(c) = cli.count {
        cfg.count = c;
    }
    if let Some(x) = cli.tol_scale {
        anyhow::ensure!(x > 0.0 && x.is_finite(), "--tol-scale must be positive");
        cfg.scale_tolerances(x);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_all(dir: &std::path::Path, artifacts: &[Artifact]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in artifacts {
        let path = a.write(dir)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Exit status on completion: 0 success, 1 failure, 2 contradiction.
fn run(cli: &Cli) -> anyhow::Result<u8> {
    let cfg = load_config(cli)?;
    let dir = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let command = match &cli.command {
        Cmd::Eigen => Command::Eigen,
        Cmd::Equilibria => Command::Equilibria,
        Cmd::Diagram => Command::Diagram,
        Cmd::Attractor => Command::Attractor,
        Cmd::Spiral => Command::Spiral,
        Cmd::Evolve => Command::Evolve,
        Cmd::Verify { only } => {
            let ids = only.clone().unwrap_or_else(|| (1..=14).collect());
            anyhow::ensure!(ids.iter().all(|i| (1..=14).contains(i)), "criteria are numbered 1 to 14");
            let outcomes = Suite::new().run_all(&ids, |o| println!("{}", o.line()));
            let meta = Meta::new("verify", cfg.hash());
            write_all(&dir, &[Artifact::json("verify.json", &meta, &outcomes)])?;
            return Ok(if outcomes.iter().any(|o| !o.passed && o.contradiction) {
                2
            } else {
                u8::from(outcomes.iter().any(|o| !o.passed))
            });
        }
    };
    match commands::run(command, &cfg) {
        Ok(artifacts) => {
            write_all(&dir, &artifacts)?;
            Ok(0)
        }
        Err(err) => {
            if let Some(p) = err.downcast_ref::<PartialFailure>() {
                write_all(&dir, &p.artifacts)?;
            }
            Err(err)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(glvortex_cli::exit_code(&err) as u8)
        }
    }
}
