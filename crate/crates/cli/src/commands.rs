//! Command pipelines. Each returns the artifacts it produced.

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use glvortex::attractor::{BlockedPair, Edge, Node};
use glvortex::evolve::{bump, harvest_report, Departure, Evolver, HarvestEdge, OmegaMatch};
use glvortex::shooting::Parity;
use glvortex::spiral::{sweep_report, straight_path, KernelReport, SpiralProblem, WaveKind};
use glvortex::{
    bifurcation_points, connection_graph, diagram, is_chafee_infante, solve_all, EigenProblem, EquilibriumSet, Error, Surface,
    VortexEquilibrium,
};

use crate::config::{EvolveMode, RunConfig};
use crate::output::{label_slug, Artifact, Meta};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Equilibria,
    Diagram,
    Attractor,
    Spiral,
    Evolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Equilibria => "equilibria",
            Command::Diagram => "diagram",
            Command::Attractor => "attractor",
            Command::Spiral => "spiral",
            Command::Evolve => "evolve",
        }
    }
}

/// Run one pipeline on a validated config.
pub fn run(command: Command, cfg: &RunConfig) -> anyhow::Result<Vec<Artifact>> {
    let surface = cfg.surface.build()?;
    let meta = Meta::new(command.name(), cfg.hash());
    match command {
        Command::Eigen => eigen(&surface, cfg, &meta),
        Command::Equilibria => equilibria(&surface, cfg, &meta),
        Command::Diagram => bifurcation_diagram(&surface, cfg, &meta),
        Command::Attractor => attractor(&surface, cfg, &meta),
        Command::Spiral => spiral(&surface, cfg, &meta),
        Command::Evolve => evolve(&surface, cfg, &meta),
    }
}

#[derive(Serialize)]
struct EigenResult {
    m: u32,
    bifurcation_points: Vec<f64>,
    oscillations: Vec<usize>,
}

fn eigen(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let spec = bifurcation_points(surface, cfg.m, cfg.count)?;
    let result = EigenResult { m: cfg.m, bifurcation_points: spec.eigenvalues, oscillations: spec.oscillations };
    Ok(vec![Artifact::json("eigen.json", meta, &result)])
}

#[derive(Serialize)]
pub struct EquilibriumSummary {
    pub label: String,
    pub d: f64,
    pub parity: Option<Parity>,
    pub zero_number: usize,
    pub morse_index: usize,
    pub spectral_gap: f64,
    pub hyperbolicity_margin: f64,
    pub sup_norm: f64,
    pub discrete_residual: f64,
    pub discretization_error: f64,
}

impl From<&VortexEquilibrium> for EquilibriumSummary {
    fn from(e: &VortexEquilibrium) -> Self {
        Self {
            label: e.label(),
            d: e.d,
            parity: e.parity,
            zero_number: e.zero_number,
            morse_index: e.morse_index,
            spectral_gap: e.spectral_gap,
            hyperbolicity_margin: e.hyperbolicity_margin,
            sup_norm: e.sup_norm,
            discrete_residual: e.discrete_residual,
            discretization_error: e.discretization_error,
        }
    }
}

#[derive(Serialize)]
struct EquilibriaResult {
    lambda: f64,
    m: u32,
    k: Option<usize>,
    bifurcation_points: Vec<f64>,
    equilibria: Vec<EquilibriumSummary>,
}

fn solve(surface: &Surface, cfg: &RunConfig) -> anyhow::Result<EquilibriumSet> {
    Ok(solve_all(surface, cfg.m, cfg.require_lambda()?, &cfg.solve)?)
}

fn equilibria(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let set = solve(surface, cfg)?;
    let all = set.all();
    let result = EquilibriaResult {
        lambda: set.lambda,
        m: set.m,
        k: set.k,
        bifurcation_points: set.bifurcation_points.clone(),
        equilibria: all.iter().map(|e| EquilibriumSummary::from(*e)).collect(),
    };
    let mut header = vec!["s".to_string()];
    header.extend(all.iter().map(|e| e.label()));
    header.extend(all.iter().map(|e| format!("discrete_{}", e.label())));
    let rows = (0..set.trivial.mesh.len())
        .map(|i| {
            let mut row = vec![set.trivial.mesh[i]];
            row.extend(all.iter().map(|e| e.profile[i]));
            row.extend(all.iter().map(|e| e.discrete[i]));
            row
        })
        .collect();
    Ok(vec![
        Artifact::json("equilibria.json", meta, &result),
        Artifact::Csv { name: "profiles.csv".into(), header, rows },
    ])
}

fn bifurcation_diagram(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let [lo, hi] = cfg.lambda_range.context("diagram needs \"lambda_range\" in the config")?;
    let d = diagram(surface, cfg.m, (lo, hi), cfg.steps, &cfg.solve)?;
    let mut rows = Vec::new();
    for (label, points) in &d.branches {
        let (k, sign) = label.split_at(label.len() - 1);
        let k: f64 = k.parse().map_err(|_| anyhow!("bad branch label {label}"))?;
        let sign = if sign == "+" { 1.0 } else { -1.0 };
        for p in points {
            rows.push(vec![p.lambda, k, sign, p.d, p.sup_norm, p.zero_number as f64, p.morse_index as f64, p.margin]);
        }
    }
    let header = ["lambda", "branch", "sign", "d", "sup_norm", "zero_number", "morse_index", "margin"].map(String::from).to_vec();
    Ok(vec![Artifact::json("diagram.json", meta, &d), Artifact::Csv { name: "diagram.csv".into(), header, rows }])
}

#[derive(Serialize)]
struct AttractorResult {
    lambda: f64,
    m: u32,
    k: Option<usize>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    blocked: Vec<BlockedPair>,
    section_sensitive: Vec<(String, String)>,
    chafee_infante: bool,
    sign_symmetric: bool,
}

fn attractor(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let set = solve(surface, cfg)?;
    let g = connection_graph(&set)?;
    let chafee_infante = set.k.map_or(g.nodes.len() == 1 && g.edges.is_empty(), |k| is_chafee_infante(&g, k));
    let dot = g.to_dot();
    let sign_symmetric = g.is_sign_symmetric();
    let result = AttractorResult {
        lambda: g.lambda,
        m: g.m,
        k: set.k,
        nodes: g.nodes,
        edges: g.edges,
        blocked: g.blocked,
        section_sensitive: g.section_sensitive,
        chafee_infante,
        sign_symmetric,
    };
    Ok(vec![Artifact::json("attractor.json", meta, &result), Artifact::Text { name: "attractor.dot".into(), text: dot }])
}

#[derive(Serialize)]
struct SweepPoint {
    eta: f64,
    beta: f64,
    omega: f64,
    residual: f64,
    sup_norm: f64,
    kind: WaveKind,
}

#[derive(Serialize)]
struct SpiralSource {
    source: String,
    kernel: KernelReport,
    omega_lipschitz: f64,
    stalled_at: Option<(f64, f64)>,
    sweep: Vec<SweepPoint>,
}

fn spiral(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let set = solve(surface, cfg)?;
    let sec = &cfg.spiral;
    let path: Vec<(f64, f64)> = match &sec.path {
        Some(p) => p.iter().map(|q| (q[0], q[1])).collect(),
        None => straight_path((sec.target[0], sec.target[1]), sec.path_steps),
    };
    let sources: Vec<&VortexEquilibrium> = match &sec.sources {
        Some(labels) => labels
            .iter()
            .map(|l| set.nontrivial.iter().find(|e| &e.label() == l).ok_or_else(|| anyhow!("no equilibrium labelled {l}")))
            .collect::<anyhow::Result<_>>()?,
        None => set.nontrivial.iter().collect(),
    };
    if sources.is_empty() {
        bail!("no nontrivial equilibria at lambda = {}", set.lambda);
    }
    let runs: Vec<(SpiralSource, Vec<f64>, Vec<f64>, Vec<f64>)> = sources
        .par_iter()
        .map(|src| -> glvortex::Result<_> {
            let kernel = SpiralProblem::new(surface, src)?.kernel_check()?;
            let rep = sweep_report(surface, src, &path, &sec.newton)?;
            let last = rep.waves.last().expect("sweep keeps the source");
            let profile = (last.mesh.clone(), last.u_re.clone(), last.u_im.clone());
            let sweep = rep
                .waves
                .iter()
                .map(|w| SweepPoint { eta: w.eta, beta: w.beta, omega: w.omega, residual: w.residual_norm, sup_norm: w.sup_norm, kind: w.kind })
                .collect();
            Ok((
                SpiralSource { source: src.label(), kernel, omega_lipschitz: rep.omega_lipschitz, stalled_at: rep.stalled_at, sweep },
                profile.0,
                profile.1,
                profile.2,
            ))
        })
        .collect::<glvortex::Result<_>>()?;
    let mut artifacts = Vec::new();
    for (src, s, ur, ui) in &runs {
        let rows = s.iter().zip(ur).zip(ui).map(|((a, b), c)| vec![*a, *b, *c]).collect();
        artifacts.push(Artifact::Csv {
            name: format!("spiral_{}.csv", label_slug(&src.source)),
            header: vec!["s".into(), "uR".into(), "uI".into()],
            rows,
        });
    }
    let result: Vec<&SpiralSource> = runs.iter().map(|r| &r.0).collect();
    artifacts.insert(0, Artifact::json("spiral.json", meta, &result));
    // contradictions first, then stalls
    for (src, ..) in &runs {
        if src.kernel.unbordered != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: src.kernel.unbordered }).with_artifacts(artifacts);
        }
        if src.kernel.bordered != 0 {
            return Err(Error::DimensionMismatch { expected: 0, found: src.kernel.bordered }).with_artifacts(artifacts);
        }
    }
    for (src, ..) in &runs {
        if let Some((eta, beta)) = src.stalled_at {
            return Err(Error::ContinuationStalled { eta, beta }).with_artifacts(artifacts);
        }
    }
    Ok(artifacts)
}

#[derive(Serialize)]
struct HarvestResult {
    lambda: f64,
    m: u32,
    nodes: Vec<Node>,
    edges: Vec<HarvestEdge>,
    departures: Vec<Departure>,
    max_energy_increase: f64,
}

#[derive(Serialize)]
struct TraceResult {
    lambda: f64,
    initial: String,
    final_time: f64,
    steps: usize,
    rejected: usize,
    stationary: bool,
    final_rate: f64,
    max_energy_increase: f64,
    pinning_ratio: f64,
    omega_limit: Option<OmegaMatch>,
}

fn evolve(surface: &Surface, cfg: &RunConfig, meta: &Meta) -> anyhow::Result<Vec<Artifact>> {
    let set = solve(surface, cfg)?;
    let sec = &cfg.evolve;
    match sec.mode {
        EvolveMode::Harvest => {
            let rep = harvest_report(surface, &set, &sec.controls)?;
            let nodes = connection_graph(&set)?.nodes;
            let missing: Vec<String> = rep
                .edges
                .iter()
                .filter(|e| e.predicted && e.index_drop == 1 && !e.realized)
                .map(|e| format!("{}->{}", e.src, e.dst))
                .collect();
            let extra: Vec<String> = rep.edges.iter().filter(|e| e.realized && !e.predicted).map(|e| format!("{}->{}", e.src, e.dst)).collect();
            let result = HarvestResult {
                lambda: rep.lambda,
                m: rep.m,
                nodes,
                edges: rep.edges,
                departures: rep.departures,
                max_energy_increase: rep.max_energy_increase,
            };
            let artifacts = vec![Artifact::json("harvest.json", meta, &result)];
            if !missing.is_empty() || !extra.is_empty() {
                return Err(Error::EdgeMismatch(format!("not realized: [{}]; unpredicted: [{}]", missing.join(", "), extra.join(", "))))
                    .with_artifacts(artifacts);
            }
            Ok(artifacts)
        }
        EvolveMode::Trace => {
            let ev = Evolver::for_set(surface, &set)?;
            let mesh = &set.trivial.mesh;
            let initial = if sec.initial == "bump" {
                bump(surface, cfg.m, mesh)?
            } else {
                let eq = set.all().into_iter().find(|e| e.label() == sec.initial).ok_or_else(|| anyhow!("no equilibrium labelled {}", sec.initial))?;
                let mut u = eq.discrete.clone();
                if sec.perturbation != 0.0 {
                    let problem = EigenProblem::new(surface, cfg.m, eq.linearization())?;
                    let mu = problem.eigenvalues(1)?[0];
                    let phi = problem.eigenfunction(mu, mesh)?;
                    let norm = ev.op.norm(&ev.op.restrict(&phi));
                    for (v, p) in u.iter_mut().zip(&phi) {
                        *v += sec.perturbation * p / norm;
                    }
                }
                u
            };
            let mut trace = ev.integrate(&initial, sec.t_end, &sec.controls)?;
            if trace.stationary {
                trace.omega_limit = ev.omega_limit(&trace, &set.all()).ok();
            }
            let mut header = vec!["t".to_string()];
            header.extend((0..mesh.len()).map(|j| format!("u{j}")));
            header.push("E".into());
            let rows = trace
                .times
                .iter()
                .zip(&trace.profiles)
                .zip(&trace.lyapunov)
                .map(|((t, u), e)| {
                    let mut row = Vec::with_capacity(u.len() + 2);
                    row.push(*t);
                    row.extend_from_slice(u);
                    row.push(*e);
                    row
                })
                .collect();
            let result = TraceResult {
                lambda: trace.lambda,
                initial: sec.initial.clone(),
                final_time: *trace.times.last().unwrap(),
                steps: trace.steps,
                rejected: trace.rejected,
                stationary: trace.stationary,
                final_rate: trace.final_rate,
                max_energy_increase: trace.max_energy_increase,
                pinning_ratio: trace.pinning_ratio,
                omega_limit: trace.omega_limit.clone(),
            };
            let mesh_rows = mesh.iter().map(|s| vec![*s]).collect();
            Ok(vec![
                Artifact::json("trace.json", meta, &result),
                Artifact::Csv { name: "trace.csv".into(), header, rows },
                Artifact::Csv { name: "trace_mesh.csv".into(), header: vec!["s".into()], rows: mesh_rows },
            ])
        }
    }
}

/// A failed command that still produced artifacts worth writing.
#[derive(Debug)]
pub struct PartialFailure {
    pub error: Error,
    pub artifacts: Vec<Artifact>,
}

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for PartialFailure {}

trait WithArtifacts<T> {
    fn with_artifacts(self, artifacts: Vec<Artifact>) -> anyhow::Result<T>;
}

impl<T> WithArtifacts<T> for Result<T, Error> {
    fn with_artifacts(self, artifacts: Vec<Artifact>) -> anyhow::Result<T> {
        self.map_err(|error| PartialFailure { error, artifacts }.into())
    }
}

/// Library error behind an `anyhow` chain, if any.
pub fn library_error(err: &anyhow::Error) -> Option<&Error> {
    err.chain().find_map(|e| {
        e.downcast_ref::<Error>().or_else(|| e.downcast_ref::<PartialFailure>().map(|p| &p.error))
    })
}
