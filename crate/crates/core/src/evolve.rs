//! Time integration of the radial amplitude equation
//! `u_t = L u + λ (1 − u²) u` and empirical harvesting of heteroclinic
//! connections.
//!
//! Space is discretized with the same stencil as the equilibrium polish, so
//! the library equilibria are exact fixed points of the semi-discrete flow.
//! Time stepping is the two-stage linearly implicit Rosenbrock scheme ROS2,
//! which treats `L` implicitly (L-stable), linearizes the cubic term, and has
//! the discrete equilibria as exact fixed points. Steps are controlled by the
//! embedded first-order solution.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::connection_graph;
use crate::equilibria::{EquilibriumSet, VortexEquilibrium};
use crate::error::{Error, Result};
use crate::fd::{FarEnd, FdOperator};
use crate::geometry::{regularizer, Surface};
use crate::interp::solve_tridiagonal;
use crate::sturm::EigenProblem;

const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    /// Project onto the mirror parity of the initial data, if it has one.
    Auto,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Controls {
    /// Local error target per step (absolute, sup norm).
    pub local_tol: f64,
    /// Stop once `‖u_t‖ < stationary_tol`.
    pub stationary_tol: f64,
    pub stop_when_stationary: bool,
    pub t_max: f64,
    /// Time between stored profiles; the final state is always stored.
    pub cadence: f64,
    pub h_initial: f64,
    /// Largest step as a multiple of `1 / max(λ, 1)`.
    pub h_max_scale: f64,
    pub symmetry: Symmetry,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            local_tol: 1e-8,
            stationary_tol: 1e-8,
            stop_when_stationary: true,
            t_max: 1e4,
            cadence: 1.0,
            h_initial: 1e-4,
            h_max_scale: 0.5,
            symmetry: Symmetry::Auto,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaMatch {
    pub label: String,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub lambda: f64,
    pub mesh: Vec<f64>,
    pub times: Vec<f64>,
    /// Stored profiles at all mesh nodes.
    pub profiles: Vec<Vec<f64>>,
    /// Energy at the stored times.
    pub lyapunov: Vec<f64>,
    /// Largest energy increase over a single accepted step.
    pub max_energy_increase: f64,
    /// `‖u_t‖` at the final time.
    pub final_rate: f64,
    pub stationary: bool,
    pub steps: usize,
    pub rejected: usize,
    /// Largest `|u(t, s_0)| / E(s_0)` over accepted steps.
    pub pinning_ratio: f64,
    pub omega_limit: Option<OmegaMatch>,
}

impl EvolutionTrace {
    pub fn final_profile(&self) -> &[f64] {
        self.profiles.last().expect("trace stores the initial state")
    }

    /// Energy never rises by more than `tol` over one step.
    pub fn lyapunov_monotone(&self, tol: f64) -> bool {
        self.max_energy_increase <= tol
    }
}

/// Evolution on a fixed mesh.
#[derive(Clone, Debug)]
pub struct Evolver {
    pub op: FdOperator,
    pub lambda: f64,
    e_s0: f64,
    /// Mirror map of unknowns on closed surfaces.
    mirror: bool,
}

impl Evolver {
    pub fn new(surface: &Surface, m: u32, lambda: f64, mesh: Vec<f64>) -> Result<Self> {
        let op = FdOperator::new(surface, m, mesh)?;
        let e_s0 = regularizer(surface, m)?.e(op.mesh[0]);
        let mirror = matches!(op.far, FarEnd::Vortex(_));
        Ok(Self { op, lambda, e_s0, mirror })
    }

    /// Evolver on the mesh of a set of equilibria.
    pub fn for_set(surface: &Surface, set: &EquilibriumSet) -> Result<Self> {
        Self::new(surface, set.m, set.lambda, set.trivial.mesh.clone())
    }

    /// Right-hand side `L u + λ (1 − u²) u` on the unknowns.
    pub fn rate(&self, u: &[f64]) -> Vec<f64> {
        self.op.equilibrium_residual(self.lambda, u)
    }

    /// Discrete energy of a full-mesh profile.
    pub fn lyapunov(&self, full: &[f64]) -> f64 {
        self.op.lyapunov(self.lambda, &self.op.restrict(full))
    }

    fn parity_of(&self, u: &[f64]) -> Option<f64> {
        if !self.mirror {
            return None;
        }
        let n = u.len();
        let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        for sign in [1.0, -1.0] {
            if (0..n).all(|i| (u[i] - sign * u[n - 1 - i]).abs() <= 1e-12 * scale) {
                return Some(sign);
            }
        }
        None
    }

    fn project(u: &mut [f64], sign: f64) {
        let n = u.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let v = 0.5 * (u[i] + sign * u[j]);
            u[i] = v;
            u[j] = sign * v;
        }
        if n % 2 == 1 && sign < 0.0 {
            u[n / 2] = 0.0;
        }
    }

    /// One ROS2 step; returns the new state and the embedded error estimate.
    fn step(&self, u: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
        let op = &self.op;
        let n = u.len();
        let lam = self.lambda;
        let gh = GAMMA * h;
        let sub: Vec<f64> = op.lower.iter().map(|c| -gh * c).collect();
        let sup: Vec<f64> = op.upper.iter().map(|c| -gh * c).collect();
        let diag: Vec<f64> = (0..n).map(|i| 1.0 - gh * (op.diag[i] + lam * (1.0 - 3.0 * u[i] * u[i]))).collect();
        let fail = || Error::StepFailure { s: 0.0, reason: format!("singular stage matrix at h = {h:e}") };
        let k1 = solve_tridiagonal(&sub, &diag, &sup, &self.rate(u)).ok_or_else(fail)?;
        let mid: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + h * b).collect();
        let f2: Vec<f64> = self.rate(&mid).iter().zip(&k1).map(|(f, k)| f - 2.0 * k).collect();
        let k2 = solve_tridiagonal(&sub, &diag, &sup, &f2).ok_or_else(fail)?;
        let mut err = 0.0f64;
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] = u[i] + h * (1.5 * k1[i] + 0.5 * k2[i]);
            err = err.max((0.5 * h * (k1[i] + k2[i])).abs());
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure { s: 0.0, reason: format!("non-finite state at h = {h:e}") });
        }
        Ok((next, err))
    }

    /// Integrate from a full-mesh profile up to time `t_end` (or earlier
    /// quasi-stationarity if requested).
    pub fn integrate(&self, initial: &[f64], t_end: f64, controls: &Controls) -> Result<EvolutionTrace> {
        let op = &self.op;
        if initial.len() != op.mesh.len() {
            return Err(Error::InvalidArgument(format!("profile has {} values, mesh has {}", initial.len(), op.mesh.len())));
        }
        let mut u = op.restrict(initial);
        let parity = match controls.symmetry {
            Symmetry::Auto => self.parity_of(&u),
            Symmetry::Off => None,
        };
        if let Some(sign) = parity {
            Self::project(&mut u, sign);
        }
        let h_max = controls.h_max_scale / self.lambda.max(1.0);
        let t_end = t_end.min(controls.t_max);
        let mut t = 0.0;
        let mut h = controls.h_initial.min(h_max);
        let mut energy = op.lyapunov(self.lambda, &u);
        let mut trace = EvolutionTrace {
            lambda: self.lambda,
            mesh: op.mesh.clone(),
            times: vec![0.0],
            profiles: vec![op.full_profile(&u)],
            lyapunov: vec![energy],
            max_energy_increase: f64::NEG_INFINITY,
            final_rate: op.norm(&self.rate(&u)),
            stationary: false,
            steps: 0,
            rejected: 0,
            pinning_ratio: (op.r0 * u[0]).abs() / self.e_s0,
            omega_limit: None,
        };
        let mut stored = 0usize;
        let mut next_store = controls.cadence;
        while t < t_end {
            if controls.stop_when_stationary && trace.final_rate < controls.stationary_tol {
                trace.stationary = true;
                break;
            }
            // land exactly on storage times
            let landing = next_store.min(t_end);
            let lands = h >= landing - t;
            let h_free = h;
            if lands {
                h = landing - t;
            }
            let (mut next, err) = self.step(&u, h)?;
            let ratio = err / controls.local_tol;
            if ratio > 1.0 {
                trace.rejected += 1;
                h *= (0.9 / ratio.sqrt()).max(0.2);
                if h < 1e-14 * (1.0 + t) {
                    return Err(Error::StepFailure { s: t, reason: "step size underflow".into() });
                }
                continue;
            }
            if let Some(sign) = parity {
                Self::project(&mut next, sign);
            }
            t = if lands { landing } else { t + h };
            u = next;
            trace.steps += 1;
            let e = op.lyapunov(self.lambda, &u);
            trace.max_energy_increase = trace.max_energy_increase.max(e - energy);
            energy = e;
            trace.final_rate = op.norm(&self.rate(&u));
            trace.pinning_ratio = trace.pinning_ratio.max((op.r0 * u[0]).abs() / self.e_s0);
            if lands && t == next_store {
                trace.times.push(t);
                trace.profiles.push(op.full_profile(&u));
                trace.lyapunov.push(energy);
                stored += 1;
                next_store = controls.cadence * (stored + 1) as f64;
            }
            h = (h.max(h_free.min(h * 5.0)) * (0.9 / ratio.max(1e-10).sqrt()).min(5.0)).min(h_max);
        }
        if controls.stop_when_stationary && trace.final_rate < controls.stationary_tol {
            trace.stationary = true;
        }
        if *trace.times.last().unwrap() < t {
            trace.times.push(t);
            trace.profiles.push(op.full_profile(&u));
            trace.lyapunov.push(energy);
        }
        if trace.steps == 0 {
            trace.max_energy_increase = 0.0;
        }
        Ok(trace)
    }

    /// Weighted L² distance between two full-mesh profiles.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = self.op.restrict(a).iter().zip(self.op.restrict(b)).map(|(x, y)| x - y).collect();
        self.op.norm(&diff)
    }

    /// Nearest library equilibrium to the final state of a quasi-stationary
    /// trace, required within `1e-4`.
    pub fn omega_limit(&self, trace: &EvolutionTrace, library: &[&VortexEquilibrium]) -> Result<OmegaMatch> {
        if !trace.stationary {
            return Err(Error::Unmatched { distance: f64::INFINITY });
        }
        let last = trace.final_profile();
        let mut best = OmegaMatch { label: String::new(), distance: f64::INFINITY };
        for e in library {
            if e.mesh.len() != last.len() {
                return Err(Error::InvalidArgument("library equilibrium on a different mesh".into()));
            }
            let d = self.distance(last, &e.discrete);
            if d < best.distance {
                best = OmegaMatch { label: e.label(), distance: d };
            }
        }
        if best.distance < OMEGA_MATCH_TOL {
            Ok(best)
        } else {
            Err(Error::Unmatched { distance: best.distance })
        }
    }
}

/// Match distance for ω-limits.
pub const OMEGA_MATCH_TOL: f64 = 1e-4;
/// Perturbation size along unstable eigenfunctions.
pub const DEPARTURE_EPS: f64 = 1e-4;

/// Energy of a full-mesh profile.
pub fn lyapunov(surface: &Surface, m: u32, lambda: f64, mesh: &[f64], profile: &[f64]) -> Result<f64> {
    Ok(Evolver::new(surface, m, lambda, mesh.to_vec())?.lyapunov(profile))
}

/// Positive bump `0.5·E/E(s*)` with boundary, `0.5·2x/(1 + x²)` with
/// `x = E/E(s*/2)` on closed surfaces; peaks at 0.5.
pub fn bump(surface: &Surface, m: u32, mesh: &[f64]) -> Result<Vec<f64>> {
    let reg = regularizer(surface, m)?;
    let n = mesh.len();
    Ok(mesh
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            if surface.boundary_empty {
                if i == 0 || i + 1 == n {
                    return 0.0;
                }
                let x = (reg.ln_e(s) - reg.ln_e(surface.midpoint())).exp();
                0.5 * 2.0 * x / (1.0 + x * x)
            } else {
                0.5 * (reg.ln_e(s) - reg.ln_e(surface.s_star)).exp()
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Departure {
    pub source: String,
    /// Which unstable eigenfunction (0 = most unstable).
    pub mode: usize,
    pub sign: i8,
    pub eigenvalue: f64,
    pub target: String,
    pub distance: f64,
    pub time: f64,
    pub max_energy_increase: f64,
    pub pinning_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarvestEdge {
    pub src: String,
    pub dst: String,
    pub index_drop: usize,
    pub predicted: bool,
    pub realized: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarvestReport {
    pub lambda: f64,
    pub m: u32,
    pub departures: Vec<Departure>,
    pub edges: Vec<HarvestEdge>,
    pub max_energy_increase: f64,
}

impl HarvestReport {
    pub fn realized(&self) -> BTreeSet<(String, String)> {
        self.departures.iter().map(|d| (d.source.clone(), d.target.clone())).collect()
    }
}

/// Perturb every unstable equilibrium along each unstable eigenfunction, in
/// both directions, and record where the flow settles. Fails with
/// [`Error::EdgeMismatch`] if an unpredicted edge is realized or an
/// index-drop-one edge of the connection graph is not.
pub fn harvest(surface: &Surface, set: &EquilibriumSet, controls: &Controls) -> Result<HarvestReport> {
    let report = harvest_report(surface, set, controls)?;
    let missing: Vec<String> =
        report.edges.iter().filter(|e| e.predicted && e.index_drop == 1 && !e.realized).map(|e| format!("{}->{}", e.src, e.dst)).collect();
    let extra: Vec<String> = report.edges.iter().filter(|e| e.realized && !e.predicted).map(|e| format!("{}->{}", e.src, e.dst)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::EdgeMismatch(format!("not realized: [{}]; unpredicted: [{}]", missing.join(", "), extra.join(", "))));
    }
    Ok(report)
}

/// As [`harvest`] without the final comparison.
pub fn harvest_report(surface: &Surface, set: &EquilibriumSet, controls: &Controls) -> Result<HarvestReport> {
    let ev = Evolver::for_set(surface, set)?;
    let library = set.all();
    let mut jobs = Vec::new();
    for eq in &library {
        if eq.morse_index == 0 {
            continue;
        }
        let problem = EigenProblem::new(surface, set.m, eq.linearization())?;
        let mus = problem.eigenvalues(eq.morse_index)?;
        for (mode, &mu) in mus.iter().enumerate() {
            let phi = problem.eigenfunction(mu, &eq.mesh)?;
            let norm = ev.op.norm(&ev.op.restrict(&phi));
            for sign in [1i8, -1] {
                let init: Vec<f64> =
                    eq.discrete.iter().zip(&phi).map(|(u, p)| u + f64::from(sign) * DEPARTURE_EPS * p / norm).collect();
                jobs.push((eq.label(), mode, sign, mu, init));
            }
        }
    }
    let departures: Vec<Departure> = jobs
        .into_par_iter()
        .map(|(source, mode, sign, mu, init)| {
            let trace = ev.integrate(&init, controls.t_max, controls)?;
            let hit = ev.omega_limit(&trace, &library)?;
            Ok(Departure {
                source,
                mode,
                sign,
                eigenvalue: mu,
                target: hit.label,
                distance: hit.distance,
                time: *trace.times.last().unwrap(),
                max_energy_increase: trace.max_energy_increase,
                pinning_ratio: trace.pinning_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let graph = connection_graph(set)?;
    let predicted = graph.edge_set();
    let realized: BTreeSet<(String, String)> = departures.iter().map(|d| (d.source.clone(), d.target.clone())).collect();
    let index = |id: &str| library.iter().find(|e| e.label() == id).map_or(0, |e| e.morse_index);
    let edges = predicted
        .union(&realized)
        .map(|(src, dst)| HarvestEdge {
            src: src.clone(),
            dst: dst.clone(),
            index_drop: index(src).saturating_sub(index(dst)),
            predicted: predicted.contains(&(src.clone(), dst.clone())),
            realized: realized.contains(&(src.clone(), dst.clone())),
        })
        .collect();
    let max_energy_increase = departures.iter().fold(f64::NEG_INFINITY, |a, d| a.max(d.max_energy_increase));
    Ok(HarvestReport { lambda: set.lambda, m: set.m, departures, edges, max_energy_increase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{solve_all, SolveOptions};
    use crate::geometry::make_sphere;

    fn opts() -> SolveOptions {
        SolveOptions { mesh_nodes: 512, ..Default::default() }
    }

    #[test]
    fn zero_energy_of_zero() {
        let s = make_sphere();
        let ev = Evolver::new(&s, 1, 4.0, crate::fd::graded_mesh(&s, 256).unwrap()).unwrap();
        assert_eq!(ev.lyapunov(&vec![0.0; 256]), 0.0);
    }

    #[test]
    fn equilibrium_stays_put() {
        let s = make_sphere();
        let set = solve_all(&s, 1, 4.0, &opts()).unwrap();
        let ev = Evolver::for_set(&s, &set).unwrap();
        let c = Controls { stop_when_stationary: false, ..Default::default() };
        let u = &set.nontrivial[0].discrete;
        let tr = ev.integrate(u, 10.0, &c).unwrap();
        assert!(ev.distance(tr.final_profile(), u) < 1e-7);
        let de = (tr.lyapunov.last().unwrap() - tr.lyapunov[0]).abs() / 10.0;
        assert!(de < 1e-9, "{de}");
        assert!(ev.lyapunov(u) < 0.0);
    }

    #[test]
    fn decays_below_first_bifurcation() {
        let s = make_sphere();
        let set = solve_all(&s, 1, 1.0, &opts()).unwrap();
        let ev = Evolver::for_set(&s, &set).unwrap();
        let tr = ev.integrate(&bump(&s, 1, &set.trivial.mesh).unwrap(), 1e4, &Controls::default()).unwrap();
        assert!(tr.lyapunov_monotone(1e-8));
        assert_eq!(ev.omega_limit(&tr, &set.all()).unwrap().label, "O");
    }

    #[test]
    fn harvest_principal_pair() {
        let s = make_sphere();
        let set = solve_all(&s, 1, 4.0, &opts()).unwrap();
        let rep = harvest(&s, &set, &Controls::default()).unwrap();
        let want: BTreeSet<_> = [("O", "0+"), ("O", "0-")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(rep.realized(), want);
        assert!(rep.max_energy_increase <= 1e-8);
    }
}
