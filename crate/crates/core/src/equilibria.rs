//! Vortex equilibria at fixed `λ` and their continuation in `λ`.
//!
//! For `λ ∈ (λ_k, λ_{k+1})` there are exactly `2k + 2` nontrivial m-armed
//! equilibria `±u_j`, `j = 0..=k`, where `u_j` has `j` interior zeros and Morse
//! index `j`; the trivial equilibrium has index `k + 1`. Both facts are
//! computed independently here and cross-checked.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::FdOperator;
use crate::geometry::Surface;
use crate::shooting::{Parity, ScanConfig, Shooter};
use crate::sturm::{bifurcation_points, count_unstable_with, EigenProblem, Potential, DEFAULT_GAP};

/// Magnitudes at or below this are treated as zero when counting sign changes.
pub const NOISE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Nodes of the output mesh.
    pub mesh_nodes: usize,
    pub scan: ScanConfig,
    /// Zero-eigenvalue gap for Morse index certification.
    pub gap: f64,
    /// Residual target of the discrete Newton polish.
    pub polish_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { mesh_nodes: 2048, scan: ScanConfig::default(), gap: DEFAULT_GAP, polish_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub k: usize,
    /// `+1` or `−1`.
    pub sign: i8,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.k, if self.sign > 0 { '+' } else { '-' })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VortexEquilibrium {
    pub lambda: f64,
    pub m: u32,
    /// Shooting parameter; `0` for the trivial equilibrium.
    pub d: f64,
    /// `None` for the trivial equilibrium.
    pub branch: Option<Branch>,
    pub parity: Option<Parity>,
    /// Output mesh (all nodes).
    pub mesh: Vec<f64>,
    /// Amplitude sampled from the shooting trajectory.
    pub profile: Vec<f64>,
    /// Solution of the discrete equations started from `profile`.
    pub discrete: Vec<f64>,
    /// Weighted L² residual of `discrete` in the discrete operator.
    pub discrete_residual: f64,
    /// Weighted L² distance between `profile` and `discrete`.
    pub discretization_error: f64,
    pub zero_number: usize,
    pub morse_index: usize,
    /// Distance from zero of the nearest linearized eigenvalue.
    pub spectral_gap: f64,
    /// Normalized transversality of the shooting curve at the root.
    pub hyperbolicity_margin: f64,
    pub sup_norm: f64,
}

impl VortexEquilibrium {
    pub fn is_trivial(&self) -> bool {
        self.branch.is_none()
    }

    /// Label such as `0+`, `1-`, or `O` for the trivial equilibrium.
    pub fn label(&self) -> String {
        self.branch.map_or_else(|| "O".to_string(), |b| b.to_string())
    }

    /// Potential of the linearization around this equilibrium.
    pub fn linearization(&self) -> Potential {
        let d_right = match self.parity {
            Some(Parity::Odd) => -self.d,
            _ => self.d,
        };
        if self.is_trivial() {
            Potential::Constant(self.lambda)
        } else {
            Potential::Linearization { lambda: self.lambda, d_left: self.d, d_right }
        }
    }

    fn negated(&self) -> Self {
        let mut e = self.clone();
        e.d = -e.d;
        e.branch = e.branch.map(|b| Branch { k: b.k, sign: -b.sign });
        for v in e.profile.iter_mut().chain(e.discrete.iter_mut()) {
            *v = -*v;
        }
        e
    }
}

/// All equilibria at one `λ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub lambda: f64,
    pub m: u32,
    /// `λ ∈ (λ_k, λ_{k+1})`; `None` below `λ_0`.
    pub k: Option<usize>,
    pub bifurcation_points: Vec<f64>,
    pub trivial: VortexEquilibrium,
    /// Ordered `0+, 0-, 1+, 1-, …`.
    pub nontrivial: Vec<VortexEquilibrium>,
}

impl EquilibriumSet {
    /// Trivial equilibrium first, then the nontrivial ones.
    pub fn all(&self) -> Vec<&VortexEquilibrium> {
        std::iter::once(&self.trivial).chain(&self.nontrivial).collect()
    }
}

/// Strict sign changes of an interior profile.
///
/// Endpoint entries are excluded and magnitudes `≤ floor` ignored; a run of
/// three or more ignored interior entries between resolved ones is reported as
/// [`Error::UnresolvedZero`]. A profile below the floor everywhere has no sign
/// changes.
pub fn zero_number(values: &[f64], mesh: &[f64], floor: f64) -> Result<usize> {
    let n = values.len();
    if n < 3 {
        return Ok(0);
    }
    let mut count = 0;
    let mut last: Option<(usize, f64)> = None;
    for i in 1..n - 1 {
        let v = values[i];
        if v.abs() <= floor {
            continue;
        }
        if let Some((j, lv)) = last {
            if i - j > 3 {
                return Err(Error::UnresolvedZero { s: mesh[(i + j) / 2] });
            }
            if lv.signum() != v.signum() {
                count += 1;
            }
        }
        last = Some((i, v));
    }
    Ok(count)
}

/// The bifurcation points below `λ` plus the first one above it.
fn points_covering(surface: &Surface, m: u32, lambda: f64) -> Result<Vec<f64>> {
    let mut count = 4;
    loop {
        let pts = bifurcation_points(surface, m, count)?.eigenvalues;
        if *pts.last().unwrap() > lambda {
            return Ok(pts);
        }
        count *= 2;
        if count > 4096 {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} too large")));
        }
    }
}

/// Position of `λ` among the bifurcation points, refusing values inside the
/// gap of one of them.
pub fn locate(points: &[f64], lambda: f64, gap: f64) -> Result<Option<usize>> {
    for &p in points {
        if (lambda - p).abs() < gap.max(1e-9 * p) {
            return Err(Error::NearBifurcation { lambda, lambda_k: p, gap: (lambda - p).abs() });
        }
    }
    let below = points.iter().filter(|&&p| p < lambda).count();
    Ok(below.checked_sub(1))
}

struct Context<'a> {
    shooter: Shooter,
    op: FdOperator,
    mesh: Vec<f64>,
    opts: &'a SolveOptions,
}

impl Context<'_> {
    fn build(&self, d: f64, branch: Option<Branch>, parity: Option<Parity>) -> Result<VortexEquilibrium> {
        let surface = &self.shooter.surface;
        let (m, lambda) = (self.shooter.m, self.shooter.lambda);
        let profile: Vec<f64> = if branch.is_some() {
            self.shooter.profile(d, parity, &self.mesh)?.into_iter().map(|(u, _)| u).collect()
        } else {
            vec![0.0; self.mesh.len()]
        };
        let zero_number = zero_number(&profile, &self.mesh, NOISE_FLOOR)?;
        let mut eq = VortexEquilibrium {
            lambda,
            m,
            d,
            branch,
            parity,
            mesh: self.mesh.clone(),
            sup_norm: profile.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
            discrete: Vec::new(),
            profile,
            discrete_residual: 0.0,
            discretization_error: 0.0,
            zero_number,
            morse_index: 0,
            spectral_gap: 0.0,
            hyperbolicity_margin: 0.0,
        };
        let problem = EigenProblem::new(surface, m, eq.linearization())?;
        let (count, margin) = rayon::join(
            || count_unstable_with(&problem, self.opts.gap),
            || self.shooter.transversality_margin(d, if branch.is_some() { parity } else { None }),
        );
        let count = count?;
        eq.morse_index = count.count;
        eq.spectral_gap = count.gap;
        eq.hyperbolicity_margin = margin?;

        let guess = self.op.restrict(&eq.profile);
        let (u, res) = self.op.polish_equilibrium(lambda, &guess, self.opts.polish_tol)?;
        eq.discrete = self.op.full_profile(&u);
        eq.discrete_residual = res;
        let diff: Vec<f64> = u.iter().zip(&guess).map(|(a, b)| a - b).collect();
        eq.discretization_error = self.op.norm(&diff);
        Ok(eq)
    }
}

/// All equilibria at `λ`, with zero numbers, Morse indices and
/// hyperbolicity margins.
pub fn solve_all(surface: &Surface, m: u32, lambda: f64, opts: &SolveOptions) -> Result<EquilibriumSet> {
    let points = points_covering(surface, m, lambda)?;
    let k = locate(&points, lambda, opts.gap)?;
    let shooter = Shooter::with_config(surface, m, lambda, opts.scan)?;
    let op = FdOperator::graded(surface, m, opts.mesh_nodes)?;
    let mesh = op.mesh.clone();
    let ctx = Context { shooter, op, mesh, opts };

    let roots = ctx.shooter.find_roots()?;
    let expected = k.map_or(0, |k| k + 1);
    if roots.len() != expected {
        return Err(Error::CountMismatch { lambda, expected, found: roots.len() });
    }
    let trivial = ctx.build(0.0, None, None)?;
    let positive: Result<Vec<VortexEquilibrium>> = roots
        .par_iter()
        .map(|r| ctx.build(r.d, Some(Branch { k: r.branch, sign: 1 }), r.parity))
        .collect();
    let positive = positive?;

    if trivial.morse_index != expected {
        return Err(Error::IndexMismatch(format!(
            "trivial equilibrium at lambda = {lambda} has index {}, expected {expected}",
            trivial.morse_index
        )));
    }
    for e in &positive {
        let b = e.branch.unwrap();
        if e.zero_number != b.k || e.morse_index != b.k {
            return Err(Error::IndexMismatch(format!(
                "branch {b} at lambda = {lambda}: zero number {}, Morse index {}",
                e.zero_number, e.morse_index
            )));
        }
    }
    let nontrivial = positive.iter().flat_map(|e| [e.clone(), e.negated()]).collect();
    Ok(EquilibriumSet { lambda, m, k, bifurcation_points: points, trivial, nontrivial })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub d: f64,
    pub sup_norm: f64,
    pub zero_number: usize,
    pub morse_index: usize,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub m: u32,
    pub lambda_grid: Vec<f64>,
    pub bifurcation_points: Vec<f64>,
    /// Keyed by branch label, e.g. `"0+"`.
    pub branches: BTreeMap<String, Vec<BranchPoint>>,
    /// Grid values refused for lying within the gap of a bifurcation point.
    pub skipped: Vec<f64>,
}

impl BifurcationDiagram {
    /// First grid value at which a branch is populated.
    pub fn onset(&self, label: &str) -> Option<f64> {
        self.branches.get(label).and_then(|b| b.first()).map(|p| p.lambda)
    }
}

/// Equilibria on an evenly spaced `λ` grid, joined into branches.
pub fn diagram(surface: &Surface, m: u32, range: (f64, f64), steps: usize, opts: &SolveOptions) -> Result<BifurcationDiagram> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) || steps < 2 {
        return Err(Error::InvalidArgument("need 0 < lambda_min < lambda_max and at least two steps".into()));
    }
    let grid: Vec<f64> = (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect();
    let points = points_covering(surface, m, hi)?;
    let results: Vec<Result<Option<EquilibriumSet>>> = grid
        .par_iter()
        .map(|&lambda| match solve_all(surface, m, lambda, opts) {
            Ok(set) => Ok(Some(set)),
            Err(Error::NearBifurcation { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();

    let mut diagram = BifurcationDiagram {
        m,
        lambda_grid: grid.clone(),
        bifurcation_points: points.iter().copied().filter(|&p| p <= hi).collect(),
        branches: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (&lambda, r) in grid.iter().zip(results) {
        let Some(set) = r? else {
            diagram.skipped.push(lambda);
            continue;
        };
        for e in &set.nontrivial {
            let b = e.branch.unwrap();
            let list = diagram.branches.entry(b.to_string()).or_default();
            if let Some(prev) = list.last() {
                if prev.zero_number != e.zero_number || prev.morse_index != e.morse_index {
                    return Err(Error::BranchDiscontinuity(format!("branch {b} changes index between {} and {lambda}", prev.lambda)));
                }
                if prev.d.signum() != e.d.signum() {
                    return Err(Error::BranchDiscontinuity(format!("branch {b} changes sign at {lambda}")));
                }
            }
            list.push(BranchPoint {
                lambda,
                d: e.d,
                sup_norm: e.sup_norm,
                zero_number: e.zero_number,
                morse_index: e.morse_index,
                margin: e.hyperbolicity_margin,
            });
        }
    }
    // every branch must persist from its onset to the top of the range
    let solved: Vec<f64> = grid.iter().copied().filter(|l| !diagram.skipped.contains(l)).collect();
    for (label, list) in &diagram.branches {
        let start = list[0].lambda;
        let expected = solved.iter().filter(|&&l| l >= start).count();
        if list.len() != expected {
            return Err(Error::BranchDiscontinuity(format!("branch {label} has gaps above {start}")));
        }
    }
    Ok(diagram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_sphere;

    #[test]
    fn zero_number_examples() {
        let mesh: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let constant: Vec<f64> = mesh.iter().map(|_| 0.7).collect();
        assert_eq!(zero_number(&constant, &mesh, NOISE_FLOOR).unwrap(), 0);
        let one_node: Vec<f64> = mesh.iter().map(|s| (2.0 * std::f64::consts::PI * s).sin()).collect();
        assert_eq!(zero_number(&one_node, &mesh, NOISE_FLOOR).unwrap(), 1);
        let mut flat = one_node.clone();
        for v in &mut flat[40..60] {
            *v = 0.0;
        }
        assert!(matches!(zero_number(&flat, &mesh, NOISE_FLOOR), Err(Error::UnresolvedZero { .. })));
    }

    #[test]
    fn sphere_lambda_4() {
        let set = solve_all(&make_sphere(), 1, 4.0, &SolveOptions::default()).unwrap();
        assert_eq!(set.k, Some(0));
        assert_eq!(set.nontrivial.len(), 2);
        assert_eq!(set.trivial.morse_index, 1);
        for e in &set.nontrivial {
            assert_eq!((e.zero_number, e.morse_index), (0, 0));
            assert!(e.sup_norm <= 1.0 + 1e-8);
            assert!(e.discrete_residual < 1e-10);
        }
    }

    #[test]
    fn sphere_below_first_point() {
        let set = solve_all(&make_sphere(), 1, 1.0, &SolveOptions::default()).unwrap();
        assert!(set.nontrivial.is_empty());
        assert_eq!(set.trivial.morse_index, 0);
    }

    #[test]
    fn refuses_bifurcation_point() {
        assert!(matches!(solve_all(&make_sphere(), 1, 6.0, &SolveOptions::default()), Err(Error::NearBifurcation { .. })));
    }
}
