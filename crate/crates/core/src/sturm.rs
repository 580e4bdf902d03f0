//! Singular Sturm–Liouville problems on the meridian.
//!
//! For a potential `q(s)` the linear operator is
//! `L y = (1/a)(a y')' − (m²/a²) y + q y` on `L²(a ds)`, with a regular vortex
//! at `s = 0` (and at `s = s*` on closed surfaces) and the Robin condition at
//! `s*` otherwise. Eigenvalues `μ_0 > μ_1 > …` are simple and the `j`-th
//! eigenfunction has exactly `j` interior zeros.
//!
//! Eigenvalues are located through a Prüfer angle computed in the regularized
//! variable `Y = y / E(s)`. Writing `Z = a Y' + m Y`, the pair `(Y, Z)` is a
//! positive multiple of `(y, a y')`, so `ψ = atan2(Y, Z)` is the classical
//! Prüfer angle. It obeys a first-order equation that is started at the
//! cutoff from the vortex asymptotics and never overflows.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{regularizer, Regularizer, Surface};
use crate::ode::{integrate, Control, Tolerance};
use crate::roots::brent;
use crate::shooting;

/// Gap below which an eigenvalue is treated as zero.
pub const DEFAULT_GAP: f64 = 1e-6;

/// Zeroth-order coefficient of the operator.
#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// `q = λ (1 − 3u²)` around the equilibrium launched with shooting
    /// parameter `d_left` at the origin; on closed surfaces the right half is
    /// integrated from `s*` with `d_right`.
    Linearization { lambda: f64, d_left: f64, d_right: f64 },
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::Linearization { lambda, d_left, d_right } => {
                write!(f, "Linearization {{ lambda: {lambda}, d_left: {d_left}, d_right: {d_right} }}")
            }
            Potential::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenProblem {
    pub surface: Surface,
    pub m: u32,
    pub potential: Potential,
    /// Constant added to the potential.
    pub shift: f64,
    reg: Regularizer,
}

/// Leading eigenvalues and the zero counts of their eigenfunctions.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Strictly decreasing `μ_0 > μ_1 > …`, or for [`bifurcation_points`]
    /// the increasing `λ_k = −μ_k`.
    pub eigenvalues: Vec<f64>,
    pub oscillations: Vec<usize>,
}

/// Result of [`count_unstable`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnstableCount {
    pub count: usize,
    /// No eigenvalue lies in `[−gap, gap]`.
    pub gap: f64,
    /// Eigenvalue closest to zero.
    pub nearest: f64,
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

struct Sample {
    s: f64,
    psi: f64,
    ln_r: f64,
}

impl EigenProblem {
    pub fn new(surface: &Surface, m: u32, potential: Potential) -> Result<Self> {
        surface.validate()?;
        if let Potential::Linearization { lambda, .. } = potential {
            if !(lambda > 0.0) {
                return Err(Error::InvalidArgument("linearization needs lambda > 0".into()));
            }
        }
        Ok(Self { surface: surface.clone(), m, potential, shift: 0.0, reg: regularizer(surface, m)? })
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    fn sup_potential(&self) -> f64 {
        let base = match &self.potential {
            Potential::Constant(c) => *c,
            Potential::Linearization { lambda, .. } => *lambda,
            Potential::Function(f) => {
                let n = 2048;
                (0..=n).map(|i| f(self.surface.s_star * i as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max).abs() * 1.1 + 1.0
            }
        };
        base + self.shift
    }

    fn cutoff(&self) -> f64 {
        let s = 1e-4 * self.surface.s_star;
        match self.potential {
            Potential::Linearization { lambda, .. } => shooting::cutoff(&self.surface, lambda),
            _ => s,
        }
    }

    /// Integrate the Prüfer system from the vortex on `side` up to `end`
    /// (measured from that vortex), recording samples at `outputs`.
    fn shoot(&self, mu: f64, side: Side, end: f64, outputs: &[f64], samples: &mut Vec<Sample>) -> Result<(f64, f64)> {
        let m = self.m as f64;
        let sf = &self.surface;
        let s_star = sf.s_star;
        let s0 = self.cutoff();
        let (lambda, d) = match (&self.potential, side) {
            (Potential::Linearization { lambda, d_left, .. }, Side::Left) => (*lambda, *d_left),
            (Potential::Linearization { lambda, d_right, .. }, Side::Right) => (*lambda, *d_right),
            _ => (0.0, 0.0),
        };
        let shift = self.shift;
        let potential = &self.potential;
        let reg = &self.reg;
        let q_at = |s: f64, w: f64| -> f64 {
            shift
                + match potential {
                    Potential::Constant(c) => *c,
                    Potential::Linearization { lambda, .. } => {
                        let u = w * reg.e(s);
                        lambda * (1.0 - 3.0 * u * u)
                    }
                    Potential::Function(f) => match side {
                        Side::Left => f(s),
                        Side::Right => f(s_star - s),
                    },
                }
        };
        let rhs = |s: f64, y: &[f64; 4]| -> [f64; 4] {
            let a = sf.a(s);
            let (dw, dp) = if lambda > 0.0 { shooting::rhs(a, reg.e(s), m, lambda, y[0], y[1]) } else { (0.0, 0.0) };
            let v = q_at(s, y[0]) - mu;
            let (sn, cs) = y[2].sin_cos();
            let dpsi = (cs * cs - m * m * sn * sn) / a + a * v * sn * sn;
            let dlr = (sn * cs * (1.0 + m * m - a * a * v) - m) / a;
            [dw, dp, dpsi, dlr]
        };

        let [w0, p0] = shooting::launch_data(self.m, lambda, d, s0);
        let coef = -(q_at(s0, w0) - mu) / (4.0 * (m + 1.0));
        let big_y = 1.0 + coef * s0 * s0;
        let big_p = 2.0 * coef * s0 * s0;
        let z = big_p + m * big_y;
        let y0 = [w0, p0, big_y.atan2(z), 0.5 * (big_y * big_y + z * z).ln()];

        if !(end > s0) {
            return Err(Error::InvalidArgument(format!("section {end} lies below the cutoff {s0}")));
        }
        let tol = Tolerance { rtol: 1e-12, atol: 1e-12, max_steps: 2_000_000 };
        let out = integrate(rhs, s0, y0, end, outputs, tol, |s, y, is_out| {
            if is_out {
                samples.push(Sample { s, psi: y[2], ln_r: y[3] });
            }
            Control::Continue
        })?;
        Ok((out.y[2], out.y[3]))
    }

    /// Prüfer angle of the far-end condition, in `[π/2, π]`.
    fn theta_right(&self) -> f64 {
        let (a1, a2) = self.surface.robin_normalized().expect("surface with boundary");
        PI - a2.atan2(a1 * self.surface.a(self.surface.s_star))
    }

    /// Angle mismatch `D(μ)`: decreasing in `μ`, with `D(μ_j) = jπ`.
    pub fn mismatch(&self, mu: f64) -> Result<f64> {
        let sf = &self.surface;
        if sf.boundary_empty {
            let mid = sf.midpoint();
            let (left, right) = rayon::join(
                || self.shoot(mu, Side::Left, mid, &[], &mut Vec::new()),
                || self.shoot(mu, Side::Right, mid, &[], &mut Vec::new()),
            );
            Ok(left?.0 - PI + right?.0)
        } else {
            let (psi, _) = self.shoot(mu, Side::Left, sf.s_star, &[], &mut Vec::new())?;
            Ok(psi - self.theta_right())
        }
    }

    /// Number of eigenvalues strictly above `mu`.
    pub fn count_above(&self, mu: f64) -> Result<usize> {
        let d = self.mismatch(mu)?;
        Ok(if d <= 0.0 { 0 } else { (d / PI).ceil() as usize })
    }

    /// Bracket `[lo, hi]` with at least `count` eigenvalues inside.
    fn bracket(&self, count: usize) -> Result<(f64, f64)> {
        let hi = self.sup_potential() + 1.0;
        let mut step = 1.0;
        for _ in 0..60 {
            let lo = hi - step;
            if self.mismatch(lo)? > (count as f64 - 0.5) * PI {
                return Ok((lo, hi));
            }
            step *= 2.0;
        }
        Err(Error::NonConvergence(format!("could not bracket {count} eigenvalues below {hi}")))
    }

    /// The `j`-th eigenvalue in a bracket known to contain it.
    fn eigenvalue_in(&self, j: usize, lo: f64, hi: f64) -> Result<f64> {
        let target = j as f64 * PI;
        let f = |mu: f64| Ok(self.mismatch(mu)? - target);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        let xtol = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        brent(f, lo, hi, flo, fhi, xtol, 0.0, 200)
    }

    /// The leading `count` eigenvalues, strictly decreasing.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let (lo, hi) = self.bracket(count)?;
        let mus: Result<Vec<f64>> = (0..count).into_par_iter().map(|j| self.eigenvalue_in(j, lo, hi)).collect();
        let mus = mus?;
        if mus.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::NonConvergence(format!("eigenvalues not strictly ordered: {mus:?}")));
        }
        Ok(mus)
    }

    /// Eigenfunction for the eigenvalue `mu`, sampled at the sorted abscissae
    /// `mesh ⊂ (0, s*)` (`(0, s*]` with boundary) and scaled to unit maximum
    /// modulus, positive near the origin.
    pub fn eigenfunction(&self, mu: f64, mesh: &[f64]) -> Result<Vec<f64>> {
        let sf = &self.surface;
        let s0 = self.cutoff();
        let reg = &self.reg;
        let mut log_y: Vec<(f64, f64)> = Vec::with_capacity(mesh.len());
        // (sign, log|y|) at each mesh point
        let push = |out: &mut Vec<(f64, f64)>, psi: f64, ln_r: f64, ln_e: f64| {
            out.push((psi.sin().signum(), ln_r + ln_e + psi.sin().abs().max(1e-300).ln()));
        };
        let split = if sf.boundary_empty { sf.midpoint() } else { sf.s_star };
        let left_pts: Vec<f64> = mesh.iter().copied().filter(|&s| s > s0 && s < split).collect();
        let mut left = Vec::new();
        let (psi_l, lr_l) = self.shoot(mu, Side::Left, split, &left_pts, &mut left)?;
        let first_left = left.first().map(|p| (p.psi, p.ln_r));
        let mut li = left.iter();
        for &s in mesh.iter().filter(|&&s| s < split || (!sf.boundary_empty && s <= split)) {
            if s <= s0 {
                let (psi, lr) = first_left.unwrap_or((psi_l, lr_l));
                push(&mut log_y, psi, lr, reg.ln_e(s));
            } else if s < split {
                let p = li.next().expect("sample per mesh point");
                push(&mut log_y, p.psi, p.ln_r, reg.ln_e(p.s));
            } else {
                push(&mut log_y, psi_l, lr_l, reg.ln_e(s));
            }
        }
        if sf.boundary_empty {
            let right_mesh: Vec<f64> = mesh.iter().copied().filter(|&s| s >= split).collect();
            let mut sig: Vec<f64> = right_mesh.iter().map(|&s| sf.s_star - s).filter(|&t| t > s0 && t < split).collect();
            sig.reverse();
            let mut right = Vec::new();
            let (psi_r, lr_r) = self.shoot(mu, Side::Right, split, &sig, &mut right)?;
            // (y, a y') from the left is parallel to (sin ψ̃, −cos ψ̃) from the right
            let sign = (psi_l.sin() * psi_r.sin() - psi_l.cos() * psi_r.cos()).signum();
            let ln_c = lr_l - lr_r;
            let lookup: Vec<(f64, f64, f64)> = right.iter().map(|p| (p.s, p.psi, p.ln_r)).collect();
            let first_right = lookup.first().map(|&(_, psi, lr)| (psi, lr)).unwrap_or((psi_r, lr_r));
            for &s in &right_mesh {
                let t = sf.s_star - s;
                let (psi, lr) = if t <= s0 {
                    first_right
                } else if let Ok(k) = lookup.binary_search_by(|p| p.0.total_cmp(&t)) {
                    (lookup[k].1, lookup[k].2)
                } else {
                    (psi_r, lr_r)
                };
                let ln_e = reg.ln_e(t.max(1e-300));
                let sn = psi.sin();
                log_y.push((sign * sn.signum(), ln_c + lr + ln_e + sn.abs().max(1e-300).ln()));
            }
        }
        let top = log_y.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(log_y.iter().map(|&(sg, l)| sg * (l - top).exp()).collect())
    }
}

/// Sign changes of `values`, ignoring entries below `floor` in modulus.
pub fn sign_changes(values: &[f64], floor: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

fn oscillation_grid(surface: &Surface) -> Vec<f64> {
    let n = 4096;
    let end = if surface.boundary_empty { n - 1 } else { n };
    (1..=end).map(|i| surface.s_star * i as f64 / n as f64).collect()
}

/// Leading `count` eigenvalues with the zero count of each eigenfunction.
pub fn spectrum(problem: &EigenProblem, count: usize) -> Result<Spectrum> {
    let eigenvalues = problem.eigenvalues(count)?;
    let grid = oscillation_grid(&problem.surface);
    let oscillations: Result<Vec<usize>> = eigenvalues
        .par_iter()
        .map(|&mu| Ok(sign_changes(&problem.eigenfunction(mu, &grid)?, 1e-12)))
        .collect();
    Ok(Spectrum { eigenvalues, oscillations: oscillations? })
}

/// The first `count` values `λ_k` at which the trivial equilibrium changes
/// stability, i.e. the eigenvalues of `−Δ` restricted to m-armed functions.
pub fn bifurcation_points(surface: &Surface, m: u32, count: usize) -> Result<Spectrum> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let problem = EigenProblem::new(surface, m, Potential::Constant(0.0))?;
    let spec = spectrum(&problem, count)?;
    Ok(Spectrum { eigenvalues: spec.eigenvalues.iter().map(|mu| -mu).collect(), oscillations: spec.oscillations })
}

/// Number of positive eigenvalues, certified by a gap of [`DEFAULT_GAP`].
pub fn count_unstable(problem: &EigenProblem) -> Result<UnstableCount> {
    count_unstable_with(problem, DEFAULT_GAP)
}

pub fn count_unstable_with(problem: &EigenProblem, gap_tol: f64) -> Result<UnstableCount> {
    let result = unstable_count_gap(problem)?;
    if result.gap < gap_tol {
        return Err(Error::ZeroEigenvalueSuspected { gap: result.gap, nearest: result.nearest });
    }
    Ok(result)
}

/// Count and distance to the nearest eigenvalue without a gap verdict.
pub fn unstable_count_gap(problem: &EigenProblem) -> Result<UnstableCount> {
    let count = problem.count_above(0.0)?;
    let (lo, hi) = problem.bracket(count + 1)?;
    let hi = hi.max(1.0);
    let above = if count > 0 { Some(problem.eigenvalue_in(count - 1, 0.0, hi)?) } else { None };
    let below = problem.eigenvalue_in(count, lo.min(-1.0), 0.0)?;
    let nearest = match above {
        Some(a) if a < -below => a,
        _ => below,
    };
    Ok(UnstableCount { count, gap: nearest.abs(), nearest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_sphere};

    #[test]
    fn sphere_bifurcation_points() {
        let spec = bifurcation_points(&make_sphere(), 1, 3).unwrap();
        for (got, want) in spec.eigenvalues.iter().zip([2.0, 6.0, 12.0]) {
            assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
        }
        assert_eq!(spec.oscillations, vec![0, 1, 2]);
    }

    #[test]
    fn disk_dirichlet_bifurcation_points() {
        let spec = bifurcation_points(&make_disk(), 1, 2).unwrap();
        let want = [3.8317059702f64.powi(2), 7.0155866698f64.powi(2)];
        for (got, want) in spec.eigenvalues.iter().zip(want) {
            assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn disk_neumann_first_point() {
        let spec = bifurcation_points(&make_disk().neumann().unwrap(), 1, 1).unwrap();
        let want = 1.8411837813f64.powi(2);
        assert!((spec.eigenvalues[0] - want).abs() < 1e-6 * want);
    }

    #[test]
    fn trivial_equilibrium_counts() {
        let sphere = make_sphere();
        for (lambda, want) in [(4.0, 1), (13.0, 3)] {
            let p = EigenProblem::new(&sphere, 1, Potential::Constant(lambda)).unwrap();
            assert_eq!(count_unstable(&p).unwrap().count, want);
        }
        let p = EigenProblem::new(&sphere, 1, Potential::Constant(0.0)).unwrap();
        assert_eq!(count_unstable(&p).unwrap().count, 0);
    }

    #[test]
    fn zero_eigenvalue_is_flagged() {
        let p = EigenProblem::new(&make_sphere(), 1, Potential::Constant(2.0)).unwrap();
        assert!(matches!(count_unstable(&p), Err(Error::ZeroEigenvalueSuspected { .. })));
    }

    #[test]
    fn sign_change_counter() {
        assert_eq!(sign_changes(&[1.0, 2.0, 0.5], 1e-9), 0);
        assert_eq!(sign_changes(&[1.0, 1e-12, -1.0, 2.0], 1e-9), 2);
    }
}
