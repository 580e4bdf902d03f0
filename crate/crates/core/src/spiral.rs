//! Rotating spiral waves of the complex Ginzburg–Landau equation.
//!
//! A rotating wave `e^{−iΩt} u(s) e^{imφ}` with complex radial part solves
//!
//! ```text
//! 0 = (1 + iη) L u + iλΩ u + λ (1 − |u|² − iβ|u|²) u
//! ```
//!
//! with `L` the radial operator. Solutions come in gauge orbits `e^{iθ} u`;
//! the phase condition `Σ W u_ref Im u = 0` against the real source
//! equilibrium picks one representative, and `Ω` is the extra unknown.
//!
//! The bordered system has a dense phase row and a dense `Ω` column. Both are
//! made banded by carrying `Ω` at every node (with `Ω_k = Ω_{k+1}`) and the
//! running phase sum `S_k = S_{k−1} + c_k Im u_k` (with `S_last = 0`), so
//! each Newton step is a banded LU solve with four unknowns per node.

use serde::{Deserialize, Serialize};

use crate::equilibria::VortexEquilibrium;
use crate::error::{Error, Result};
use crate::fd::FdOperator;
use crate::geometry::Surface;
use crate::linalg::BandMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    /// `η = β`: the real vortex rotating rigidly with `Ω = η`.
    Vortex,
    Spiral,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpiralWave {
    pub eta: f64,
    pub beta: f64,
    pub omega: f64,
    /// Values at all mesh nodes.
    pub mesh: Vec<f64>,
    pub u_re: Vec<f64>,
    pub u_im: Vec<f64>,
    pub residual_norm: f64,
    /// `Σ W u_ref Im u`, normalized by `‖u_ref‖`.
    pub phase: f64,
    pub sup_norm: f64,
    pub kind: WaveKind,
    /// Label of the source equilibrium.
    pub source: String,
}

impl SpiralWave {
    /// Largest `|Im u|` on the mesh.
    pub fn imag_sup(&self) -> f64 {
        self.u_im.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 25 }
    }
}

/// Kernel dimensions of the Jacobian at `(Ω, η, β) = (0, 0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub unbordered: usize,
    pub bordered: usize,
    /// Eigenvalue threshold used for the unbordered count.
    pub threshold: f64,
    /// Normalized `|⟨ℓ, v⟩|` of phase row and kernel vector.
    pub phase_pairing: f64,
    /// Normalized `|⟨w, b⟩|` of cokernel and `Ω` column.
    pub border_pairing: f64,
}

/// Newton solver for rotating waves continued from one real equilibrium.
#[derive(Clone, Debug)]
pub struct SpiralProblem {
    pub op: FdOperator,
    pub lambda: f64,
    pub source: String,
    /// Real template on the unknowns.
    pub template: Vec<f64>,
    /// Phase weights `W u_ref / ‖u_ref‖`.
    coef: Vec<f64>,
}

/// Unknown layout: four per node.
const UR: usize = 0;
const UI: usize = 1;
const OM: usize = 2;
const SS: usize = 3;

impl SpiralProblem {
    /// Set up on the source equilibrium's mesh, using its discrete profile
    /// as template.
    pub fn new(surface: &Surface, source: &VortexEquilibrium) -> Result<Self> {
        if source.is_trivial() {
            return Err(Error::InvalidArgument("the trivial equilibrium has a degenerate gauge orbit".into()));
        }
        let op = FdOperator::new(surface, source.m, source.mesh.clone())?;
        let template = op.restrict(&source.discrete);
        let norm = template.iter().zip(&op.weights).map(|(u, w)| w * u * u).sum::<f64>().sqrt();
        let coef = template.iter().zip(&op.weights).map(|(u, w)| w * u / norm).collect();
        Ok(Self { op, lambda: source.lambda, source: source.label(), template, coef })
    }

    fn n(&self) -> usize {
        self.op.len()
    }

    /// Complex residual `(R, I)` and the normalized phase functional.
    pub fn residual(&self, ur: &[f64], ui: &[f64], omega: f64, eta: f64, beta: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let lr = self.op.apply(ur);
        let li = self.op.apply(ui);
        let lam = self.lambda;
        let mut r = vec![0.0; self.n()];
        let mut im = vec![0.0; self.n()];
        for k in 0..self.n() {
            let nn = ur[k] * ur[k] + ui[k] * ui[k];
            r[k] = lr[k] - eta * li[k] - lam * omega * ui[k] + lam * ((1.0 - nn) * ur[k] + beta * nn * ui[k]);
            im[k] = li[k] + eta * lr[k] + lam * omega * ur[k] + lam * ((1.0 - nn) * ui[k] - beta * nn * ur[k]);
        }
        let phase = self.coef.iter().zip(ui).map(|(c, v)| c * v).sum();
        (r, im, phase)
    }

    /// Banded Jacobian of the bordered system; unknown `4k + c` holds
    /// component `c` of `(Re u, Im u, Ω, S)` at node `k`.
    pub fn jacobian(&self, ur: &[f64], ui: &[f64], omega: f64, eta: f64, beta: f64) -> BandMatrix {
        let n = self.n();
        let op = &self.op;
        let lam = self.lambda;
        let mut j = BandMatrix::zeros(4 * n, 5, 5);
        for k in 0..n {
            let (a, b) = (ur[k], ui[k]);
            let nn = a * a + b * b;
            let row_r = 4 * k + UR;
            let row_i = 4 * k + UI;
            let ldiag = op.diag[k];
            j.add(row_r, 4 * k + UR, ldiag + lam * ((1.0 - nn) - 2.0 * a * a + 2.0 * beta * a * b));
            j.add(row_r, 4 * k + UI, -eta * ldiag - lam * omega + lam * (-2.0 * a * b + beta * nn + 2.0 * beta * b * b));
            j.add(row_i, 4 * k + UR, eta * ldiag + lam * omega + lam * (-2.0 * a * b - beta * nn - 2.0 * beta * a * a));
            j.add(row_i, 4 * k + UI, ldiag + lam * ((1.0 - nn) - 2.0 * b * b - 2.0 * beta * a * b));
            j.add(row_r, 4 * k + OM, -lam * b);
            j.add(row_i, 4 * k + OM, lam * a);
            for (nb, c) in [(k.wrapping_sub(1), op.lower[k]), (k + 1, op.upper[k])] {
                if nb < n && c != 0.0 {
                    j.add(row_r, 4 * nb + UR, c);
                    j.add(row_r, 4 * nb + UI, -eta * c);
                    j.add(row_i, 4 * nb + UR, eta * c);
                    j.add(row_i, 4 * nb + UI, c);
                }
            }
            // Ω chain, closed by the phase condition S_last = 0
            if k + 1 < n {
                j.add(4 * k + OM, 4 * k + OM, 1.0);
                j.add(4 * k + OM, 4 * (k + 1) + OM, -1.0);
            } else {
                j.add(4 * k + OM, 4 * k + SS, 1.0);
            }
            // running phase sum
            j.add(4 * k + SS, 4 * k + SS, 1.0);
            if k > 0 {
                j.add(4 * k + SS, 4 * (k - 1) + SS, -1.0);
            }
            j.add(4 * k + SS, 4 * k + UI, -self.coef[k]);
        }
        j
    }

    /// Newton iteration at fixed `(η, β)` from the guess `(ur, ui, Ω)` on the
    /// unknowns.
    pub fn newton(&self, guess: (&[f64], &[f64], f64), eta: f64, beta: f64, opts: &NewtonOptions) -> Result<SpiralWave> {
        let n = self.n();
        let (mut ur, mut ui, mut omega) = (guess.0.to_vec(), guess.1.to_vec(), guess.2);
        let mut last = f64::INFINITY;
        for iter in 0..=opts.max_iter {
            let (r, im, phase) = self.residual(&ur, &ui, omega, eta, beta);
            let res = self.op.norm2(&r, &im);
            if !res.is_finite() || (iter > 3 && res > 1e3 * last.max(1e-6)) {
                return Err(Error::NewtonDiverged(format!("residual {res:e} at (eta, beta) = ({eta}, {beta})")));
            }
            if res < opts.tol && phase.abs() < 1e-12 {
                return Ok(self.wave(&ur, &ui, omega, eta, beta, res, phase));
            }
            // rounding floor of the stencil on fine meshes
            if iter > 0 && res > 0.5 * last && res < 1e3 * opts.tol && phase.abs() < 1e-12 {
                return Ok(self.wave(&ur, &ui, omega, eta, beta, res, phase));
            }
            if iter == opts.max_iter {
                break;
            }
            last = res;
            let lu = self.jacobian(&ur, &ui, omega, eta, beta).factor()?;
            let mut rhs = vec![0.0; 4 * n];
            for k in 0..n {
                rhs[4 * k + UR] = -r[k];
                rhs[4 * k + UI] = -im[k];
                // Ω chain rows are satisfied by the iterate (all Ω_k equal)
                rhs[4 * k + OM] = if k + 1 < n { 0.0 } else { -phase };
                // S_k is eliminated exactly: S_k = running sum
                rhs[4 * k + SS] = 0.0;
            }
            let dx = lu.solve(&rhs);
            for k in 0..n {
                ur[k] += dx[4 * k + UR];
                ui[k] += dx[4 * k + UI];
            }
            omega += dx[4 * (n - 1) + OM];
        }
        Err(Error::NewtonDiverged(format!("no convergence in {} iterations at (eta, beta) = ({eta}, {beta})", opts.max_iter)))
    }

    #[allow(clippy::too_many_arguments)]
    fn wave(&self, ur: &[f64], ui: &[f64], omega: f64, eta: f64, beta: f64, res: f64, phase: f64) -> SpiralWave {
        let u_re = self.op.full_profile(ur);
        let u_im = self.op.full_profile(ui);
        let sup_norm = u_re.iter().zip(&u_im).fold(0.0, |a: f64, (x, y)| a.max(x.hypot(*y)));
        SpiralWave {
            eta,
            beta,
            omega,
            mesh: self.op.mesh.clone(),
            u_re,
            u_im,
            residual_norm: res,
            phase,
            sup_norm,
            kind: if eta == beta { WaveKind::Vortex } else { WaveKind::Spiral },
            source: self.source.clone(),
        }
    }

    /// The source equilibrium as a wave at `(0, 0)` with `Ω = 0`.
    pub fn source_wave(&self) -> Result<SpiralWave> {
        self.newton((&self.template, &vec![0.0; self.n()], 0.0), 0.0, 0.0, &NewtonOptions::default())
    }

    /// Unknowns of a converged wave.
    pub fn unknowns(&self, w: &SpiralWave) -> (Vec<f64>, Vec<f64>, f64) {
        (self.op.restrict(&w.u_re), self.op.restrict(&w.u_im), w.omega)
    }

    /// Kernel dimensions at `(0, 0, 0)`: the unbordered Jacobian splits into
    /// `L + λ(1 − 3u²)` acting on `Re u` and `L + λ(1 − u²)` on `Im u`; their
    /// eigenvalues near zero are counted by inertia. The bordered system is
    /// nonsingular iff the phase row pairs with the kernel and the `Ω` column
    /// with the cokernel.
    pub fn kernel_check(&self) -> Result<KernelReport> {
        let u = &self.template;
        let lam = self.lambda;
        let threshold = 1e-8 * lam.max(1.0);
        let rr: Vec<f64> = u.iter().map(|v| lam * (1.0 - 3.0 * v * v)).collect();
        let ii: Vec<f64> = u.iter().map(|v| lam * (1.0 - v * v)).collect();
        let near_zero = |extra: &[f64]| self.op.count_below(extra, threshold) - self.op.count_below(extra, -threshold);
        let unbordered = near_zero(&rr) + near_zero(&ii);

        // kernel v = u* (gauge direction i u*), cokernel W v; Ω column i λ u*
        let w = &self.op.weights;
        let norm_w = |x: &[f64]| x.iter().zip(w).map(|(a, b)| b * a * a).sum::<f64>().sqrt();
        let nu = norm_w(u);
        let phase_pairing = self.coef.iter().zip(u).map(|(c, v)| c * v).sum::<f64>().abs()
            / (self.coef.iter().zip(w).map(|(c, ww)| c * c / ww).sum::<f64>().sqrt() * nu);
        let border_pairing = u.iter().zip(w).map(|(v, ww)| ww * v * lam * v).sum::<f64>().abs() / (nu * lam * nu);
        let mut bordered = usize::from(phase_pairing < 1e-8 || border_pairing < 1e-8);
        if bordered == 0 && self.jacobian(u, &vec![0.0; self.n()], 0.0, 0.0, 0.0).factor().is_err() {
            bordered = 1;
        }
        Ok(KernelReport { unbordered, bordered, threshold, phase_pairing, border_pairing })
    }
}

/// Kernel dimensions for a source equilibrium; a hard error unless they are
/// 1 (unbordered) and 0 (bordered).
pub fn kernel_dimension_check(surface: &Surface, source: &VortexEquilibrium) -> Result<KernelReport> {
    let report = SpiralProblem::new(surface, source)?.kernel_check()?;
    if report.unbordered != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: report.unbordered });
    }
    if report.bordered != 0 {
        return Err(Error::DimensionMismatch { expected: 0, found: report.bordered });
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub waves: Vec<SpiralWave>,
    /// Parameters where continuation gave up, if it did.
    pub stalled_at: Option<(f64, f64)>,
    /// Largest `|ΔΩ| / |Δ(η, β)|` between consecutive converged points.
    pub omega_lipschitz: f64,
}

/// Natural-parameter continuation along `path`, which must start at `(0, 0)`.
/// Failed steps are halved down to a parameter step of `1e-4`.
pub fn sweep_report(surface: &Surface, source: &VortexEquilibrium, path: &[(f64, f64)], opts: &NewtonOptions) -> Result<SweepReport> {
    let problem = SpiralProblem::new(surface, source)?;
    if path.first().is_some_and(|&(e, b)| e != 0.0 || b != 0.0) {
        return Err(Error::InvalidArgument("sweep path must start at (0, 0)".into()));
    }
    let start = problem.source_wave()?;
    let mut waves = vec![start];
    let mut lipschitz = 0.0f64;
    let mut current = (0.0, 0.0);
    for &target in path.iter().skip(1) {
        while current != target {
            let mut step = 1.0;
            let converged = loop {
                let p = if step == 1.0 {
                    target
                } else {
                    (current.0 + step * (target.0 - current.0), current.1 + step * (target.1 - current.1))
                };
                let prev = waves.last().unwrap();
                let guess = problem.unknowns(prev);
                match problem.newton((&guess.0, &guess.1, guess.2), p.0, p.1, opts) {
                    Ok(w) => break Some((p, w)),
                    Err(Error::NewtonDiverged(_) | Error::SingularJacobian(_)) => {
                        step *= 0.5;
                        let len = (target.0 - current.0).hypot(target.1 - current.1);
                        if step * len < 1e-4 {
                            break None;
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            match converged {
                Some((p, w)) => {
                    let prev = waves.last().unwrap();
                    let dp = (p.0 - current.0).hypot(p.1 - current.1);
                    if dp > 0.0 {
                        lipschitz = lipschitz.max((w.omega - prev.omega).abs() / dp);
                    }
                    waves.push(w);
                    current = p;
                }
                None => {
                    return Ok(SweepReport { waves, stalled_at: Some(current), omega_lipschitz: lipschitz });
                }
            }
        }
    }
    Ok(SweepReport { waves, stalled_at: None, omega_lipschitz: lipschitz })
}

/// As [`sweep_report`], failing with [`Error::ContinuationStalled`] if the
/// path is not completed.
pub fn sweep(surface: &Surface, source: &VortexEquilibrium, path: &[(f64, f64)], opts: &NewtonOptions) -> Result<Vec<SpiralWave>> {
    let report = sweep_report(surface, source, path, opts)?;
    match report.stalled_at {
        Some((eta, beta)) => Err(Error::ContinuationStalled { eta, beta }),
        None => Ok(report.waves),
    }
}

/// Evenly spaced path from `(0, 0)` to `to` in `steps` segments.
pub fn straight_path(to: (f64, f64), steps: usize) -> Vec<(f64, f64)> {
    (0..=steps).map(|i| (to.0 * i as f64 / steps as f64, to.1 * i as f64 / steps as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{solve_all, SolveOptions};
    use crate::geometry::make_sphere;

    fn principal() -> (Surface, VortexEquilibrium) {
        let s = make_sphere();
        let set = solve_all(&s, 1, 4.0, &SolveOptions { mesh_nodes: 512, ..Default::default() }).unwrap();
        (s, set.nontrivial[0].clone())
    }

    #[test]
    fn zero_profile_has_zero_residual() {
        let (s, e) = principal();
        let p = SpiralProblem::new(&s, &e).unwrap();
        let z = vec![0.0; p.op.len()];
        let (r, i, ph) = p.residual(&z, &z, 0.3, 0.1, -0.2);
        assert!(r.iter().chain(&i).all(|v| *v == 0.0) && ph == 0.0);
    }

    #[test]
    fn source_is_fixed_point_at_origin() {
        let (s, e) = principal();
        let w = SpiralProblem::new(&s, &e).unwrap().source_wave().unwrap();
        assert_eq!(w.omega, 0.0);
        assert!(w.imag_sup() == 0.0);
    }

    #[test]
    fn diagonal_rotates_rigidly() {
        let (s, e) = principal();
        let p = SpiralProblem::new(&s, &e).unwrap();
        let z = vec![0.0; p.op.len()];
        let w = p.newton((&p.template, &z, 0.0), 0.05, 0.05, &NewtonOptions::default()).unwrap();
        assert!((w.omega - 0.05).abs() < 1e-8);
        assert!(w.imag_sup() < 1e-8);
        assert_eq!(w.kind, WaveKind::Vortex);
    }

    #[test]
    fn off_diagonal_spiral() {
        let (s, e) = principal();
        let waves = sweep(&s, &e, &straight_path((0.05, 0.02), 5), &NewtonOptions::default()).unwrap();
        let w = waves.last().unwrap();
        assert!(w.residual_norm < 1e-10);
        assert!(w.omega.abs() > 1e-4);
        assert!(w.imag_sup() > 1e-6);
        assert_eq!(w.kind, WaveKind::Spiral);
    }

    #[test]
    fn kernel_dimensions() {
        let (s, e) = principal();
        let r = kernel_dimension_check(&s, &e).unwrap();
        assert_eq!((r.unbordered, r.bordered), (1, 0));
    }

    #[test]
    fn zero_length_path() {
        let (s, e) = principal();
        let waves = sweep(&s, &e, &[(0.0, 0.0)], &NewtonOptions::default()).unwrap();
        assert_eq!(waves.len(), 1);
        assert_eq!(waves[0].omega, 0.0);
    }
}
