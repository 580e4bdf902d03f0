//! Finite-difference discretization of the radial operator.
//!
//! The mesh is graded by equal arc length along the curve `(s, ln a(s))`,
//! which concentrates nodes near the vortices (on the sphere it is uniform in
//! `τ = ln tan(s/2)`). The operator
//! `L u = (1/a)(a u')' − (m²/a²) u` is discretized in conservative form,
//! symmetric with respect to the weights `W_i = a_i V_i`, where `V_i` is the
//! dual cell length. The first node sits at the launch cutoff and carries the
//! vortex condition `u_0 = (E(s_0)/E(s_1)) u_1`; on closed surfaces the last
//! node carries its mirror image. With boundary, the far end is either a
//! Dirichlet node or a Robin half cell.

use crate::error::{Error, Result};
use crate::geometry::{regularizer, Surface};
use crate::interp::solve_tridiagonal;
use crate::ode::{integrate, Control, Tolerance};

/// Distance of the first (and on closed surfaces the last) node from the
/// vortex, relative to `s*`.
pub const MESH_CUTOFF: f64 = 1e-4;

/// Graded mesh on `[s_0, s*]`, or on `[s_0, s* − s_0]` mirror-symmetrically
/// on closed surfaces (then `s*/2` lies strictly between the two middle nodes).
pub fn graded_mesh(surface: &Surface, n: usize) -> Result<Vec<f64>> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("mesh needs at least 8 nodes, got {n}")));
    }
    if surface.boundary_empty && n % 2 != 0 {
        return Err(Error::InvalidArgument("closed surfaces need an even node count".into()));
    }
    let s0 = MESH_CUTOFF * surface.s_star;
    let density = |s: f64| {
        let a = surface.a(s);
        (1.0 + (surface.a_prime(s) / a).powi(2)).sqrt()
    };
    let end = if surface.boundary_empty { surface.midpoint() } else { surface.s_star };
    let tol = Tolerance::new(1e-12, 1e-14);
    let total = integrate(|s, _: &[f64; 1]| [density(s)], s0, [0.0], end, &[], tol, |_, _, _| Control::Continue)?.y[0];
    let (count, spacing) = if surface.boundary_empty {
        let half = n / 2;
        (half, total / (half as f64 - 0.5))
    } else {
        (n, total / (n as f64 - 1.0))
    };
    let targets: Vec<f64> = (1..count).map(|i| i as f64 * spacing).filter(|&l| l < total).collect();
    let mut nodes = vec![s0];
    integrate(|_, y: &[f64; 1]| [1.0 / density(y[0])], 0.0, [s0], total, &targets, tol, |_, y, is_out| {
        if is_out {
            nodes.push(y[0]);
        }
        Control::Continue
    })?;
    if !surface.boundary_empty {
        nodes.push(surface.s_star);
    }
    if nodes.len() != count {
        return Err(Error::InvalidArgument(format!("mesh construction produced {} of {count} nodes", nodes.len())));
    }
    if surface.boundary_empty {
        let right: Vec<f64> = nodes.iter().rev().map(|&s| surface.s_star - s).collect();
        nodes.extend(right);
    }
    Ok(nodes)
}

/// Far-end treatment of the last unknown.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FarEnd {
    Dirichlet,
    /// Robin half cell with flux coefficient `a(s*) α1/α2`.
    Robin(f64),
    /// Mirrored vortex condition `u_{N−1} = r u_{N−2}`.
    Vortex(f64),
}

/// Symmetric three-point discretization of `L` on the unknown nodes.
#[derive(Clone, Debug)]
pub struct FdOperator {
    pub m: u32,
    pub mesh: Vec<f64>,
    /// Mesh index of each unknown.
    pub nodes: Vec<usize>,
    /// Weights `W_k = a V` of the unknowns.
    pub weights: Vec<f64>,
    pub diag: Vec<f64>,
    /// Coupling to the previous unknown (`lower[0] = 0`).
    pub lower: Vec<f64>,
    /// Coupling to the next unknown (last entry 0).
    pub upper: Vec<f64>,
    /// `a(s_{i+1/2}) / h_{i+1/2}` for every mesh edge.
    pub edge: Vec<f64>,
    /// Vortex ratio at the first node.
    pub r0: f64,
    pub far: FarEnd,
    pub a: Vec<f64>,
}

impl FdOperator {
    pub fn new(surface: &Surface, m: u32, mesh: Vec<f64>) -> Result<Self> {
        let reg = regularizer(surface, m)?;
        let n = mesh.len();
        let a: Vec<f64> = mesh.iter().map(|&s| surface.a(s)).collect();
        let edge: Vec<f64> = mesh.windows(2).map(|w| surface.a(0.5 * (w[0] + w[1])) / (w[1] - w[0])).collect();
        let r0 = (reg.ln_e(mesh[0]) - reg.ln_e(mesh[1])).exp();
        let far = if surface.boundary_empty {
            FarEnd::Vortex((reg.ln_e(surface.s_star - mesh[n - 1]) - reg.ln_e(surface.s_star - mesh[n - 2])).exp())
        } else {
            let (a1, a2) = surface.robin_normalized().expect("surface with boundary");
            if a2 == 0.0 {
                FarEnd::Dirichlet
            } else {
                FarEnd::Robin(surface.a(surface.s_star) * a1 / a2)
            }
        };
        let last = if matches!(far, FarEnd::Robin(_)) { n - 1 } else { n - 2 };
        let nodes: Vec<usize> = (1..=last).collect();
        let mm = (m * m) as f64;
        let k = nodes.len();
        let (mut weights, mut diag, mut lower, mut upper) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for (idx, &j) in nodes.iter().enumerate() {
            if j == n - 1 {
                // Robin half cell
                let w = a[j] * 0.5 * (mesh[j] - mesh[j - 1]);
                let flux = match far {
                    FarEnd::Robin(c) => c,
                    _ => unreachable!(),
                };
                weights[idx] = w;
                diag[idx] = (-flux - edge[j - 1]) / w - mm / (a[j] * a[j]);
                lower[idx] = edge[j - 1] / w;
                continue;
            }
            let w = a[j] * 0.5 * (mesh[j + 1] - mesh[j - 1]);
            weights[idx] = w;
            let mut dg = -(edge[j - 1] + edge[j]) / w - mm / (a[j] * a[j]);
            if j == 1 {
                dg += edge[0] * r0 / w;
            } else {
                lower[idx] = edge[j - 1] / w;
            }
            if j + 1 == n - 1 {
                match far {
                    FarEnd::Vortex(r) => dg += edge[j] * r / w,
                    FarEnd::Dirichlet => {}
                    FarEnd::Robin(_) => upper[idx] = edge[j] / w,
                }
            } else {
                upper[idx] = edge[j] / w;
            }
            diag[idx] = dg;
        }
        Ok(Self { m, mesh, nodes, weights, diag, lower, upper, edge, r0, far, a })
    }

    /// Operator on the default graded mesh.
    pub fn graded(surface: &Surface, m: u32, n: usize) -> Result<Self> {
        Self::new(surface, m, graded_mesh(surface, n)?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Abscissae of the unknowns.
    pub fn unknown_abscissae(&self) -> Vec<f64> {
        self.nodes.iter().map(|&j| self.mesh[j]).collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let k = u.len();
        (0..k)
            .map(|i| {
                let mut v = self.diag[i] * u[i];
                if i > 0 {
                    v += self.lower[i] * u[i - 1];
                }
                if i + 1 < k {
                    v += self.upper[i] * u[i + 1];
                }
                v
            })
            .collect()
    }

    /// Values at every mesh node from the unknowns.
    pub fn full_profile(&self, u: &[f64]) -> Vec<f64> {
        let n = self.mesh.len();
        let mut full = vec![0.0; n];
        for (idx, &j) in self.nodes.iter().enumerate() {
            full[j] = u[idx];
        }
        full[0] = self.r0 * full[1];
        match self.far {
            FarEnd::Vortex(r) => full[n - 1] = r * full[n - 2],
            FarEnd::Dirichlet => full[n - 1] = 0.0,
            FarEnd::Robin(_) => {}
        }
        full
    }

    /// Unknown values picked from a full-mesh profile.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&j| full[j]).collect()
    }

    /// Weighted L² norm `sqrt(Σ W |v|² / Σ W)`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        (self.weights.iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>() / total).sqrt()
    }

    /// Weighted L² norm of a complex vector given by its parts.
    pub fn norm2(&self, re: &[f64], im: &[f64]) -> f64 {
        self.norm(re).hypot(self.norm(im))
    }

    /// Residual `L u + λ (1 − u²) u` of the real equilibrium equation.
    pub fn equilibrium_residual(&self, lambda: f64, u: &[f64]) -> Vec<f64> {
        let mut r = self.apply(u);
        for (ri, &ui) in r.iter_mut().zip(u) {
            *ri += lambda * (1.0 - ui * ui) * ui;
        }
        r
    }

    /// Newton iteration for the discrete equilibrium from `guess`; returns
    /// the unknowns and the final residual norm.
    pub fn polish_equilibrium(&self, lambda: f64, guess: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        let mut u = guess.to_vec();
        let k = u.len();
        let mut res = self.norm(&self.equilibrium_residual(lambda, &u));
        for _ in 0..50 {
            if res < tol {
                return Ok((u, res));
            }
            let r = self.equilibrium_residual(lambda, &u);
            let diag: Vec<f64> = (0..k).map(|i| self.diag[i] + lambda * (1.0 - 3.0 * u[i] * u[i])).collect();
            let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            let du = solve_tridiagonal(&self.lower, &diag, &self.upper, &rhs)
                .ok_or_else(|| Error::SingularJacobian("equilibrium Jacobian".into()))?;
            for (ui, d) in u.iter_mut().zip(&du) {
                *ui += d;
            }
            let new_res = self.norm(&self.equilibrium_residual(lambda, &u));
            if !new_res.is_finite() {
                return Err(Error::NewtonDiverged("equilibrium polish".into()));
            }
            // stagnation at the rounding floor of the stencil
            let stalled = new_res > 0.5 * res || self.norm(&du) < 1e-14 * (1.0 + self.norm(&u));
            res = new_res;
            if stalled && res < 1e3 * tol {
                return Ok((u, res));
            }
        }
        if res < tol {
            Ok((u, res))
        } else {
            Err(Error::NewtonDiverged(format!("equilibrium polish stalled at residual {res:e}")))
        }
    }

    /// Off-diagonal of the symmetrized operator `W^{1/2} L W^{-1/2}`.
    pub fn symmetric_offdiag(&self) -> Vec<f64> {
        (1..self.len()).map(|i| self.lower[i] * (self.weights[i] / self.weights[i - 1]).sqrt()).collect()
    }

    /// Number of eigenvalues of `L + diag(extra)` below `sigma`, by Sylvester
    /// inertia of the symmetrized tridiagonal matrix.
    pub fn count_below(&self, extra: &[f64], sigma: f64) -> usize {
        let off = self.symmetric_offdiag();
        inertia_below(&self.diag.iter().zip(extra).map(|(d, e)| d + e).collect::<Vec<_>>(), &off, sigma)
    }

    /// Discrete energy `½ Σ A (Δu)² + ½ A_{1/2} (1 − r0) u_1² + boundary terms
    /// + Σ W [ m² u²/(2a²) − λ (u²/2 − u⁴/4) ]`, whose gradient in the `W`
    /// inner product is minus the equilibrium residual.
    pub fn lyapunov(&self, lambda: f64, u: &[f64]) -> f64 {
        let full = self.full_profile(u);
        let n = self.mesh.len();
        let mm = (self.m * self.m) as f64;
        let mut e = 0.5 * self.edge[0] * (1.0 - self.r0) * full[1] * full[1];
        let last_edge = match self.far {
            FarEnd::Vortex(r) => {
                e += 0.5 * self.edge[n - 2] * (1.0 - r) * full[n - 2] * full[n - 2];
                n - 2
            }
            FarEnd::Dirichlet => n - 1,
            FarEnd::Robin(c) => {
                e += 0.5 * c * full[n - 1] * full[n - 1];
                n - 1
            }
        };
        for i in 1..last_edge {
            e += 0.5 * self.edge[i] * (full[i + 1] - full[i]).powi(2);
        }
        for (idx, &j) in self.nodes.iter().enumerate() {
            let v = u[idx];
            let v2 = v * v;
            e += self.weights[idx] * (mm * v2 / (2.0 * self.a[j] * self.a[j]) - lambda * (0.5 * v2 - 0.25 * v2 * v2));
        }
        e
    }
}

/// Eigenvalues below `sigma` of the symmetric tridiagonal `(diag, off)`.
pub fn inertia_below(diag: &[f64], off: &[f64], sigma: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        d = diag[i] - sigma - if i > 0 { e2 / d } else { 0.0 };
        if d == 0.0 {
            d = -f64::EPSILON * (diag[i].abs() + sigma.abs()).max(1e-300);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_sphere};

    #[test]
    fn sphere_mesh_is_uniform_in_tau_and_symmetric() {
        let s = make_sphere();
        let mesh = graded_mesh(&s, 256).unwrap();
        assert_eq!(mesh.len(), 256);
        let tau: Vec<f64> = mesh.iter().map(|x| (0.5 * x).tan().ln()).collect();
        let h = tau[1] - tau[0];
        for w in tau.windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-8);
        }
        for i in 0..128 {
            assert!((mesh[i] + mesh[255 - i] - std::f64::consts::PI).abs() < 1e-14);
        }
        assert!(mesh[127] < s.midpoint() && mesh[128] > s.midpoint());
    }

    #[test]
    fn operator_is_weight_symmetric() {
        let op = FdOperator::graded(&make_disk().neumann().unwrap(), 1, 64).unwrap();
        for i in 1..op.len() {
            let a = op.weights[i - 1] * op.upper[i - 1];
            let b = op.weights[i] * op.lower[i];
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }

    #[test]
    fn discrete_eigenvalues_converge_on_sphere() {
        // eigenvalues of L are −ℓ(ℓ+1), ℓ ≥ m
        let op = FdOperator::graded(&make_sphere(), 1, 1024).unwrap();
        let zero = vec![0.0; op.len()];
        assert_eq!(op.count_below(&zero, -2.05), op.len() - 1);
        assert_eq!(op.count_below(&zero, -1.95), op.len());
        assert_eq!(op.count_below(&zero, -6.05), op.len() - 2);
    }

    #[test]
    fn lyapunov_gradient_matches_residual() {
        let op = FdOperator::graded(&make_disk().with_robin(1.0, 0.5).unwrap(), 1, 64).unwrap();
        let u: Vec<f64> = op.unknown_abscissae().iter().map(|s| 0.8 * s * (2.0 - s)).collect();
        let lambda = 20.0;
        let r = op.equilibrium_residual(lambda, &u);
        for k in [0, 10, op.len() - 1] {
            let h = 1e-6;
            let mut up = u.clone();
            up[k] += h;
            let mut dn = u.clone();
            dn[k] -= h;
            let g = (op.lyapunov(lambda, &up) - op.lyapunov(lambda, &dn)) / (2.0 * h);
            assert!((g + op.weights[k] * r[k]).abs() < 1e-6 * g.abs().max(1e-3), "{k}: {g} vs {}", -op.weights[k] * r[k]);
        }
    }

    #[test]
    fn inertia_of_diagonal_matrix() {
        assert_eq!(inertia_below(&[1.0, 2.0, 3.0], &[0.0, 0.0], 2.5), 2);
    }
}
