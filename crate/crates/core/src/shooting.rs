//! Regularized shooting for m-armed vortex equilibria.
//!
//! Radial equilibria `u(s)` solve
//! `(1/a)(a u')' − (m²/a²) u + λ (1 − u²) u = 0`. In the regularized amplitude
//! `w = u / E(s)` and `p = a w'` the system reads
//!
//! ```text
//! dw/ds = p / a
//! dp/ds = [−λ a² (1 − u²) w − 2 m p] / a
//! ```
//!
//! which is regular at the vortex: every bounded solution starts from
//! `(w, p) = (d, 0)` for a shooting parameter `d`. Roots of the far-end
//! functional in `d` are in one-to-one correspondence with equilibria.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{regularizer, Regularizer, Surface};
use crate::ode::{integrate, Control, Tolerance};
use crate::roots::brent;

/// Launch cutoff `s0 = min(1e-4 s*, sqrt(1e-10 / λ))`.
pub fn cutoff(surface: &Surface, lambda: f64) -> f64 {
    (1e-4 * surface.s_star).min((1e-10 / lambda.max(1e-300)).sqrt())
}

/// Launch data `(w, p)` at `s0` for shooting parameter `d`, including the
/// second-order term of the vortex expansion.
pub(crate) fn launch_data(m: u32, lambda: f64, d: f64, s0: f64) -> [f64; 2] {
    let c = -lambda / (4.0 * (m as f64 + 1.0));
    [d * (1.0 + c * s0 * s0), 2.0 * c * d * s0 * s0]
}

#[inline]
pub(crate) fn rhs(a: f64, e: f64, m: f64, lambda: f64, w: f64, p: f64) -> (f64, f64) {
    let u = w * e;
    (p / a, (-lambda * a * a * (1.0 - u * u) * w - 2.0 * m * p) / a)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootState {
    pub s: f64,
    pub w: f64,
    pub p: f64,
    pub u: f64,
    pub uprime: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: f64,
    pub state: ShootState,
    pub rho: f64,
    pub mu: f64,
}

/// Section of the shooting manifold at `section_s`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ShootingCurve {
    pub section_s: f64,
    pub points: Vec<CurvePoint>,
    /// Grid values whose trajectories escaped before the section.
    pub escaped: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub escape_bound: f64,
    /// Uniform scan points on `(0, D_max]`.
    pub uniform: usize,
    /// Geometric points from `1e-6 D_max` to `D_max / uniform`.
    pub geometric: usize,
    pub d_max_start: f64,
    pub d_max_cap: f64,
    pub scan_rtol: f64,
    pub refine_rtol: f64,
    pub refinement: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            escape_bound: 1.5,
            uniform: 256,
            geometric: 20,
            d_max_start: 2.0,
            d_max_cap: 64.0,
            scan_rtol: 1e-10,
            refine_rtol: 1e-12,
            refinement: 4,
        }
    }
}

/// A refined root of the shooting functional, `d > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub d: f64,
    /// Parity about `s*/2` on closed surfaces.
    pub parity: Option<Parity>,
    /// Position in decreasing-`d` order.
    pub branch: usize,
    /// Functional value at the refined root.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub checked: usize,
    /// Minimal `μ(d) − μ(d̃)` over consecutive samples.
    pub min_angle_drop: f64,
    /// Minimal `ρ(d̃) − ρ(d)` over consecutive samples.
    pub min_radius_gain: f64,
    /// Samples beyond `d_upper`, not covered by the lemma.
    pub excluded: Vec<f64>,
}

/// Shooting at fixed `(surface, m, λ)`.
#[derive(Clone, Debug)]
pub struct Shooter {
    pub surface: Surface,
    pub m: u32,
    pub lambda: f64,
    pub config: ScanConfig,
    reg: Regularizer,
    s0: f64,
}

/// Where a trajectory ended: at the target, or escaping at `s` with
/// amplitude `u`.
enum End {
    Reached([f64; 4]),
    Escaped { s: f64, u: f64 },
}

/// Functional value standing in for an escaped trajectory, signed by the
/// direction of escape.
const ESCAPE_VALUE: f64 = 1e6;

impl Shooter {
    pub fn new(surface: &Surface, m: u32, lambda: f64) -> Result<Self> {
        Self::with_config(surface, m, lambda, ScanConfig::default())
    }

    pub fn with_config(surface: &Surface, m: u32, lambda: f64, config: ScanConfig) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        surface.validate()?;
        Ok(Self { surface: surface.clone(), m, lambda, config, reg: regularizer(surface, m)?, s0: cutoff(surface, lambda) })
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn cutoff(&self) -> f64 {
        self.s0
    }

    /// Same problem launched from a different cutoff.
    pub fn with_cutoff(mut self, s0: f64) -> Self {
        self.s0 = s0;
        self
    }

    /// Bound `λ a(s0)² |d|` on the launch truncation.
    pub fn truncation_bound(&self, d: f64) -> f64 {
        self.lambda * self.surface.a(self.s0).powi(2) * d.abs()
    }

    /// Section where the shooting functional is evaluated.
    pub fn section(&self) -> f64 {
        if self.surface.boundary_empty {
            self.surface.midpoint()
        } else {
            self.surface.s_star
        }
    }

    fn state(&self, s: f64, w: f64, p: f64) -> ShootState {
        let e = self.reg.e(s);
        ShootState { s, w, p, u: w * e, uprime: e * (p + self.m as f64 * w) / self.surface.a(s) }
    }

    fn run<F>(&self, d: f64, target: f64, outputs: &[f64], rtol: f64, each: F) -> Result<[f64; 4]>
    where
        F: FnMut(f64, &[f64; 4], bool),
    {
        match self.run_raw(d, target, outputs, rtol, each)? {
            End::Reached(y) => Ok(y),
            End::Escaped { s, .. } => Err(Error::Escape { s, bound: self.config.escape_bound }),
        }
    }

    /// Integrate state and variational system `(w, p, w_d, p_d)` up to
    /// `target`, calling `each` at accepted steps and outputs.
    fn run_raw<F>(&self, d: f64, target: f64, outputs: &[f64], rtol: f64, mut each: F) -> Result<End>
    where
        F: FnMut(f64, &[f64; 4], bool),
    {
        if !(target > self.s0) || target > self.surface.s_star {
            return Err(Error::InvalidArgument(format!("target {target} outside ({}, s*]", self.s0)));
        }
        if self.surface.boundary_empty && target >= self.surface.s_star {
            return Err(Error::InvalidArgument("closed surfaces are shot up to s* only from both ends".into()));
        }
        let m = self.m as f64;
        let lambda = self.lambda;
        let sf = &self.surface;
        let reg = &self.reg;
        let f = |s: f64, y: &[f64; 4]| -> [f64; 4] {
            let a = sf.a(s);
            let e = reg.e(s);
            let (dw, dp) = rhs(a, e, m, lambda, y[0], y[1]);
            let u = y[0] * e;
            let dwd = y[3] / a;
            let dpd = (-lambda * a * a * (1.0 - 3.0 * u * u) * y[2] - 2.0 * m * y[3]) / a;
            [dw, dp, dwd, dpd]
        };
        let [w0, p0] = launch_data(self.m, lambda, d, self.s0);
        let [wd0, pd0] = launch_data(self.m, lambda, 1.0, self.s0);
        let bound = self.config.escape_bound;
        let mut stop = None;
        let out = integrate(f, self.s0, [w0, p0, wd0, pd0], target, outputs, Tolerance::new(rtol, rtol * 1e-3), |s, y, is_out| {
            let u = y[0] * reg.e(s);
            if u.abs() > bound {
                stop = Some(End::Escaped { s, u });
                return Control::Stop;
            }
            each(s, y, is_out);
            Control::Continue
        })?;
        Ok(stop.unwrap_or(End::Reached(out.y)))
    }

    /// Trajectory of accepted steps from the cutoff to `target`.
    pub fn launch(&self, d: f64, target: f64) -> Result<Vec<ShootState>> {
        let [w0, p0] = launch_data(self.m, self.lambda, d, self.s0);
        let mut traj = vec![self.state(self.s0, w0, p0)];
        self.run(d, target, &[], self.config.scan_rtol, |s, y, _| traj.push(self.state(s, y[0], y[1])))?;
        Ok(traj)
    }

    /// State at `s` together with the tangent `(w_d, p_d)`.
    pub fn state_at(&self, d: f64, s: f64, rtol: f64) -> Result<(ShootState, [f64; 2])> {
        let y = self.run(d, s, &[], rtol, |_, _, _| {})?;
        Ok((self.state(s, y[0], y[1]), [y[2], y[3]]))
    }

    /// Points of the shooting curve at `section_s` over a grid of `d`.
    pub fn curve(&self, d_grid: &[f64], section_s: f64) -> Result<ShootingCurve> {
        let results: Vec<Result<ShootState>> =
            d_grid.par_iter().map(|&d| self.state_at(d, section_s, self.config.scan_rtol).map(|r| r.0)).collect();
        let mut curve = ShootingCurve { section_s, ..Default::default() };
        let mut prev_mu: Option<f64> = None;
        for (&d, r) in d_grid.iter().zip(results) {
            match r {
                Ok(state) => {
                    let rho = state.w.hypot(state.p);
                    let mut mu = (-state.p).atan2(state.w);
                    if let Some(pm) = prev_mu {
                        mu += 2.0 * PI * ((pm - mu) / (2.0 * PI)).round();
                    }
                    prev_mu = Some(mu);
                    curve.points.push(CurvePoint { d, state, rho, mu });
                }
                Err(Error::Escape { .. }) => curve.escaped.push(d),
                Err(e) => return Err(e),
            }
        }
        Ok(curve)
    }

    /// Scaled functionals whose zeros are equilibria: the Robin functional at
    /// `s*`, or `(p + m w, w)` at `s*/2` on closed surfaces.
    fn functionals(&self, w: f64, p: f64) -> [f64; 2] {
        match self.surface.robin {
            Some(_) => [boundary_functional(&self.surface, self.m, w, p), f64::NAN],
            None => [p + self.m as f64 * w, w],
        }
    }

    fn scan_grid(&self, d_max: f64, refine: usize) -> Vec<f64> {
        let n = self.config.uniform * refine;
        let g = self.config.geometric * refine;
        let lo = 1e-6 * d_max;
        let hi = d_max / n as f64;
        let mut grid: Vec<f64> = (0..g).map(|i| lo * (hi / lo).powf(i as f64 / g as f64)).collect();
        grid.extend((1..=n).map(|i| d_max * i as f64 / n as f64));
        grid
    }

    /// Functionals at the section, or `±ESCAPE_VALUE` in both slots when
    /// the trajectory escapes upward or downward. By continuity in `d` a
    /// sign change against an escaped neighbour still brackets a root: the
    /// threshold trajectory reaches the section with `|u| = bound` and `u'`
    /// of the same sign.
    fn signed_functionals(&self, d: f64, rtol: f64) -> Result<([f64; 2], bool)> {
        Ok(match self.run_raw(d, self.section(), &[], rtol, |_, _, _| {})? {
            End::Reached(y) => (self.functionals(y[0], y[1]), false),
            End::Escaped { u, .. } => ([u.signum() * ESCAPE_VALUE; 2], true),
        })
    }

    fn evaluate(&self, grid: &[f64]) -> Result<Vec<([f64; 2], bool)>> {
        grid.par_iter().map(|&d| self.signed_functionals(d, self.config.scan_rtol)).collect()
    }

    fn brackets(grid: &[f64], vals: &[([f64; 2], bool)], which: usize) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        for i in 1..grid.len() {
            let (fa, fb) = (vals[i - 1].0[which], vals[i].0[which]);
            if fa.is_nan() || fb.is_nan() {
                continue;
            }
            if fa == 0.0 || fa.signum() != fb.signum() {
                out.push((grid[i - 1], grid[i], fa, fb));
            }
        }
        out
    }

    /// Smallest `D_max` in the doubling sequence whose top decade escapes.
    pub fn scan_bound(&self) -> Result<f64> {
        let mut d_max = self.config.d_max_start;
        loop {
            let top: Vec<f64> = (0..16).map(|i| d_max * (0.1 + 0.9 * i as f64 / 15.0)).collect();
            if self.evaluate(&top)?.iter().all(|v| v.1) {
                return Ok(d_max);
            }
            if d_max >= self.config.d_max_cap {
                return Ok(d_max);
            }
            d_max *= 2.0;
        }
    }

    /// All positive roots, sorted by decreasing `d`.
    pub fn find_roots(&self) -> Result<Vec<Root>> {
        let d_max = self.scan_bound()?;
        let which: &[usize] = if self.surface.boundary_empty { &[0, 1] } else { &[0] };
        let coarse_grid = self.scan_grid(d_max, 1);
        let fine_grid = self.scan_grid(d_max, self.config.refinement);
        let coarse = self.evaluate(&coarse_grid)?;
        let fine = self.evaluate(&fine_grid)?;
        let mut all = Vec::new();
        for &k in which {
            let c = Self::brackets(&coarse_grid, &coarse, k);
            let f = Self::brackets(&fine_grid, &fine, k);
            if c.len() != f.len() {
                return Err(Error::ScanInconclusive { coarse: c.len(), fine: f.len() });
            }
            for (a, b, fa, fb) in f {
                let d = self.refine(a, b, fa, fb, k)?;
                let parity = if self.surface.boundary_empty { Some(if k == 0 { Parity::Even } else { Parity::Odd }) } else { None };
                let (st, _) = self.state_at(d, self.section(), self.config.refine_rtol)?;
                all.push(Root { d, parity, branch: 0, residual: self.functionals(st.w, st.p)[k] });
            }
        }
        all.sort_by(|a, b| b.d.total_cmp(&a.d));
        all.dedup_by(|a, b| (a.d - b.d).abs() < 1e-9 * b.d.max(1.0));
        for (j, r) in all.iter_mut().enumerate() {
            r.branch = j;
        }
        Ok(all)
    }

    fn refine(&self, a: f64, b: f64, fa: f64, fb: f64, which: usize) -> Result<f64> {
        let rtol = self.config.refine_rtol;
        let f = |d: f64| -> Result<f64> { Ok(self.signed_functionals(d, rtol)?.0[which]) };
        // endpoint values recomputed at the refinement tolerance
        let (fa2, fb2) = (f(a)?, f(b)?);
        let (fa, fb) = if fa2.signum() != fb2.signum() || fa2 == 0.0 { (fa2, fb2) } else { (fa, fb) };
        brent(f, a, b, fa, fb, 1e-13 * b.max(1.0), 1e-13, 200)
    }

    /// Normalized derivative of the shooting functional along the curve at
    /// `d`; for `d = 0` on closed surfaces the smaller of both parities.
    pub fn transversality_margin(&self, d: f64, parity: Option<Parity>) -> Result<f64> {
        let (_, [wd, pd]) = self.state_at(d, self.section(), self.config.refine_rtol)?;
        let norm = wd.hypot(pd);
        let m = self.m as f64;
        let margin = match self.surface.robin {
            Some((a1, a2)) => {
                let c = a1 * self.surface.a(self.surface.s_star) + a2 * m;
                (c * wd + a2 * pd).abs() / (c.hypot(a2) * norm)
            }
            None => {
                let even = (pd + m * wd).abs() / ((1.0 + m * m).sqrt() * norm);
                let odd = wd.abs() / norm;
                match parity {
                    Some(Parity::Even) => even,
                    Some(Parity::Odd) => odd,
                    None => even.min(odd),
                }
            }
        };
        if margin < 1e-8 {
            return Err(Error::TangencySuspected { margin });
        }
        Ok(margin)
    }

    /// Physical profile `(u, u')` at the sorted abscissae `mesh` for a root.
    ///
    /// On closed surfaces the right half is shot from `s*` with `±d`
    /// according to `parity`.
    pub fn profile(&self, d: f64, parity: Option<Parity>, mesh: &[f64]) -> Result<Vec<(f64, f64)>> {
        let sf = &self.surface;
        let split = self.section();
        let half = |dd: f64, pts: &[f64], inclusive: bool| -> Result<Vec<(f64, f64)>> {
            let inner: Vec<f64> = pts.iter().copied().filter(|&s| s > self.s0 && (s < split || (inclusive && s <= split))).collect();
            let mut vals = Vec::with_capacity(inner.len());
            let end = self.run(dd, split, &inner, self.config.refine_rtol, |s, y, is_out| {
                if is_out {
                    let st = self.state(s, y[0], y[1]);
                    vals.push((st.u, st.uprime));
                }
            })?;
            let end_state = self.state(split, end[0], end[1]);
            let mut it = vals.into_iter();
            let mut out = Vec::with_capacity(pts.len());
            for &s in pts {
                if s <= self.s0 {
                    let [w, p] = launch_data(self.m, self.lambda, dd, s);
                    let st = self.state(s, w, p);
                    out.push((st.u, st.uprime));
                } else if s < split {
                    out.push(it.next().expect("sample per mesh point"));
                } else {
                    out.push((end_state.u, end_state.uprime));
                }
            }
            Ok(out)
        };
        if !sf.boundary_empty {
            return half(d, mesh, true);
        }
        let k = mesh.partition_point(|&s| s < split);
        let mut left = half(d, &mesh[..k], false)?;
        let mirrored: Vec<f64> = mesh[k..].iter().rev().map(|&s| sf.s_star - s).collect();
        let d_right = match parity {
            Some(Parity::Odd) => -d,
            _ => d,
        };
        let right = half(d_right, &mirrored, true)?;
        left.extend(right.into_iter().rev().map(|(u, up)| (u, -up)));
        Ok(left)
    }
}

/// Robin functional `(α1 a(s*) + α2 m) w + α2 p` at the boundary.
pub fn boundary_functional(surface: &Surface, m: u32, w: f64, p: f64) -> f64 {
    let (a1, a2) = surface.robin.expect("surface with boundary");
    (a1 * surface.a(surface.s_star) + a2 * m as f64) * w + a2 * p
}

/// `(u'(s*/2), u(s*/2))`: zeros mark even and odd profiles respectively.
pub fn midpoint_functionals(state: &ShootState) -> (f64, f64) {
    (state.uprime, state.u)
}

/// Checks monotonicity of the curve below `d_upper`: the polar
/// angle strictly decreases and the radius strictly increases with `d`.
pub fn monotonicity_report(curve: &ShootingCurve, d_upper: f64) -> Result<MonotonicityReport> {
    let (inside, outside): (Vec<&CurvePoint>, Vec<&CurvePoint>) = curve.points.iter().partition(|p| p.d > 0.0 && p.d < d_upper);
    let mut report = MonotonicityReport {
        checked: inside.len(),
        min_angle_drop: f64::INFINITY,
        min_radius_gain: f64::INFINITY,
        excluded: outside.iter().map(|p| p.d).collect(),
    };
    for pair in inside.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let drop = a.mu - b.mu;
        let gain = b.rho - a.rho;
        if !(drop > 0.0) {
            return Err(Error::MonotonicityViolation { d1: a.d, d2: b.d, what: format!("angle not decreasing ({} -> {})", a.mu, b.mu) });
        }
        if !(gain > 0.0) {
            return Err(Error::MonotonicityViolation { d1: a.d, d2: b.d, what: format!("radius not increasing ({} -> {})", a.rho, b.rho) });
        }
        report.min_angle_drop = report.min_angle_drop.min(drop);
        report.min_radius_gain = report.min_radius_gain.min(gain);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_sphere};

    #[test]
    fn zero_data_stays_zero() {
        let sh = Shooter::new(&make_sphere(), 1, 4.0).unwrap();
        for st in sh.launch(0.0, 1.5).unwrap() {
            assert_eq!((st.w, st.p, st.u, st.uprime), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn odd_symmetry() {
        let sh = Shooter::new(&make_sphere(), 1, 4.0).unwrap();
        let (a, _) = sh.state_at(0.7, 1.2, 1e-10).unwrap();
        let (b, _) = sh.state_at(-0.7, 1.2, 1e-10).unwrap();
        assert_eq!((a.w, a.p, a.u, a.uprime), (-b.w, -b.p, -b.u, -b.uprime));
    }

    #[test]
    fn sphere_root_counts() {
        for (lambda, want) in [(1.0, 0), (4.0, 1), (8.0, 2)] {
            let roots = Shooter::new(&make_sphere(), 1, lambda).unwrap().find_roots().unwrap();
            assert_eq!(roots.len(), want, "lambda = {lambda}: {roots:?}");
        }
    }

    #[test]
    fn sphere_principal_root_is_even() {
        let sh = Shooter::new(&make_sphere(), 1, 4.0).unwrap();
        let roots = sh.find_roots().unwrap();
        assert_eq!(roots[0].parity, Some(Parity::Even));
        let (st, _) = sh.state_at(roots[0].d, PI / 2.0, 1e-12).unwrap();
        let (even, odd) = midpoint_functionals(&st);
        assert!(even.abs() < 1e-8);
        assert!(odd.abs() > 0.1);
    }

    #[test]
    fn sphere_secondary_root_is_odd() {
        let roots = Shooter::new(&make_sphere(), 1, 8.0).unwrap().find_roots().unwrap();
        assert_eq!(roots[1].parity, Some(Parity::Odd));
    }

    #[test]
    fn disk_dirichlet_one_root_at_30() {
        let sh = Shooter::new(&make_disk(), 1, 30.0).unwrap();
        let roots = sh.find_roots().unwrap();
        assert_eq!(roots.len(), 1);
        assert!(sh.transversality_margin(roots[0].d, None).unwrap() > 0.0);
    }

    #[test]
    fn boundary_functional_cases() {
        let dirichlet = make_disk();
        assert_eq!(boundary_functional(&dirichlet, 1, 0.3, 5.0), 0.3);
        let neumann = make_disk().neumann().unwrap();
        assert_eq!(boundary_functional(&neumann, 2, 0.3, 5.0), 2.0 * 0.3 + 5.0);
        assert_eq!(boundary_functional(&neumann, 2, 0.0, 0.0), 0.0);
    }

    #[test]
    fn tangency_at_first_bifurcation_point() {
        let sh = Shooter::new(&make_sphere(), 1, 2.0).unwrap();
        assert!(matches!(sh.transversality_margin(0.0, None), Err(Error::TangencySuspected { .. })));
    }

    #[test]
    fn escape_is_reported() {
        let sh = Shooter::new(&make_sphere(), 1, 4.0).unwrap();
        assert!(matches!(sh.state_at(50.0, 1.5, 1e-10), Err(Error::Escape { .. })));
        let curve = sh.curve(&[40.0, 50.0], 1.5).unwrap();
        assert!(curve.points.is_empty());
        assert_eq!(curve.escaped.len(), 2);
    }
}
