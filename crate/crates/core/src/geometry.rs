//! Surfaces of revolution and the vortex regularizer.
//!
//! A surface is generated by rotating the profile `a(s)`, `s ∈ [0, s*]`, about
//! the symmetry axis, with `s` the arc length along a meridian. The vortex at
//! `s = 0` (and at `s = s*` for closed surfaces) is where the amplitude of an
//! m-armed solution is pinned to zero.
//!
//! The regularizer `E(s)` solves `d(log E)/ds = m / a(s)` and is normalized by
//! `E(s) / s^m → 1` as `s → 0`. Dividing by it removes the `m²/a²` singularity
//! from the radial equation.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{integrate_adaptive, integrate_gl, CubicSpline, EndCondition};

/// Fixed validation thresholds; see [`Surface::validate_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    /// Endpoint derivative tolerance: `|a'(0) - 1|`, `|a'(s*) + 1|`.
    pub endpoint_derivative: f64,
    /// Floor below which `a` counts as non-positive in the interior, and the
    /// tolerance for `a(0) = 0` and `a(s*) = 0`.
    pub positivity_floor: f64,
    /// Reflection symmetry tolerance for closed surfaces.
    pub symmetry: f64,
    /// Number of validation grid points.
    pub grid: usize,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self { endpoint_derivative: 1e-10, positivity_floor: 1e-12, symmetry: 1e-10, grid: 10_001 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Disk,
    Sphere,
    Custom,
}

#[derive(Clone, Debug)]
enum Profile {
    Disk,
    Sphere,
    Tabulated(Arc<Tabulated>),
}

#[derive(Debug)]
struct Tabulated {
    spline: CubicSpline,
    /// knots up to the end of the directly integrated range
    knots: Vec<f64>,
    /// `∫_0^{knot} (1/a(σ) - 1/σ) dσ` at each knot in `knots`
    cumulative: Vec<f64>,
}

impl Tabulated {
    fn integrand(&self, t: f64) -> f64 {
        let a = self.spline.eval(t);
        (t - a) / (a * t)
    }

    /// `∫_0^s (1/a - 1/σ) dσ` for `s` inside the tabulated range.
    fn log_correction(&self, s: f64) -> f64 {
        let k = self.knots.partition_point(|&x| x <= s).saturating_sub(1);
        let base = self.cumulative[k];
        let x0 = self.knots[k];
        if s > x0 {
            base + integrate_gl(|t| self.integrand(t), x0, s)
        } else {
            base
        }
    }
}

/// A compact surface of revolution.
#[derive(Clone, Debug)]
pub struct Surface {
    pub kind: SurfaceKind,
    pub s_star: f64,
    pub boundary_empty: bool,
    /// `(α1, α2)` in `α1 u + α2 ∂_n u = 0`; present iff the boundary is nonempty.
    pub robin: Option<(f64, f64)>,
    profile: Profile,
}

/// The unit disk with Dirichlet boundary condition.
pub fn make_disk() -> Surface {
    Surface { kind: SurfaceKind::Disk, s_star: 1.0, boundary_empty: false, robin: Some((1.0, 0.0)), profile: Profile::Disk }
}

/// The unit 2-sphere.
pub fn make_sphere() -> Surface {
    Surface { kind: SurfaceKind::Sphere, s_star: PI, boundary_empty: true, robin: None, profile: Profile::Sphere }
}

/// A tabulated profile through `(s, a)` samples.
///
/// The interpolant is a cubic spline clamped to `a'(0) = 1`, and to
/// `a'(s*) = -1` on closed surfaces (natural at `s*` otherwise).
pub fn make_custom(samples: &[(f64, f64)], boundary_empty: bool, robin: Option<(f64, f64)>) -> Result<Surface> {
    make_custom_with(samples, boundary_empty, robin, &ValidationTolerances::default())
}

pub fn make_custom_with(
    samples: &[(f64, f64)],
    boundary_empty: bool,
    robin: Option<(f64, f64)>,
    tol: &ValidationTolerances,
) -> Result<Surface> {
    if samples.len() < 4 {
        return Err(Error::InvalidProfile("need at least four samples".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    if x[0] != 0.0 {
        return Err(Error::InvalidProfile("first sample must be at s = 0".into()));
    }
    if y[0].abs() > tol.positivity_floor {
        return Err(Error::PositivityViolated { s: 0.0, a: y[0] });
    }
    let s_star = *x.last().unwrap();
    if boundary_empty && y.last().unwrap().abs() > tol.positivity_floor {
        return Err(Error::InvalidProfile(format!("closed surface needs a(s*) = 0, got {}", y.last().unwrap())));
    }
    let interior = &samples[1..samples.len() - 1];
    if let Some(&(s, a)) = interior.iter().find(|(_, a)| *a <= tol.positivity_floor) {
        return Err(Error::PositivityViolated { s, a });
    }
    if !boundary_empty {
        let (a1, a2) = robin.ok_or_else(|| Error::InvalidProfile("surface with boundary needs Robin coefficients".into()))?;
        check_robin(a1, a2)?;
    }
    let right = if boundary_empty { EndCondition::Clamped(-1.0) } else { EndCondition::Natural };
    let spline = CubicSpline::new(x, y, EndCondition::Clamped(1.0), right)
        .ok_or_else(|| Error::InvalidProfile("samples must be strictly increasing in s".into()))?;

    // the log-integral is tabulated up to s*/2 on closed surfaces (the rest follows by reflection)
    let end = if boundary_empty { 0.5 * s_star } else { s_star };
    let mut knots: Vec<f64> = spline.knots().iter().copied().filter(|&k| k < end).collect();
    knots.push(end);
    let mut tab = Tabulated { spline, knots: knots.clone(), cumulative: vec![0.0; knots.len()] };
    let mut acc = 0.0;
    for j in 1..knots.len() {
        let seg = integrate_adaptive(&|t| tab.integrand(t), knots[j - 1], knots[j], 1e-14, 1e-15, 12)
            .ok_or_else(|| Error::Quadrature(format!("on [{}, {}]", knots[j - 1], knots[j])))?;
        acc += seg;
        tab.cumulative[j] = acc;
    }
    if !acc.is_finite() {
        return Err(Error::Quadrature("non-finite regularizer integral".into()));
    }

    let surface = Surface {
        kind: SurfaceKind::Custom,
        s_star,
        boundary_empty,
        robin: if boundary_empty { None } else { robin },
        profile: Profile::Tabulated(Arc::new(tab)),
    };
    surface.validate_with(tol)?;
    Ok(surface)
}

impl Surface {
    /// Replace the boundary condition. Only meaningful for surfaces with boundary.
    pub fn with_robin(mut self, alpha1: f64, alpha2: f64) -> Result<Self> {
        if self.boundary_empty {
            return Err(Error::InvalidArgument("closed surface has no boundary condition".into()));
        }
        check_robin(alpha1, alpha2)?;
        self.robin = Some((alpha1, alpha2));
        Ok(self)
    }

    pub fn dirichlet(self) -> Result<Self> {
        self.with_robin(1.0, 0.0)
    }

    pub fn neumann(self) -> Result<Self> {
        self.with_robin(0.0, 1.0)
    }

    #[inline]
    pub fn a(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::Disk => s,
            Profile::Sphere => s.sin(),
            Profile::Tabulated(t) => t.spline.eval(s),
        }
    }

    #[inline]
    pub fn a_prime(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::Disk => 1.0,
            Profile::Sphere => s.cos(),
            Profile::Tabulated(t) => t.spline.deriv(s),
        }
    }

    /// Midpoint of the meridian; the matching section on closed surfaces.
    pub fn midpoint(&self) -> f64 {
        0.5 * self.s_star
    }

    /// Normalized Robin pair with both coefficients non-negative.
    pub fn robin_normalized(&self) -> Option<(f64, f64)> {
        self.robin.map(|(a1, a2)| if a1 < 0.0 || a2 < 0.0 { (-a1, -a2) } else { (a1, a2) })
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(&ValidationTolerances::default())
    }

    /// Check positivity, endpoint behaviour, reflection symmetry and the Robin
    /// coefficients on a uniform grid.
    pub fn validate_with(&self, tol: &ValidationTolerances) -> Result<()> {
        if !(self.s_star > 0.0) {
            return Err(Error::InvalidProfile("s* must be positive".into()));
        }
        if self.a(0.0).abs() > tol.positivity_floor {
            return Err(Error::PositivityViolated { s: 0.0, a: self.a(0.0) });
        }
        if (self.a_prime(0.0) - 1.0).abs() > tol.endpoint_derivative {
            return Err(Error::InvalidProfile(format!("a'(0) = {} must equal 1", self.a_prime(0.0))));
        }
        let n = tol.grid.max(3);
        for i in 1..n - 1 {
            let s = self.s_star * i as f64 / (n - 1) as f64;
            let a = self.a(s);
            if !(a > tol.positivity_floor) {
                return Err(Error::PositivityViolated { s, a });
            }
        }
        if self.boundary_empty {
            let end = self.a(self.s_star);
            if end.abs() > tol.positivity_floor {
                return Err(Error::InvalidProfile(format!("closed surface needs a(s*) = 0, got {end}")));
            }
            if (self.a_prime(self.s_star) + 1.0).abs() > tol.endpoint_derivative {
                return Err(Error::InvalidProfile(format!("a'(s*) = {} must equal -1", self.a_prime(self.s_star))));
            }
            for i in 0..n {
                let s = self.s_star * i as f64 / (n - 1) as f64;
                let defect = (self.a(s) - self.a(self.s_star - s)).abs();
                if defect > tol.symmetry {
                    return Err(Error::ReflectionAsymmetric { s, defect });
                }
            }
            if self.robin.is_some() {
                return Err(Error::InvalidArgument("closed surface cannot carry Robin coefficients".into()));
            }
        } else {
            let (a1, a2) = self.robin.ok_or_else(|| Error::InvalidProfile("missing Robin coefficients".into()))?;
            check_robin(a1, a2)?;
            if !(self.a(self.s_star) > tol.positivity_floor) {
                return Err(Error::PositivityViolated { s: self.s_star, a: self.a(self.s_star) });
            }
        }
        Ok(())
    }

    /// `∫_0^s (1/a(σ) - 1/σ) dσ`, extended by the reflection identity past
    /// `s*/2` on closed surfaces.
    fn log_correction(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::Disk => 0.0,
            // ln tan(s/2) - ln s + ln 2
            Profile::Sphere => {
                if s < 1e-4 {
                    // series of ln(2 tan(s/2)/s)
                    let s2 = s * s;
                    s2 / 12.0 + s2 * s2 * 7.0 / 1440.0
                } else {
                    (2.0 * (0.5 * s).tan() / s).ln()
                }
            }
            Profile::Tabulated(t) => {
                if self.boundary_empty && s > 0.5 * self.s_star {
                    unreachable!("log_correction is only tabulated on [0, s*/2] for closed surfaces")
                }
                t.log_correction(s)
            }
        }
    }
}

fn check_robin(a1: f64, a2: f64) -> Result<()> {
    if a1 == 0.0 && a2 == 0.0 {
        return Err(Error::RobinDegenerate(a1, a2));
    }
    if a1 * a2 < 0.0 {
        return Err(Error::RobinSign(a1, a2));
    }
    Ok(())
}

/// `E(s) = s^m exp(m ∫_0^s (1/a - 1/σ) dσ)`.
#[derive(Clone, Debug)]
pub struct Regularizer {
    surface: Surface,
    pub m: u32,
}

pub fn regularizer(surface: &Surface, m: u32) -> Result<Regularizer> {
    if m == 0 {
        return Err(Error::InvalidArgument("winding number m must be positive".into()));
    }
    Ok(Regularizer { surface: surface.clone(), m })
}

impl Regularizer {
    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    /// `log E(s)` for `s ∈ (0, s*)` (`(0, s*]` with boundary).
    pub fn ln_e(&self, s: f64) -> f64 {
        let m = self.m as f64;
        let sf = &self.surface;
        match sf.profile {
            Profile::Disk => m * s.ln(),
            Profile::Sphere => m * (2.0 * (0.5 * s).tan()).ln(),
            Profile::Tabulated(_) => {
                if sf.boundary_empty && s > 0.5 * sf.s_star {
                    let half = 0.5 * sf.s_star;
                    2.0 * self.ln_e(half) - self.ln_e(sf.s_star - s)
                } else {
                    m * (s.ln() + sf.log_correction(s))
                }
            }
        }
    }

    #[inline]
    pub fn e(&self, s: f64) -> f64 {
        match self.surface.profile {
            Profile::Disk => s.powi(self.m as i32),
            Profile::Sphere => (2.0 * (0.5 * s).tan()).powi(self.m as i32),
            Profile::Tabulated(_) => self.ln_e(s).exp(),
        }
    }

    /// `E(s) / s^m`, accurate down to `s → 0`.
    pub fn normalized(&self, s: f64) -> f64 {
        match self.surface.profile {
            Profile::Disk => 1.0,
            _ if self.surface.boundary_empty && s > 0.5 * self.surface.s_star => self.e(s) / s.powi(self.m as i32),
            _ => (self.m as f64 * self.surface.log_correction(s)).exp(),
        }
    }
}

/// Surface description as read from run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub kind: SurfaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_empty: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robin: Option<[f64; 2]>,
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<Surface> {
        let surface = match self.kind {
            SurfaceKind::Disk => {
                let d = make_disk();
                match self.robin {
                    Some([a1, a2]) => d.with_robin(a1, a2)?,
                    None => d,
                }
            }
            SurfaceKind::Sphere => {
                if self.robin.is_some() {
                    return Err(Error::InvalidArgument("the sphere has no boundary; drop \"robin\"".into()));
                }
                make_sphere()
            }
            SurfaceKind::Custom => {
                let samples = self.samples.as_ref().ok_or_else(|| Error::InvalidArgument("custom surface needs \"samples\"".into()))?;
                let pairs: Vec<(f64, f64)> = samples.iter().map(|p| (p[0], p[1])).collect();
                let empty = self.boundary_empty.unwrap_or(false);
                make_custom(&pairs, empty, self.robin.map(|r| (r[0], r[1])))?
            }
        };
        if let Some(s_star) = self.s_star {
            if (s_star - surface.s_star).abs() > 1e-12 * surface.s_star {
                return Err(Error::InvalidArgument(format!("s_star = {s_star} inconsistent with profile ({})", surface.s_star)));
            }
        }
        if let Some(empty) = self.boundary_empty {
            if empty != surface.boundary_empty {
                return Err(Error::InvalidArgument("boundary_empty inconsistent with profile".into()));
            }
        }
        Ok(surface)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_profile() {
        let d = make_disk();
        assert_eq!(d.a(0.5), 0.5);
        assert_eq!(d.a_prime(0.0), 1.0);
        assert!(!d.boundary_empty);
        d.validate().unwrap();
        d.with_robin(1.0, 0.0).unwrap().validate().unwrap();
    }

    #[test]
    fn sphere_profile() {
        let s = make_sphere();
        assert_eq!(s.a(PI / 2.0), 1.0);
        for i in 0..50 {
            let t = PI * i as f64 / 49.0;
            assert!((s.a(t) - s.a(PI - t)).abs() < 1e-15);
        }
        assert_eq!(s.a_prime(PI), -1.0);
        s.validate().unwrap();
    }

    #[test]
    fn robin_checks() {
        assert_eq!(make_disk().with_robin(0.0, 0.0).unwrap_err(), Error::RobinDegenerate(0.0, 0.0));
        assert!(matches!(make_disk().with_robin(1.0, -1.0), Err(Error::RobinSign(..))));
        assert!(make_disk().with_robin(-1.0, -2.0).is_ok());
    }

    #[test]
    fn custom_rejects_negative_sample() {
        let samples: Vec<(f64, f64)> = (0..=10).map(|i| {
            let s = i as f64 / 10.0;
            (s, if i == 5 { -0.1 } else { s })
        }).collect();
        assert!(matches!(make_custom(&samples, false, Some((1.0, 0.0))), Err(Error::PositivityViolated { .. })));
    }

    #[test]
    fn custom_rejects_degenerate_robin() {
        let samples: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 / 10.0, i as f64 / 10.0)).collect();
        assert_eq!(make_custom(&samples, false, Some((0.0, 0.0))).unwrap_err(), Error::RobinDegenerate(0.0, 0.0));
    }

    #[test]
    fn custom_rejects_asymmetric_closed_profile() {
        let samples: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let s = PI * i as f64 / 200.0;
                (s, s.sin() * (1.0 + 0.05 * s * (PI - s) * s))
            })
            .collect();
        let r = make_custom(&samples, true, None);
        assert!(matches!(r, Err(Error::ReflectionAsymmetric { .. })), "{r:?}");
    }

    #[test]
    fn regularizer_closed_forms() {
        let r = regularizer(&make_disk(), 2).unwrap();
        assert!((r.e(0.25) - 0.0625).abs() < 1e-16);
        let r = regularizer(&make_sphere(), 1).unwrap();
        // normalized so that E(s)/s -> 1: E(s) = 2 tan(s/2)
        assert!((r.e(PI / 2.0) - 2.0).abs() < 1e-14);
        assert!((r.e(1e-4) / 1e-4 - 1.0).abs() < 1e-7);
        assert!((r.normalized(1e-6) - 1.0).abs() < 1e-12);
        assert!(regularizer(&make_sphere(), 0).is_err());
    }

    #[test]
    fn config_builds_surfaces() {
        let cfg = SurfaceConfig { kind: SurfaceKind::Disk, s_star: None, samples: None, boundary_empty: None, robin: Some([0.0, 1.0]) };
        assert_eq!(cfg.build().unwrap().robin, Some((0.0, 1.0)));
        let cfg = SurfaceConfig { kind: SurfaceKind::Sphere, s_star: Some(1.0), samples: None, boundary_empty: None, robin: None };
        assert!(cfg.build().is_err());
    }
}
