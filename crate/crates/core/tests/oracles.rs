//! Independent reference values for the spectral and shooting layers.

use std::f64::consts::PI;

use glvortex::equilibria::{solve_all, SolveOptions};
use glvortex::evolve::{bump, Controls, Evolver};
use glvortex::{bifurcation_points, make_disk, make_sphere, Shooter};

/// `J_m(x) = (1/π) ∫_0^π cos(mτ − x sin τ) dτ`, trapezoid rule (spectrally
/// accurate for the periodic integrand).
fn bessel_j(m: i32, x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let f = |t: f64| (m as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / PI
}

fn bessel_jp(m: i32, x: f64) -> f64 {
    0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))
}

/// First `count` positive zeros of `f` by scanning and bisection.
fn zeros(f: impl Fn(f64) -> f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = 0.5;
    let mut fx = f(x);
    while out.len() < count {
        let y = x + 0.05;
        let fy = f(y);
        if fx * fy < 0.0 {
            let (mut a, mut b, mut fa) = (x, y, fx);
            for _ in 0..100 {
                let c = 0.5 * (a + b);
                let fc = f(c);
                if fa * fc <= 0.0 {
                    b = c;
                } else {
                    a = c;
                    fa = fc;
                }
            }
            out.push(0.5 * (a + b));
        }
        x = y;
        fx = fy;
    }
    out
}

#[test]
fn bessel_quadrature_matches_tables() {
    // Abramowitz & Stegun, Table 9.5
    assert!((zeros(|x| bessel_j(0, x), 1)[0] - 2.404_825_557_695_773).abs() < 1e-12);
    assert!((zeros(|x| bessel_j(1, x), 1)[0] - 3.831_705_970_207_512).abs() < 1e-12);
    assert!((zeros(|x| bessel_jp(1, x), 1)[0] - 1.841_183_781_340_659).abs() < 1e-12);
}

#[test]
fn sphere_spectrum_is_spherical_harmonic() {
    let s = make_sphere();
    for m in [1u32, 2] {
        let spec = bifurcation_points(&s, m, 6).unwrap();
        for (k, lam) in spec.eigenvalues.iter().enumerate() {
            let l = (k as u32 + m) as f64;
            let want = l * (l + 1.0);
            assert!((lam - want).abs() <= 1e-8 * want, "m={m} k={k}: {lam} vs {want}");
        }
        assert_eq!(spec.oscillations, (0..6).collect::<Vec<_>>());
    }
}

#[test]
fn disk_dirichlet_spectrum_is_bessel_squared() {
    let s = make_disk();
    for m in [1i32, 2] {
        let j = zeros(|x| bessel_j(m, x), 4);
        let spec = bifurcation_points(&s, m as u32, 4).unwrap();
        for (k, lam) in spec.eigenvalues.iter().enumerate() {
            let want = j[k] * j[k];
            assert!((lam - want).abs() <= 1e-6 * want, "m={m} k={k}: {lam} vs {want}");
        }
    }
}

#[test]
fn disk_neumann_spectrum_is_bessel_derivative_squared() {
    let s = make_disk().neumann().unwrap();
    for m in [1i32, 2] {
        let j = zeros(|x| bessel_jp(m, x), 4);
        let spec = bifurcation_points(&s, m as u32, 4).unwrap();
        for (k, lam) in spec.eigenvalues.iter().enumerate() {
            let want = j[k] * j[k];
            assert!((lam - want).abs() <= 1e-6 * want, "m={m} k={k}: {lam} vs {want}");
        }
    }
}

#[test]
fn principal_sphere_root_is_even_and_matches_relaxation() {
    let s = make_sphere();
    let sh = Shooter::new(&s, 1, 4.0).unwrap();
    let roots = sh.find_roots().unwrap();
    assert_eq!(roots.len(), 1);
    let (st, _) = sh.state_at(roots[0].d, PI / 2.0, 1e-12).unwrap();
    assert!(st.uprime.abs() < 1e-8, "u'(pi/2) = {}", st.uprime);

    let set = solve_all(&s, 1, 4.0, &SolveOptions::default()).unwrap();
    let ev = Evolver::for_set(&s, &set).unwrap();
    let trace = ev.integrate(&bump(&s, 1, &set.trivial.mesh).unwrap(), 1e4, &Controls::default()).unwrap();
    let hit = ev.omega_limit(&trace, &set.all()).unwrap();
    assert_eq!(hit.label, "0+");
    // relaxed discrete profile against the shooting profile
    let shot = &set.nontrivial[0].profile;
    assert!(ev.distance(trace.final_profile(), shot) < 1e-4);
}
