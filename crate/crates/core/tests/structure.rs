//! Property tests for equilibria, connection graphs, spiral waves and the
//! evolution.

use proptest::prelude::*;

use glvortex::attractor::Justification;
use glvortex::evolve::{bump, Controls, Evolver, Symmetry};
use glvortex::spiral::{straight_path, NewtonOptions, SpiralProblem};
use glvortex::sturm::DEFAULT_GAP;
use glvortex::{
    bifurcation_points, connection_graph, is_chafee_infante, make_disk, make_sphere, solve_all, sweep, EigenProblem, SolveOptions,
    Surface,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn opts(nodes: usize) -> SolveOptions {
    SolveOptions { mesh_nodes: nodes, ..Default::default() }
}

fn away_from_points(surface: &Surface, lambda: f64, margin: f64) -> bool {
    bifurcation_points(surface, 1, 5).unwrap().eigenvalues.iter().all(|l| (l - lambda).abs() > margin)
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn equilibrium_invariants(t in 0.0f64..1.0, sphere in any::<bool>()) {
        let (s, lambda) = if sphere { (make_sphere(), 1.0 + 19.0 * t) } else { (make_disk(), 5.0 + 60.0 * t) };
        prop_assume!(away_from_points(&s, lambda, 0.1));
        let set = solve_all(&s, 1, lambda, &opts(1024)).unwrap();
        prop_assert_eq!(set.trivial.morse_index, set.k.map_or(0, |k| k + 1));
        for e in &set.nontrivial {
            let b = e.branch.unwrap();
            prop_assert_eq!(e.zero_number, b.k);
            prop_assert_eq!(e.morse_index, b.k);
            prop_assert!(e.sup_norm <= 1.0 + 1e-8);
            prop_assert!(e.discrete_residual < 1e-6);
            prop_assert!(e.hyperbolicity_margin > 0.0 && e.spectral_gap > DEFAULT_GAP);
            if b.k == 0 {
                prop_assert!(e.profile[1..e.profile.len() - 1].iter().all(|v| v.signum() == f64::from(b.sign)));
            }
            if sphere {
                let n = e.profile.len();
                let sign = if b.k % 2 == 0 { 1.0 } else { -1.0 };
                let defect = (0..n).map(|i| (e.profile[i] - sign * e.profile[n - 1 - i]).abs()).fold(0.0, f64::max);
                prop_assert!(defect < 1e-7, "reflection defect {}", defect);
            }
        }
        let g = connection_graph(&set).unwrap();
        prop_assert!(g.is_sign_symmetric());
        if let Some(k) = set.k {
            prop_assert!(is_chafee_infante(&g, k));
        }
        for e in &g.edges {
            let (a, b) = (g.node(&e.src).unwrap(), g.node(&e.dst).unwrap());
            prop_assert!(a.index > b.index);
            if e.justification == Justification::Cascaded {
                let via = g.edges.iter().any(|f| {
                    f.src == e.src
                        && f.justification == Justification::PermittedByLiberalism
                        && g.edges.iter().any(|h| h.src == f.dst && h.dst == e.dst)
                });
                prop_assert!(via, "cascaded edge {}->{} does not decompose", e.src, e.dst);
            }
        }
    }
}

fn principal_problem(lambda: f64) -> (Surface, SpiralProblem, glvortex::EquilibriumSet) {
    let s = make_sphere();
    let set = solve_all(&s, 1, lambda, &opts(512)).unwrap();
    let p = SpiralProblem::new(&s, &set.nontrivial[0]).unwrap();
    (s, p, set)
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn gauge_covariance(theta in -0.5f64..0.5) {
        let (s, p, set) = principal_problem(4.0);
        let waves = sweep(&s, &set.nontrivial[0], &straight_path((0.05, 0.02), 5), &NewtonOptions::default()).unwrap();
        let w = waves.last().unwrap();
        let (ur, ui, om) = p.unknowns(w);
        let (c, sn) = (theta.cos(), theta.sin());
        let rr: Vec<f64> = ur.iter().zip(&ui).map(|(a, b)| c * a - sn * b).collect();
        let ri: Vec<f64> = ur.iter().zip(&ui).map(|(a, b)| sn * a + c * b).collect();
        // the rotated profile solves the equation but violates the phase condition
        let (r, i, phase) = p.residual(&rr, &ri, om, 0.05, 0.02);
        prop_assert!(p.op.norm2(&r, &i) < 1e-9);
        prop_assert!(theta.abs() < 1e-3 || phase.abs() > 1e-6);
        let back = p.newton((&rr, &ri, om), 0.05, 0.02, &NewtonOptions::default()).unwrap();
        prop_assert!((back.omega - w.omega).abs() < 1e-9);
        let diff = back.u_re.iter().zip(&w.u_re).chain(back.u_im.iter().zip(&w.u_im)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-8, "representative differs by {}", diff);
    }

    #[test]
    fn diagonal_identity(eta in -0.1f64..0.1, lambda in prop::sample::select(vec![4.0, 8.0])) {
        let (s, _, set) = principal_problem(lambda);
        for src in &set.nontrivial {
            let waves = sweep(&s, src, &straight_path((eta, eta), 4), &NewtonOptions::default()).unwrap();
            for w in &waves {
                prop_assert!((w.omega - w.eta).abs() < 1e-8);
                prop_assert!(w.imag_sup() < 1e-8);
                let dev = w.u_re.iter().zip(&src.discrete).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                prop_assert!(dev < 1e-8);
            }
        }
    }

    #[test]
    fn evolution_is_dissipative_pinned_and_ordered(amp in 0.05f64..0.9, lambda in 0.5f64..10.0, sphere in any::<bool>()) {
        let s = if sphere { make_sphere() } else { make_disk() };
        let mesh = glvortex::fd::graded_mesh(&s, 512).unwrap();
        let ev = Evolver::new(&s, 1, lambda, mesh.clone()).unwrap();
        let base = bump(&s, 1, &mesh).unwrap();
        let lo: Vec<f64> = base.iter().map(|v| amp * v).collect();
        let hi: Vec<f64> = base.iter().map(|v| (amp + 0.1) * v).collect();
        let c = Controls { stop_when_stationary: false, cadence: 0.25, symmetry: Symmetry::Off, ..Default::default() };
        let (a, b) = (ev.integrate(&lo, 3.0, &c).unwrap(), ev.integrate(&hi, 3.0, &c).unwrap());
        prop_assert!(a.lyapunov_monotone(1e-8) && b.lyapunov_monotone(1e-8));
        prop_assert_eq!(a.times.clone(), b.times.clone());
        for (pa, pb) in a.profiles.iter().zip(&b.profiles) {
            let worst = pa.iter().zip(pb).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
            // both trajectories carry independent local errors of size local_tol
            prop_assert!(worst <= c.local_tol, "order violated by {}", worst);
        }
        // pinning against the shooting scan bound
        let d_max = glvortex::Shooter::new(&s, 1, lambda).unwrap().scan_bound().unwrap();
        prop_assert!(b.pinning_ratio <= 1.1 * d_max, "ratio {} bound {}", b.pinning_ratio, d_max);
    }
}

#[test]
fn spiral_real_block_is_the_linearization() {
    let (s, p, set) = principal_problem(8.0);
    for (idx, src) in set.nontrivial.iter().enumerate().step_by(2) {
        let p = if idx == 0 { p.clone() } else { SpiralProblem::new(&s, src).unwrap() };
        let n = p.op.len();
        let zeros = vec![0.0; n];
        let j = p.jacobian(&p.template, &zeros, 0.0, 0.0, 0.0);
        let extra: Vec<f64> = p.template.iter().map(|u| 8.0 * (1.0 - 3.0 * u * u)).collect();
        for k in 0..n {
            assert!((j.get(4 * k, 4 * k) - (p.op.diag[k] + extra[k])).abs() < 1e-12);
            if k + 1 < n {
                assert_eq!(j.get(4 * k, 4 * k + 4), p.op.upper[k]);
                assert_eq!(j.get(4 * k + 4, 4 * k), p.op.lower[k + 1]);
            }
            assert_eq!(j.get(4 * k, 4 * k + 1), 0.0);
        }
        // positive spectrum of the block against the continuous linearization
        let unstable = n - p.op.count_below(&extra, 0.0);
        assert_eq!(unstable, src.morse_index);
        let mu = EigenProblem::new(&s, 1, src.linearization()).unwrap().eigenvalues(1).unwrap()[0];
        let (mut lo, mut hi) = (mu - 1.0, mu + 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if p.op.count_below(&extra, mid) == n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((lo - mu).abs() < 1e-3 * (1.0 + mu.abs()), "discrete {lo} vs continuous {mu}");
    }
}

#[test]
fn omega_continuity_along_sweep() {
    let (s, _, set) = principal_problem(4.0);
    let report = glvortex::spiral::sweep_report(&s, &set.nontrivial[0], &straight_path((0.05, 0.02), 20), &NewtonOptions::default()).unwrap();
    assert!(report.stalled_at.is_none());
    assert_eq!(report.waves[0].omega, 0.0);
    assert!(report.omega_lipschitz.is_finite() && report.omega_lipschitz < 10.0);
}
