use std::time::Instant;

use semiwave_core::chareq::critical_speed;
use semiwave_core::kernel::LeftTail;
use semiwave_core::profile::{solve_profile, ProfileOptions, ProfileSolution};
use semiwave_core::verify::{
    align, check_all, check_lb, check_m, check_s, check_ub, diagnostics_q, synthetic_ub_violator, uniqueness_harness,
    Hypothesis, VerifyOptions,
};
use semiwave_core::Model;

fn builtins() -> Vec<Model> {
    vec![Model::kpp(1.0).unwrap(), Model::nicholson(1.0, 2.0).unwrap(), Model::may(1.0, 2.0, 2.0, 1.0).unwrap()]
}

#[test]
fn hypothesis_suite_on_builtins() {
    let start = Instant::now();
    let opts = VerifyOptions::default();
    assert_eq!(opts.samples, 10_000);
    for m in builtins() {
        let all = check_all(&m, &opts);
        for (h, r) in &all {
            assert!(r.passed, "{} {h:?}: {}", m.name(), r.detail);
        }
    }
    let bad = check_all(&synthetic_ub_violator(), &opts);
    let ub = &bad[&Hypothesis::UB];
    assert!(!ub.passed);
    let cx = ub.counterexample.as_ref().unwrap();
    assert!(cx.lhs > cx.rhs + 1e-12);
    assert!(cx.phi.iter().zip(cx.psi.as_ref().unwrap()).all(|(a, b)| 0.0 < *a && a <= b));
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn failures_reproduce_from_their_seed() {
    let m = synthetic_ub_violator();
    for seed in [1, 2, 99] {
        assert_eq!(check_ub(&m, 1000, seed), check_ub(&m, 1000, seed));
    }
}

#[test]
fn lb_levels() {
    let kpp = Model::kpp(1.0).unwrap();
    assert!(check_lb(&kpp, 0.1, 10_000, 1).delta_hat.unwrap() >= 0.1);
    let nich = check_lb(&Model::nicholson(1.0, 2.0).unwrap(), 0.1, 10_000, 1);
    assert!(nich.passed && nich.delta_hat.unwrap() > 0.0);
    assert!(check_lb(&kpp, 1.5, 10, 1).counterexample.is_none());
    assert!(!check_lb(&kpp, 1.5, 10, 1).passed);
}

#[test]
fn structure_scans() {
    let kpp = check_m(&Model::kpp(1.0).unwrap());
    assert_eq!(kpp.zeros.unwrap(), vec![0.0, 1.0]);
    assert!(check_m(&Model::may(1.0, 2.0, 2.0, 1.0).unwrap()).passed);
    assert!(check_s(&Model::nicholson(1.0, 2.0).unwrap(), 10_000, 5).passed);
}

#[test]
fn q_diagnostics_along_converged_runs() {
    let opts = ProfileOptions::default();
    let nich = Model::nicholson(1.0, 2.0).unwrap();
    let c_nich = critical_speed(&nich).unwrap().c_star + 0.5;
    for (m, c) in [(Model::kpp(0.5).unwrap(), 2.5), (Model::kpp(2.0).unwrap(), 2.5), (nich, c_nich)] {
        let sol = solve_profile(&m, c, &opts).unwrap();
        assert!(sol.converged);
        let d = diagnostics_q(&sol).unwrap();
        assert!(d.q_min >= -10.0 * opts.tol, "{}: {d:?}", m.name());
        assert!(d.pi_integral > 0.0);
    }
}

#[test]
fn q_of_kpp_is_the_delayed_product() {
    let m = Model::kpp(1.0).unwrap();
    let sol = solve_profile(&m, 2.5, &ProfileOptions::default()).unwrap();
    let d = diagnostics_q(&sol).unwrap();
    // Q(t) = φ(t)φ(t - ch) ≥ 0; deep in the tail it underflows the
    // subtraction and comes out as exactly 0
    assert!(d.q_min >= 0.0);
    for t in [-10.0, 0.0, 3.0, 20.0] {
        let hist = |s: f64| sol.eval(t + 2.5 * s);
        let q = m.lin().apply(hist) - m.eval_with(hist);
        let expect = sol.eval(t) * sol.eval(t - 2.5);
        assert!((q - expect).abs() <= 1e-15 * (1.0 + expect), "t={t}: {q} vs {expect}");
    }
}

#[test]
fn constant_profile_gives_the_linear_margin() {
    let m = Model::nicholson(1.0, 2.0).unwrap();
    let kappa = m.kappa();
    let grid = semiwave_core::kernel::Grid::new(-10.0, 0.1, 201).unwrap();
    let tail = LeftTail::Exponential { amplitude: kappa * 5f64.exp(), rate: 0.5 };
    // accept the samples as they are: φ ≡ κ on the grid
    let sol = ProfileSolution::from_samples(&m, 1.4, grid, vec![kappa; 201], tail, kappa, f64::INFINITY).unwrap();
    let d = diagnostics_q(&sol).unwrap();
    assert!(d.q_min > 0.0 && d.pi_integral > 0.0);
    // once the history stays on the grid, Q = (p - q)κ
    for i in [50, 120, 200] {
        let t = sol.grid.t(i);
        let hist = |s: f64| sol.eval(t + 1.4 * s);
        let q = m.lin().apply(hist) - m.eval_with(hist);
        assert!((q - kappa).abs() < 1e-12, "{q}");
    }
}

#[test]
fn alignment_recovers_translations() {
    let m = Model::kpp(0.5).unwrap();
    let a = solve_profile(&m, 2.5, &ProfileOptions::default()).unwrap();
    let (shift, dist) = align(&a, &a, 5.0);
    assert_eq!(shift, 0.0);
    assert!(dist <= 1e-14, "{dist:e}");
    // b(t) = a(t + 3), sampled on a's grid
    let mut b = a.clone();
    b.phi = a.grid.nodes().map(|t| a.eval_smooth(t + 3.0)).collect();
    b.dphi = a
        .grid
        .nodes()
        .map(|t| {
            let e = 1e-6;
            (a.eval_smooth(t + 3.0 + e) - a.eval_smooth(t + 3.0 - e)) / (2.0 * e)
        })
        .collect();
    let (shift, dist) = align(&a, &b, 10.0);
    assert!((shift - 3.0).abs() <= a.grid.dt, "{shift}");
    assert!(dist <= 10.0 * a.tol, "{dist:e}");
}

#[test]
fn uniqueness_up_to_translation() {
    let start = Instant::now();
    let nich = Model::nicholson(1.0, 2.0).unwrap();
    let c_nich = critical_speed(&nich).unwrap().c_star + 0.5;
    for (m, c) in [(Model::kpp(2.0).unwrap(), 2.5), (nich, c_nich)] {
        let loose = ProfileOptions { tol: 1e-7, ..Default::default() };
        let tight = ProfileOptions { tol: 1e-8, ..Default::default() };
        let (r1, sols) = uniqueness_harness(&m, c, 5, &loose).unwrap();
        let (r2, _) = uniqueness_harness(&m, c, 5, &tight).unwrap();
        assert!(r1.excluded.is_empty() && r2.excluded.is_empty(), "{}", m.name());
        assert_eq!(r1.pairs.len(), 10);
        assert!(r1.max_distance <= 1e-3, "{}: {}", m.name(), r1.max_distance);
        assert!(r2.max_distance < r1.max_distance, "{}: {} !< {}", m.name(), r2.max_distance, r1.max_distance);
        for sol in &sols {
            let d = diagnostics_q(sol).unwrap();
            assert!(d.q_min >= -10.0 * sol.tol && d.pi_integral > 0.0);
        }
        eprintln!("{} {:e} {:e}", m.name(), r1.max_distance, r2.max_distance);
    }
    assert!(start.elapsed().as_secs_f64() < 600.0);
}
