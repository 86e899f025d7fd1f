use std::time::Instant;

use semiwave_core::chareq;
use semiwave_core::evolution::{compare_with_profile, evolve, EvolutionOptions, InitialData, Scheme};
use semiwave_core::profile::{solve_profile, ProfileOptions};
use semiwave_core::Model;

fn tail_run(h: f64, rate: f64, dx: f64) -> semiwave_core::evolution::EvolutionRun {
    let opts = EvolutionOptions { dx, initial: InitialData::Tail { rate, at: 0.0 }, ..Default::default() };
    evolve(&Model::kpp(h).unwrap(), &opts).unwrap()
}

#[test]
fn delay_free_tail_selects_the_linear_spreading_speed() {
    // c = λ + 1/λ at λ = 0.5
    let run = tail_run(0.0, 0.5, 0.1);
    assert!(run.aborted.is_none(), "{:?}", run.aborted);
    assert!((run.speed - 2.5).abs() <= 0.02 * 2.5, "speed {}", run.speed);
    assert_eq!(run.clamped, 0);
}

#[test]
fn steep_data_approaches_the_minimal_speed() {
    let opts = EvolutionOptions {
        x_min: -140.0,
        x_max: 20.0,
        t_end: 50.0,
        initial: InitialData::Step { at: 0.0 },
        ..Default::default()
    };
    let run = evolve(&Model::kpp(0.0).unwrap(), &opts).unwrap();
    assert!(run.aborted.is_none(), "{:?}", run.aborted);
    assert!((run.speed - 2.0).abs() <= 0.03 * 2.0, "speed {}", run.speed);
}

#[test]
fn delayed_front_matches_the_profile_in_the_moving_frame() {
    let start = Instant::now();
    let m = Model::kpp(1.0).unwrap();
    let lam = chareq::real_roots(&m, 2.5).unwrap().unwrap().lambda1;
    let run = tail_run(1.0, lam, 0.1);
    assert!(run.aborted.is_none(), "{:?}", run.aborted);
    assert!((run.speed - 2.5).abs() <= 0.02 * 2.5, "speed {}", run.speed);
    assert_eq!(run.clamped, 0);
    let sol = solve_profile(&m, 2.5, &ProfileOptions::default()).unwrap();
    let cmp = compare_with_profile(&run, &sol, (-40.0, 30.0)).unwrap();
    assert!(cmp.sup_error <= 5e-2, "{cmp:?}");
    eprintln!(
        "speed {} sup {:e} offset {} front {:?} in {:?}",
        run.speed,
        cmp.sup_error,
        cmp.offset,
        run.front(),
        start.elapsed()
    );
}

#[test]
fn speed_is_consistent_across_resolutions() {
    let coarse = tail_run(1.0, 0.5, 0.2);
    let fine = tail_run(1.0, 0.5, 0.1);
    let rel = (coarse.speed - fine.speed).abs() / fine.speed;
    assert!(rel <= 0.01, "{} vs {}", coarse.speed, fine.speed);
}

#[test]
fn implicit_scheme_agrees_with_explicit() {
    let opts = EvolutionOptions { dx: 0.2, t_end: 10.0, ..Default::default() };
    let m = Model::kpp(0.5).unwrap();
    let ex = evolve(&m, &opts).unwrap();
    let im = evolve(&m, &EvolutionOptions { scheme: Scheme::Implicit, dt: Some(0.01), ..opts }).unwrap();
    assert!((ex.speed - im.speed).abs() < 0.02 * ex.speed, "{} vs {}", ex.speed, im.speed);
}

#[test]
fn perturbed_equilibrium_stays_bounded() {
    let opts = EvolutionOptions {
        x_min: -30.0,
        x_max: 30.0,
        dx: 0.1,
        t_end: 20.0,
        initial: InitialData::Step { at: -20.0 },
        ..Default::default()
    };
    let run = evolve(&Model::kpp(0.2).unwrap(), &opts).unwrap();
    assert!(run.u.iter().all(|&v| (0.0..=1.5).contains(&v)));
}

#[test]
fn front_leaving_the_domain_aborts_with_partial_data() {
    let opts = EvolutionOptions { x_min: -40.0, x_max: 20.0, dx: 0.2, t_end: 30.0, ..Default::default() };
    let run = evolve(&Model::kpp(0.0).unwrap(), &opts).unwrap();
    assert!(run.aborted.is_some());
    assert!(run.positions.len() > 10);
    assert!(run.t_end < 30.0);
}
