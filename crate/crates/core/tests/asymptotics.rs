use semiwave_core::asymptotics::{fit_decay, fit_window, DecayMode};
use semiwave_core::profile::{solve_profile, ProfileOptions};
use semiwave_core::Model;

#[test]
fn noncritical_rate_matches_the_smaller_root() {
    for h in [0.5, 1.0] {
        let sol = solve_profile(&Model::kpp(h).unwrap(), 2.5, &ProfileOptions::default()).unwrap();
        let fit = fit_decay(&sol).unwrap();
        assert_eq!(fit.mode, DecayMode::PureExponential, "h={h}: {fit:?}");
        assert!((fit.rate - 0.5).abs() <= 0.02 * 0.5, "h={h}: {}", fit.rate);
    }
}

#[test]
fn critical_speed_is_classified() {
    for h in [0.0, 0.5, 1.0] {
        let sol = solve_profile(&Model::kpp(h).unwrap(), 2.0, &ProfileOptions::default()).unwrap();
        assert!(sol.converged, "h={h}");
        let fit = fit_decay(&sol).unwrap();
        assert_eq!(fit.mode, DecayMode::CriticalTTimesExponential, "h={h}: {fit:?}");
        assert!((fit.rate - 1.0).abs() < 0.05, "{}", fit.rate);
    }
}

#[test]
fn fit_error_shrinks_deeper_in_the_tail() {
    let sol = solve_profile(&Model::kpp(1.0).unwrap(), 2.5, &ProfileOptions::default()).unwrap();
    let t = sol.nodes();
    let errs: Vec<f64> = [(-30.0, -10.0), (-40.0, -20.0), (-50.0, -30.0)]
        .iter()
        .map(|&w| fit_window(&t, &sol.phi, sol.lambda1, w).unwrap().fit_error)
        .collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
}

#[test]
fn oscillation_separates_long_and_short_delays() {
    let opts = ProfileOptions::default();
    let long = fit_decay(&solve_profile(&Model::kpp(2.0).unwrap(), 2.5, &opts).unwrap()).unwrap();
    assert!(long.oscillatory && long.crossing_count >= 2, "{long:?}");
    let short = fit_decay(&solve_profile(&Model::kpp(0.1).unwrap(), 2.5, &opts).unwrap()).unwrap();
    assert!(!short.oscillatory && short.crossing_count == 0, "{short:?}");
}
