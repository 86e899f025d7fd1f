//! The five subcommands. Each returns its exit code; reports are written
//! before a nonzero code is returned.

use std::path::PathBuf;

use semiwave_core::asymptotics::{detect_oscillation, fit_decay};
use semiwave_core::chareq::{self, CriticalSpeed};
use semiwave_core::evolution::{compare_with_profile, evolve, FrameComparison};
use semiwave_core::profile::{solve_profile, ProfileSolution};
use semiwave_core::verify::{diagnostics_q, uniqueness_harness, VerificationReport};
use semiwave_core::Model;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SpeedChoice};
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_NOT_CONVERGED};
use crate::output;

/// Aligned sup distance above which the uniqueness harness fails.
pub const UNIQUENESS_TOL: f64 = 1e-3;

/// What a command produced: exit code, the JSON report and written files.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    pub files: Vec<PathBuf>,
}

fn config_value(cfg: &RunConfig) -> Result<Value, CliError> {
    serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))
}

fn speed_of(cfg: &RunConfig, m: &Model, cs: &CriticalSpeed, default_margin: Option<f64>) -> Result<f64, CliError> {
    match cfg.c {
        Some(SpeedChoice::Value(c)) => Ok(c),
        Some(SpeedChoice::Named(_)) => Ok(cs.c_star),
        None => match default_margin {
            Some(dc) => Ok(cs.c_star + dc),
            None => Err(CliError::Config(format!("model {} needs a speed (--c or --critical)", m.name()))),
        },
    }
}

/// Writes `name` into the output directory when one was requested.
fn maybe_write(cfg: &RunConfig, name: &str, report: &Value, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if cfg.out_dir_requested() {
        files.push(output::write(&cfg.out_dir(), name, &output::json(report)?)?);
    }
    Ok(())
}

pub fn speed(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let cs = chareq::critical_speed(&m)?;
    let c = speed_of(cfg, &m, &cs, Some(0.0))?;
    let roots = chareq::real_roots(&m, c)?.ok_or(semiwave_core::Error::Subcritical { c })?;
    let dom = chareq::dominance_check(&m, c)?;
    let report = json!({
        "config": config_value(cfg)?,
        "c": c,
        "c_star": cs.c_star,
        "lambda_star": cs.lambda_star,
        "lambda1": roots.lambda1,
        "lambda2": roots.lambda2,
        "critical": roots.critical,
        "dominance_ok": dom.ok,
        "dominance": dom,
        "critical_speed": cs,
    });
    let mut files = Vec::new();
    maybe_write(cfg, "speed.json", &report, &mut files)?;
    Ok(Outcome { code: 0, report, files })
}

pub fn zeros(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let cs = chareq::critical_speed(&m)?;
    let c = speed_of(cfg, &m, &cs, Some(0.0))?;
    let roots = chareq::real_roots(&m, c)?;
    let z = &cfg.zeros;
    let (re_min, re_max) = match (z.re_min, z.re_max, roots) {
        (Some(a), Some(b), _) => (a, b),
        (a, b, Some(r)) => (a.unwrap_or(r.lambda1 - 1e-3), b.unwrap_or(r.lambda2 + 1e-3)),
        _ => return Err(CliError::Config(format!("speed {c} is subcritical: give re_min and re_max"))),
    };
    let count = chareq::count_zeros_rect(&m, c, (re_min, re_max), z.im_max.unwrap_or(50.0))?;
    let report = json!({ "config": config_value(cfg)?, "c": c, "zeros": count });
    let mut files = Vec::new();
    maybe_write(cfg, "zeros.json", &report, &mut files)?;
    Ok(Outcome { code: 0, report, files })
}

fn error_value<T: Serialize>(r: semiwave_core::Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn profile(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let cs = chareq::critical_speed(&m)?;
    let c = speed_of(cfg, &m, &cs, None)?;
    let sol = solve_profile(&m, c, &cfg.profile)?;
    let dir = cfg.out_dir();
    let mut files = Vec::new();
    let t = sol.nodes();
    files.push(output::write(&dir, "profile.csv", &output::csv(&["t", "phi", "dphi"], &[&t, &sol.phi, &sol.dphi]))?);

    let fit = fit_decay(&sol);
    if cfg.output.svg {
        files.push(output::write(&dir, "profile.svg", &output::profile_svg(&sol, fit.as_ref().ok()))?);
    }
    let report = json!({
        "config": config_value(cfg)?,
        "c_star": cs.c_star,
        "solution": sol.summary(),
        "decay_fit": error_value(fit),
        "oscillation": error_value(detect_oscillation(&sol).map(|(o, n)| json!({ "oscillatory": o, "crossings": n }))),
        "q_diagnostics": error_value(diagnostics_q(&sol)),
    });
    files.push(output::write(&dir, "profile.json", &output::json(&report)?)?);
    let code = if sol.converged { 0 } else { EXIT_NOT_CONVERGED };
    Ok(Outcome { code, report, files })
}

/// Pass/fail of the profile diagnostics at a tolerance.
pub fn diagnostics_pass(q_min: Option<f64>, pi_integral: Option<f64>, tol: f64) -> bool {
    q_min.is_none_or(|q| q >= -10.0 * tol) && pi_integral.is_none_or(|p| p > 0.0)
}

pub fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let mut report = VerificationReport::new(&m, &cfg.verify.checks());
    let mut profile_failure = None;
    // profile diagnostics presuppose the hypotheses
    if report.hypotheses_passed() {
        let cs = chareq::critical_speed(&m)?;
        let c = speed_of(cfg, &m, &cs, Some(cfg.verify.speed_margin))?;
        let mut sols: Vec<ProfileSolution> = Vec::new();
        if cfg.verify.seeds > 0 {
            let (u, runs) = uniqueness_harness(&m, c, cfg.verify.seeds, &cfg.profile)?;
            report.uniqueness = Some(u);
            sols = runs;
        } else {
            let sol = solve_profile(&m, c, &cfg.profile)?;
            if !sol.converged {
                profile_failure = Some(format!("profile at c = {c} did not converge"));
            }
            sols.push(sol);
        }
        report.add_diagnostics(&sols)?;
    }
    let uniqueness_ok =
        report.uniqueness.as_ref().is_none_or(|u| u.excluded.is_empty() && u.max_distance <= UNIQUENESS_TOL);
    let diag_ok = diagnostics_pass(report.q_min, report.pi_integral, cfg.profile.tol);
    let passed = report.hypotheses_passed() && diag_ok && uniqueness_ok && profile_failure.is_none();
    let value = json!({
        "config": config_value(cfg)?,
        "passed": passed,
        "diagnostics_ok": diag_ok,
        "uniqueness_ok": uniqueness_ok,
        "profile_failure": profile_failure,
        "report": report,
    });
    let mut files = Vec::new();
    maybe_write(cfg, "verify.json", &value, &mut files)?;
    Ok(Outcome { code: if passed { 0 } else { EXIT_CHECK_FAILED }, report: value, files })
}

pub fn evolve_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model.build()?;
    let run = evolve(&m, &cfg.evolve)?;
    let dir = cfg.out_dir();
    let mut files = Vec::new();
    let (ts, xs): (Vec<f64>, Vec<f64>) = run.positions.iter().copied().unzip();
    files.push(output::write(&dir, "front.csv", &output::csv(&["t", "x"], &[&ts, &xs]))?);
    files.push(output::write(&dir, "final.csv", &output::csv(&["x", "u"], &[&run.x, &run.u]))?);

    // with a speed given, the final field is compared with the profile at it
    let comparison: Option<FrameComparison> = match cfg.c {
        None => None,
        Some(_) => {
            let cs = chareq::critical_speed(&m)?;
            let c = speed_of(cfg, &m, &cs, None)?;
            let sol = solve_profile(&m, c, &cfg.profile)?;
            Some(compare_with_profile(&run, &sol, (-40.0, 30.0))?)
        }
    };
    let report = json!({
        "config": config_value(cfg)?,
        "speed": run.speed,
        "t_end": run.t_end,
        "steps": run.steps,
        "clamped": run.clamped,
        "front": run.front(),
        "aborted": run.aborted,
        "profile_comparison": comparison,
    });
    files.push(output::write(&dir, "evolve.json", &output::json(&report)?)?);
    let code = if run.aborted.is_some() { 3 } else { 0 };
    Ok(Outcome { code, report, files })
}
