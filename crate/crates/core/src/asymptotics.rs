//! Decay law of a profile at `-∞` and oscillation about `κ`.
//!
//! Away from the critical speed `φ(t) ~ A·e^{λ₁t}`; at `c = c*` the double
//! root gives `φ(t) ~ B·(-t)·e^{λ₁t}`. The two are told apart by regressing
//! `log φ - λ₁t` against `log(-t)` on the deeper half of the fit window: the
//! slope is 0 for the pure exponential and 1 for the critical form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::ProfileSolution;

/// Minimum number of samples in the fit window.
pub const MIN_WINDOW_POINTS: usize = 50;
/// Largest distance of the `log(-t)` slope from 1 classified as critical.
pub const CRITICAL_SLOPE_TOL: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    PureExponential,
    CriticalTTimesExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted exponential rate `γ`.
    pub rate: f64,
    pub mode: DecayMode,
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-linear fit.
    pub fit_error: f64,
    /// Log of the fitted amplitude (`log A`, or `log B` in critical mode).
    pub log_amplitude: f64,
    /// Slope of `log φ - λ₁t` against `log(-t)`.
    pub log_slope: f64,
    pub points: usize,
    pub oscillatory: bool,
    pub crossing_count: usize,
}

/// Least-squares line `y ≈ a + b·x`; returns `(a, b, rms)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Default window: from the sixth sample to the first point where
/// `φ ≥ 0.05κ`.
pub fn default_window(t: &[f64], phi: &[f64], kappa: f64) -> Result<(f64, f64)> {
    if t.len() < 6 {
        return Err(Error::Fit("profile too short".into()));
    }
    let end =
        phi.iter().position(|&p| p >= 0.05 * kappa).ok_or_else(|| Error::Fit("profile never reaches 0.05κ".into()))?;
    if end <= 5 {
        return Err(Error::Fit("window too small".into()));
    }
    Ok((t[5], t[end - 1]))
}

/// Fits the decay law on `window` of the samples `(t, φ)`.
pub fn fit_window(t: &[f64], phi: &[f64], lambda1: f64, window: (f64, f64)) -> Result<DecayFit> {
    let (ta, tb) = window;
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= ta && t[i] <= tb).collect();
    if idx.len() < MIN_WINDOW_POINTS {
        return Err(Error::Fit(format!("window too small: {} points, need {MIN_WINDOW_POINTS}", idx.len())));
    }
    if let Some(&i) = idx.iter().find(|&&i| !(phi[i] > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {} at t = {}", phi[i], t[i])));
    }
    let x: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let logs: Vec<f64> = idx.iter().map(|&i| phi[i].ln()).collect();

    // The critical form is `(-t + O(1))e^{λ₁t}`; the O(1) offset biases the
    // slope by about offset/|t|, so only the deeper half of the window is used.
    let mid = 0.5 * (x[0] + x[x.len() - 1]);
    let deep: Vec<usize> = (0..x.len()).filter(|&k| x[k] <= mid).collect();
    let log_slope = if x.iter().all(|&v| v < 0.0) {
        let lx: Vec<f64> = deep.iter().map(|&k| (-x[k]).ln()).collect();
        let ly: Vec<f64> = deep.iter().map(|&k| logs[k] - lambda1 * x[k]).collect();
        line_fit(&lx, &ly).1
    } else {
        0.0
    };
    let critical = (log_slope - 1.0).abs() <= CRITICAL_SLOPE_TOL;
    let (log_amplitude, rate, fit_error) = if critical {
        let y: Vec<f64> = x.iter().zip(&logs).map(|(v, l)| l - (-v).ln()).collect();
        line_fit(&x, &y)
    } else {
        line_fit(&x, &logs)
    };
    if !(rate > 0.0) {
        return Err(Error::Fit(format!("fitted rate {rate} is not positive")));
    }
    Ok(DecayFit {
        rate,
        mode: if critical { DecayMode::CriticalTTimesExponential } else { DecayMode::PureExponential },
        window: (x[0], x[x.len() - 1]),
        fit_error,
        log_amplitude,
        log_slope,
        points: x.len(),
        oscillatory: false,
        crossing_count: 0,
    })
}

/// Sign changes of `φ - κ` on `t ≥ 0`, ignoring excursions smaller than
/// `band` (hysteresis).
pub fn count_crossings(t: &[f64], phi: &[f64], kappa: f64, band: f64) -> usize {
    let mut side = 0i8;
    let mut count = 0;
    for (&ti, &p) in t.iter().zip(phi) {
        if ti < 0.0 {
            continue;
        }
        let d = p - kappa;
        let now = if d > band {
            1
        } else if d < -band {
            -1
        } else {
            continue;
        };
        if side != 0 && now != side {
            count += 1;
        }
        side = now;
    }
    count
}

/// Hysteresis band for crossing counts, relative to `κ`.
const BAND: f64 = 1e-6;

/// `(oscillatory, crossing_count)` of a converged profile; oscillatory
/// means at least two crossings of `κ` on `[0, T+]`.
pub fn detect_oscillation(sol: &ProfileSolution) -> Result<(bool, usize)> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    let t = sol.nodes();
    let n = count_crossings(&t, &sol.phi, sol.model.kappa(), BAND * sol.model.kappa());
    Ok((n >= 2, n))
}

/// Decay fit of a converged profile on the default window, with the
/// oscillation fields filled in.
pub fn fit_decay(sol: &ProfileSolution) -> Result<DecayFit> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    let t = sol.nodes();
    let window = default_window(&t, &sol.phi, sol.model.kappa())?;
    let mut fit = fit_window(&t, &sol.phi, sol.lambda1, window)?;
    let (osc, n) = detect_oscillation(sol)?;
    fit.oscillatory = osc;
    fit.crossing_count = n;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, dt: f64) -> Vec<f64> {
        let n = ((b - a) / dt).round() as usize + 1;
        (0..n).map(|i| a + i as f64 * dt).collect()
    }

    #[test]
    fn pure_exponential() {
        let t = grid(-60.0, 10.0, 0.02);
        let phi: Vec<f64> = t.iter().map(|&s| (0.5 * s).exp().min(1.0)).collect();
        let w = default_window(&t, &phi, 1.0).unwrap();
        let fit = fit_window(&t, &phi, 0.5, w).unwrap();
        assert_eq!(fit.mode, DecayMode::PureExponential);
        assert!((fit.rate - 0.5).abs() < 1e-6);
        assert!(fit.log_amplitude.abs() < 1e-6);
    }

    #[test]
    fn critical_form() {
        let t = grid(-40.0, -2.0, 0.02);
        let phi: Vec<f64> = t.iter().map(|&s| -s * s.exp()).collect();
        let w = default_window(&t, &phi, 1.0).unwrap();
        let fit = fit_window(&t, &phi, 1.0, w).unwrap();
        assert_eq!(fit.mode, DecayMode::CriticalTTimesExponential);
        assert!((fit.rate - 1.0).abs() < 1e-6);
        assert!((fit.log_slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_windows_and_bad_values_are_rejected() {
        let t = grid(-1.0, 0.0, 0.1);
        let phi = vec![0.01; t.len()];
        assert!(fit_window(&t, &phi, 0.5, (-1.0, 0.0)).is_err());
        let t = grid(-10.0, 0.0, 0.01);
        let mut phi: Vec<f64> = t.iter().map(|&s| (0.5 * s).exp()).collect();
        phi[300] = 0.0;
        assert!(fit_window(&t, &phi, 0.5, (-9.0, -1.0)).is_err());
    }

    #[test]
    fn damped_oscillation_is_detected() {
        let t = grid(-10.0, 40.0, 0.01);
        let phi: Vec<f64> = t.iter().map(|&s| (1.0 + (-s).exp() * s.sin()).max(0.0)).collect();
        let n = count_crossings(&t, &phi, 1.0, 1e-6);
        assert!(n >= 2, "{n}");
        let mono: Vec<f64> = t.iter().map(|&s| 1.0 / (1.0 + (-s).exp())).collect();
        assert_eq!(count_crossings(&t, &mono, 1.0, 1e-6), 0);
    }
}
