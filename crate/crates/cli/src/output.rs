//! CSV, JSON and SVG writers. Numbers in CSV files carry 17 significant
//! digits so that reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use semiwave_core::asymptotics::{DecayFit, DecayMode};
use semiwave_core::profile::ProfileSolution;
use serde::Serialize;

use crate::error::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a header and one row per tuple of columns.
pub fn csv(header: &[&str], columns: &[&[f64]]) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| num(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

/// Static plot of a profile with a `κ` guide line and, when given, the
/// fitted tail law over its window.
pub fn profile_svg(sol: &ProfileSolution, fit: Option<&DecayFit>) -> String {
    let t: Vec<f64> = sol.nodes();
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let kappa = sol.model.kappa();
    let y1 = sol.phi.iter().cloned().fold(kappa, f64::max) * 1.1;
    let px = |v: f64| PAD + (v - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - v.clamp(0.0, y1) / y1 * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, b, top) = (PAD, W - PAD, H - PAD, PAD);
    let _ = writeln!(s, r#"<path d="M{l} {top}V{b}H{r}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let tv = t0 + (t1 - t0) * k as f64 / 5.0;
        let x = px(tv);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, b + 5.0);
        let _ =
            writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{tv:.1}</text>"#, b + 20.0);
        let yv = y1 * k as f64 / 5.0;
        let y = py(yv);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{yv:.2}</text>"#,
            l - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">t</text>"#, 0.5 * W, H - 12.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" font-size="14">φ</text>"#, 0.5 * H);
    let yk = py(kappa);
    let _ = writeln!(s, r#"<line x1="{l}" y1="{yk:.2}" x2="{r}" y2="{yk:.2}" stroke="gray" stroke-dasharray="6 4"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="gray">κ</text>"#, r + 4.0, yk + 4.0);

    let stride = (t.len() / 1500).max(1);
    let pts: Vec<String> = (0..t.len())
        .step_by(stride)
        .chain(std::iter::once(t.len() - 1))
        .map(|i| format!("{:.2},{:.2}", px(t[i]), py(sol.phi[i])))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="navy" stroke-width="1.5"/>"#, pts.join(" "));

    if let Some(fit) = fit {
        let (a, b) = fit.window;
        let law = |x: f64| match fit.mode {
            DecayMode::PureExponential => (fit.log_amplitude + fit.rate * x).exp(),
            DecayMode::CriticalTTimesExponential => (-x).max(0.0) * (fit.log_amplitude + fit.rate * x).exp(),
        };
        let pts: Vec<String> = (0..=200)
            .map(|k| a + (b - a) * k as f64 / 200.0)
            .map(|x| format!("{:.2},{:.2}", px(x), py(law(x))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="crimson" stroke-width="1.5" stroke-dasharray="4 3"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="crimson">tail fit, rate {:.4}</text>"#,
            l + 10.0,
            top + 16.0,
            fit.rate
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(csv(&["a", "b"], &[&[1.0], &[2.0]]), "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
