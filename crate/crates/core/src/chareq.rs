//! The characteristic function
//!
//! ```text
//! χ(z, c) = z² - cz - q + Σ_j w_j e^{c z s_j}
//! ```
//!
//! of the linearization at zero, its positive real roots `λ₁(c) ≤ λ₂(c)`, the
//! critical speed `c*` at which they merge, and argument-principle zero
//! counting used to certify that no complex zero has real part at or beyond
//! `λ₁(c)` except the real pair.
//!
//! On the real axis `χ(·, c)` is strictly convex with `χ(0, c) = p - q > 0`
//! and `∂χ/∂z(0, c) < 0`, so it has a unique interior minimum and at most two
//! positive roots; everything below is built on that shape.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;

/// Roots closer than this (relative to `max(1, λ₂)`) are reported as a
/// double root.
pub const DOUBLE_ROOT_TOL: f64 = 1e-6;

/// Half-width of the margin left of `λ₁` in the dominance rectangle.
pub const DOMINANCE_MARGIN: f64 = 1e-3;

/// `(q, atoms)` with an optional scaling of the delays, so the critical speed
/// can be continued from the delay-free quadratic.
#[derive(Debug, Clone)]
struct CharFn {
    q: f64,
    atoms: Vec<(f64, f64)>,
}

impl CharFn {
    fn of(m: &Model) -> Self {
        Self::scaled(m, 1.0)
    }

    fn scaled(m: &Model, theta: f64) -> Self {
        let lin = m.lin();
        Self { q: lin.q(), atoms: lin.atoms().iter().map(|a| (theta * a.s, a.w)).collect() }
    }

    fn p(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    fn complex(&self, z: Complex64, c: f64) -> Complex64 {
        let mut acc = z * z - c * z - self.q;
        for &(s, w) in &self.atoms {
            acc += w * (z * (c * s)).exp();
        }
        acc
    }

    fn complex_with_derivative(&self, z: Complex64, c: f64) -> (Complex64, Complex64) {
        let mut w = z * z - c * z - self.q;
        let mut dw = 2.0 * z - c;
        for &(s, a) in &self.atoms {
            let e = a * (z * (c * s)).exp();
            w += e;
            dw += e * (c * s);
        }
        (w, dw)
    }

    fn value(&self, z: f64, c: f64) -> f64 {
        z * z - c * z - self.q + self.atoms.iter().map(|&(s, w)| w * (c * z * s).exp()).sum::<f64>()
    }

    fn dz(&self, z: f64, c: f64) -> f64 {
        2.0 * z - c + self.atoms.iter().map(|&(s, w)| w * c * s * (c * z * s).exp()).sum::<f64>()
    }

    fn dzz(&self, z: f64, c: f64) -> f64 {
        2.0 + self.atoms.iter().map(|&(s, w)| w * (c * s).powi(2) * (c * z * s).exp()).sum::<f64>()
    }

    fn dc(&self, z: f64, c: f64) -> f64 {
        -z + self.atoms.iter().map(|&(s, w)| w * z * s * (c * z * s).exp()).sum::<f64>()
    }

    fn dzc(&self, z: f64, c: f64) -> f64 {
        -1.0 + self.atoms.iter().map(|&(s, w)| w * s * (c * z * s).exp() * (1.0 + c * z * s)).sum::<f64>()
    }

    /// Magnitude used to make residual thresholds relative.
    fn scale(&self, z: f64, c: f64) -> f64 {
        1.0 + z * z + c * z.abs() + self.q + self.p()
    }

    /// Location of the real minimum on `z > 0`.
    fn argmin(&self, c: f64) -> f64 {
        let mut hi = 1.0;
        while self.dz(hi, c) <= 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.dz(mid, c) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `min_{z > 0} χ(z, c)` and its location.
    fn minimum(&self, c: f64) -> (f64, f64) {
        if c == 0.0 {
            return (0.0, self.p() - self.q);
        }
        let zm = self.argmin(c);
        (zm, self.value(zm, c))
    }

    /// Root of `χ(·, c)` in `[lo, hi]` given a sign change, polished by Newton.
    fn bracketed_root(&self, mut lo: f64, mut hi: f64, c: f64) -> f64 {
        let f_lo = self.value(lo, c);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.value(mid, c) > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.dz(z, c);
            if d == 0.0 {
                break;
            }
            let next = z - self.value(z, c) / d;
            if !(next >= lo - 1e-9 && next <= hi + 1e-9) {
                break;
            }
            z = next;
        }
        z
    }
}

pub fn eval_chi(m: &Model, z: Complex64, c: f64) -> Complex64 {
    CharFn::of(m).complex(z, c)
}

/// `χ(λ, c)` for real `λ`.
pub fn chi_real(m: &Model, lambda: f64, c: f64) -> f64 {
    CharFn::of(m).value(lambda, c)
}

/// `∂χ/∂λ(λ, c)` for real `λ`.
pub fn chi_dlambda(m: &Model, lambda: f64, c: f64) -> f64 {
    CharFn::of(m).dz(lambda, c)
}

/// Location of the minimum of `χ(·, c)` on the positive real axis; equals
/// the double root at `c*`.
pub fn real_minimizer(m: &Model, c: f64) -> f64 {
    CharFn::of(m).argmin(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub critical: bool,
}

/// The positive real zeros of `χ(·, c)`, or `None` when `c < c*`.
pub fn real_roots(m: &Model, c: f64) -> Result<Option<RootPair>> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("speed must be positive, got {c}")));
    }
    let cf = CharFn::of(m);
    if cf.p() - cf.q <= 0.0 {
        return Err(Error::InvalidParameter("degenerate linearization: p <= q".into()));
    }
    Ok(roots_of(&cf, c))
}

fn roots_of(cf: &CharFn, c: f64) -> Option<RootPair> {
    let (zm, vmin) = cf.minimum(c);
    let tol = 1e-13 * cf.scale(zm, c);
    if vmin > tol {
        return None;
    }
    if vmin >= -tol {
        return Some(RootPair { lambda1: zm, lambda2: zm, critical: true });
    }
    let lambda1 = cf.bracketed_root(0.0, zm, c);
    let mut hi = 2.0 * zm.max(1.0);
    while cf.value(hi, c) <= 0.0 {
        hi *= 2.0;
    }
    let lambda2 = cf.bracketed_root(zm, hi, c);
    if (lambda2 - lambda1).abs() < DOUBLE_ROOT_TOL * lambda2.max(1.0) {
        return Some(RootPair { lambda1: zm, lambda2: zm, critical: true });
    }
    Some(RootPair { lambda1, lambda2, critical: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalMethod {
    Newton,
    Bisection,
}

/// The critical speed, with both solution routes reported.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSpeed {
    pub c_star: f64,
    pub lambda_star: f64,
    /// Route whose value is reported as `c_star`.
    pub method: CriticalMethod,
    /// `(c*, λ*)` from damped Newton on `χ = ∂χ/∂λ = 0`.
    pub newton: Option<(f64, f64)>,
    /// `(c*, λ*)` from bisection on `c ↦ min_λ χ(λ, c)`.
    pub bisection: Option<(f64, f64)>,
    /// `|c_newton - c_bisection|` when both succeeded.
    pub disagreement: Option<f64>,
    /// `(|χ|, |∂χ/∂λ|)` at the reported point.
    pub residual: (f64, f64),
}

/// Solves `χ(λ, c) = ∂χ/∂λ(λ, c) = 0` by damped Newton from the delay-free
/// quadratic `λ = √(p-q)`, `c = 2√(p-q)`, and cross-checks it by bisection on
/// the sign of `min_λ χ(λ, c)`.
pub fn critical_speed(m: &Model) -> Result<CriticalSpeed> {
    let cf = CharFn::of(m);
    if cf.p() - cf.q <= 0.0 {
        return Err(Error::CriticalSpeed("degenerate linearization: p <= q".into()));
    }
    let newton = critical_newton_continued(m).ok();
    let bisection = critical_bisection(&cf).ok();
    let (c_star, lambda_star, method) = match (newton, bisection) {
        (Some((c, l)), _) => (c, l, CriticalMethod::Newton),
        (None, Some((c, l))) => (c, l, CriticalMethod::Bisection),
        (None, None) => return Err(Error::CriticalSpeed("Newton and bisection both failed".into())),
    };
    let disagreement = match (newton, bisection) {
        (Some(a), Some(b)) => Some((a.0 - b.0).abs()),
        _ => None,
    };
    let residual = (cf.value(lambda_star, c_star).abs(), cf.dz(lambda_star, c_star).abs());
    Ok(CriticalSpeed { c_star, lambda_star, method, newton, bisection, disagreement, residual })
}

/// Newton on the double-root system, continued in the delay scale when a
/// direct solve from the quadratic guess fails. Returns `(c*, λ*)`.
pub fn critical_speed_newton(m: &Model) -> Result<(f64, f64)> {
    critical_newton_continued(m)
}

fn critical_newton_continued(m: &Model) -> Result<(f64, f64)> {
    let cf = CharFn::of(m);
    let root = (cf.p() - cf.q).sqrt();
    let guess = (root, 2.0 * root);
    if let Ok((l, c)) = newton_double_root(&cf, guess) {
        return Ok((c, l));
    }
    let mut x = guess;
    let steps = 20;
    for i in 1..=steps {
        let theta = i as f64 / steps as f64;
        x = newton_double_root(&CharFn::scaled(m, theta), x)?;
    }
    Ok((x.1, x.0))
}

fn newton_double_root(cf: &CharFn, (mut lambda, mut c): (f64, f64)) -> Result<(f64, f64)> {
    let norm = |l: f64, c: f64| cf.value(l, c).hypot(cf.dz(l, c));
    let mut r = norm(lambda, c);
    for _ in 0..100 {
        let (f1, f2) = (cf.value(lambda, c), cf.dz(lambda, c));
        let (a, b) = (cf.dz(lambda, c), cf.dc(lambda, c));
        let (d, e) = (cf.dzz(lambda, c), cf.dzc(lambda, c));
        let det = a * e - b * d;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::CriticalSpeed("singular Jacobian".into()));
        }
        let dl = (e * f1 - b * f2) / det;
        let dc = (a * f2 - d * f1) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let (nl, nc) = (lambda - step * dl, c - step * dc);
            if nl > 0.0 && nc > 0.0 {
                let nr = norm(nl, nc);
                if nr < r || nr <= 1e-15 * cf.scale(nl, nc) {
                    lambda = nl;
                    c = nc;
                    r = nr;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        let small_step = (dl.abs() <= 1e-15 * lambda.max(1.0)) && (dc.abs() <= 1e-15 * c.max(1.0));
        if r <= 1e-14 * cf.scale(lambda, c) && (small_step || !accepted) {
            return Ok((lambda, c));
        }
        if !accepted {
            return Err(Error::CriticalSpeed(format!("line search stalled at residual {r:e}")));
        }
    }
    if r <= 1e-12 * cf.scale(lambda, c) {
        return Ok((lambda, c));
    }
    Err(Error::CriticalSpeed(format!("Newton did not converge (residual {r:e})")))
}

/// Bisection on `c` of the sign of `min_{λ>0} χ(λ, c)`, which decreases in
/// `c`. Returns `(c*, λ*)`.
pub fn critical_speed_bisection(m: &Model) -> Result<(f64, f64)> {
    critical_bisection(&CharFn::of(m))
}

fn critical_bisection(cf: &CharFn) -> Result<(f64, f64)> {
    let margin = cf.p() - cf.q;
    if margin <= 0.0 {
        return Err(Error::CriticalSpeed("degenerate linearization: p <= q".into()));
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * margin.sqrt();
    let mut n = 0;
    while cf.minimum(hi).1 >= 0.0 {
        lo = hi;
        hi *= 2.0;
        n += 1;
        if n > 60 {
            return Err(Error::CriticalSpeed("no sign change in min χ".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cf.minimum(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok((c, cf.argmin(c)))
}

/// Closed rectangle `[re_min, re_max] × [-im_max, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_max: f64,
}

impl Rect {
    fn grown(&self, eta: f64) -> Rect {
        Rect { re_min: self.re_min - eta, re_max: self.re_max + eta, im_max: self.im_max + eta }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroCount {
    pub count: i64,
    /// Raw winding number before rounding.
    pub winding: f64,
    /// Rectangle actually used (after any perturbation).
    pub rect: Rect,
    pub perturbations: usize,
    pub evaluations: usize,
}

/// Number of zeros (with multiplicity) of `χ(·, c)` inside the rectangle,
/// from the winding number of its boundary image.
///
/// Phase is tracked adaptively: a step is accepted only if its argument
/// increment is below π/2 and agrees with the sum over its two halves. A
/// contour point with `|χ|` below `1e-12` of the local scale counts as
/// hitting a zero; the rectangle is then grown slightly, up to three times.
pub fn count_zeros_rect(m: &Model, c: f64, re_range: (f64, f64), im_max: f64) -> Result<ZeroCount> {
    if !(c > 0.0) || !(re_range.0 < re_range.1) || !(im_max > 0.0) {
        return Err(Error::InvalidParameter("empty rectangle or nonpositive speed".into()));
    }
    let cf = CharFn::of(m);
    let base = Rect { re_min: re_range.0, re_max: re_range.1, im_max };
    let eta0 = 1e-7 * (1.0 + re_range.0.abs() + re_range.1.abs());
    let mut rect = base;
    for attempt in 0..=3 {
        if attempt > 0 {
            rect = base.grown(eta0 * 10f64.powi(attempt as i32 - 1));
        }
        match winding(&cf, c, &rect) {
            Ok((w, evaluations)) => {
                let count = w.round();
                if (w - count).abs() > 0.05 {
                    return Err(Error::NonIntegerWinding(w));
                }
                return Ok(ZeroCount { count: count as i64, winding: w, rect, perturbations: attempt, evaluations });
            }
            Err(TooClose) => continue,
        }
    }
    Err(Error::ContourTooClose { attempts: 3 })
}

struct TooClose;

fn winding(cf: &CharFn, c: f64, r: &Rect) -> std::result::Result<(f64, usize), TooClose> {
    let corners = [
        Complex64::new(r.re_min, -r.im_max),
        Complex64::new(r.re_max, -r.im_max),
        Complex64::new(r.re_max, r.im_max),
        Complex64::new(r.re_min, r.im_max),
    ];
    let mut total = 0.0;
    let mut evals = 0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let (d, n) = edge_phase(cf, c, a, b)?;
        total += d;
        evals += n;
    }
    Ok((total / (2.0 * PI), evals))
}

fn edge_phase(cf: &CharFn, c: f64, a: Complex64, b: Complex64) -> std::result::Result<(f64, usize), TooClose> {
    let len = (b - a).norm();
    let eval = |tau: f64| -> std::result::Result<(Complex64, Complex64), TooClose> {
        let z = a + (b - a) * tau;
        let (w, dw) = cf.complex_with_derivative(z, c);
        let scale = 1.0 + z.norm_sqr() + c * z.norm() + cf.q + cf.p();
        if !(w.norm() > 1e-12 * scale) {
            return Err(TooClose);
        }
        Ok((w, dw))
    };
    // Bound the next step by the local phase rate |χ'/χ|·len so that a
    // near-zero of χ cannot be stepped over.
    let target = 0.25;
    let min_step = 1e-13;
    let rate_step = |w: Complex64, dw: Complex64| target / ((dw / w).norm() * len).max(1e-300);

    let mut tau = 0.0;
    let (mut w, mut dw) = eval(0.0)?;
    let mut evals = 1;
    let mut total = 0.0;
    let mut step = rate_step(w, dw).min(1.0 / 64.0);
    while tau < 1.0 {
        step = step.min(1.0 - tau);
        let (w1, dw1) = eval(tau + step)?;
        let (wm, _) = eval(tau + 0.5 * step)?;
        evals += 2;
        let d = (w1 / w).arg();
        let d1 = (wm / w).arg();
        let d2 = (w1 / wm).arg();
        let consistent = (d1 + d2 - d).abs() < 1e-9 && d1.abs() < 0.5 * PI && d2.abs() < 0.5 * PI;
        if d.abs() < 0.5 * PI && consistent {
            total += d;
            tau += step;
            w = w1;
            dw = dw1;
            step = (1.5 * step).min(rate_step(w, dw)).min(1.0 / 16.0);
        } else {
            step *= 0.5;
            if step < min_step {
                return Err(TooClose);
            }
        }
    }
    Ok((total, evals))
}

/// Result of the dominance test at a given speed.
#[derive(Debug, Clone, Serialize)]
pub struct Dominance {
    pub ok: bool,
    pub count: i64,
    pub expected: i64,
    pub rect: Rect,
}

/// Height of the dominance rectangle unless overridden.
pub fn default_im_bound(m: &Model, c: f64) -> f64 {
    let lin = m.lin();
    10.0 * (c + lin.p() + lin.q() + 1.0)
}

/// Right edge of the dominance rectangle.
///
/// For `Re z ≥ 0` every zero satisfies `|z² - cz - q| = |Σ w e^{czs}| ≤ p`,
/// i.e. `|(z - c/2)² - (c²/4 + q)| ≤ p`, so `|z - c/2| ≤ √(c²/4 + q + p)`.
/// No zero has real part beyond `c/2 + √(c²/4 + q + p)`.
pub fn re_bound(m: &Model, c: f64) -> f64 {
    let lin = m.lin();
    0.5 * c + (0.25 * c * c + lin.q() + lin.p()).sqrt()
}

/// Checks that the only zeros with `Re z ≥ λ₁(c) - 1e-3` are the two real
/// roots (a double root counts twice).
pub fn dominance_check(m: &Model, c: f64) -> Result<Dominance> {
    dominance_check_with(m, c, default_im_bound(m, c))
}

pub fn dominance_check_with(m: &Model, c: f64, im_max: f64) -> Result<Dominance> {
    let roots = real_roots(m, c)?.ok_or(Error::Subcritical { c })?;
    let re_max = re_bound(m, c).max(roots.lambda2) + 1.0;
    let zc = count_zeros_rect(m, c, (roots.lambda1 - DOMINANCE_MARGIN, re_max), im_max)?;
    Ok(Dominance { ok: zc.count == 2, count: zc.count, expected: 2, rect: zc.rect })
}

/// Summary of the linear analysis at one speed.
#[derive(Debug, Clone, Serialize)]
pub struct SpeedAnalysis {
    pub c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub critical: bool,
    pub c_star: f64,
    pub dominance_ok: bool,
}

pub fn analyze(m: &Model, c: f64) -> Result<SpeedAnalysis> {
    let cs = critical_speed(m)?;
    let roots = real_roots(m, c)?.ok_or(Error::Subcritical { c })?;
    let dom = dominance_check(m, c)?;
    Ok(SpeedAnalysis {
        c,
        lambda1: roots.lambda1,
        lambda2: roots.lambda2,
        critical: roots.critical,
        c_star: cs.c_star,
        dominance_ok: dom.ok,
    })
}
