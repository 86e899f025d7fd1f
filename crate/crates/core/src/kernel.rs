//! Green's function of `y'' - cy' - (1+q)y = 0` and convolution against it.
//!
//! With `μ₋ < 0 < μ₊` the roots of `μ² - cμ - (1+q) = 0`,
//!
//! ```text
//! K(t) = e^{μ₋ t} / (μ₊ - μ₋),  t ≥ 0
//! K(t) = e^{μ₊ t} / (μ₊ - μ₋),  t ≤ 0
//! ```
//!
//! so `K > 0`, `∫K = 1/(1+q)` and `K'(0⁻) - K'(0⁺) = 1`. Convolutions are
//! split into a causal part (through `e^{μ₋ ·}`) and an anti-causal part
//! (through `e^{μ₊ ·}`), each computed by a one-pass recursion whose cell
//! integrals are exact for piecewise-linear sources.

use serde::Serialize;

use crate::error::{Error, Result};

/// A uniform grid `t_i = t_min + i·dt`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub t_min: f64,
    pub dt: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_min: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || n < 2 || !t_min.is_finite() {
            return Err(Error::InvalidParameter(format!("bad grid (t_min={t_min}, dt={dt}, n={n})")));
        }
        Ok(Self { t_min, dt, n })
    }

    /// Grid covering `[t_min, t_max]` with `t = 0` on a node when
    /// `t_min ≤ 0 ≤ t_max`; endpoints are rounded outward to nodes.
    pub fn spanning(t_min: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max > t_min) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("bad interval [{t_min}, {t_max}]")));
        }
        let lo = (t_min / dt).floor();
        let hi = (t_max / dt).ceil();
        Self::new(lo * dt, dt, (hi - lo) as usize + 1)
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.n - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.t(i))
    }
}

/// Source behaviour left of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LeftTail {
    /// `amplitude · e^{rate·s}`; `rate = 0` gives a constant.
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude · (shift - s) · e^{rate·s}`.
    Critical { amplitude: f64, shift: f64, rate: f64 },
}

impl LeftTail {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            LeftTail::Exponential { amplitude, rate } => amplitude * (rate * s).exp(),
            LeftTail::Critical { amplitude, shift, rate } => amplitude * (shift - s) * (rate * s).exp(),
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            LeftTail::Exponential { rate, .. } | LeftTail::Critical { rate, .. } => rate,
        }
    }

    /// `∫_{-∞}^{t} e^{μ₋(t - s)}·tail(s) ds`; finite since `rate ≥ 0 > μ₋`.
    pub(crate) fn causal_integral(&self, mu_minus: f64, t: f64) -> f64 {
        let k = self.rate() - mu_minus;
        match *self {
            LeftTail::Exponential { amplitude, rate } => amplitude * (rate * t).exp() / k,
            LeftTail::Critical { amplitude, shift, rate } => {
                amplitude * (rate * t).exp() * ((shift - t) / k + 1.0 / (k * k))
            }
        }
    }

    /// `∫_{a}^{b} e^{μ₊(a - s)}·tail(s) ds` for `a ≤ b`, including the
    /// resonant case `rate = μ₊` (polynomial-times-exponential branch).
    fn anticausal_segment(&self, mu_plus: f64, a: f64, b: f64) -> f64 {
        let len = b - a;
        let k = self.rate() - mu_plus;
        // ∫_0^len e^{k u} du and ∫_0^len u e^{k u} du, stable through k = 0
        let e0 = len * phi1(k * len);
        let e1 = len * len * phi2(k * len);
        let base = (self.rate() * a).exp();
        match *self {
            LeftTail::Exponential { amplitude, .. } => amplitude * base * e0,
            LeftTail::Critical { amplitude, shift, .. } => amplitude * base * ((shift - a) * e0 - e1),
        }
    }
}

/// `(e^x - 1)/x = ∫_0^1 e^{xv} dv`.
#[inline]
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * (0.5 + x / 6.0)
    } else {
        x.exp_m1() / x
    }
}

/// `∫_0^1 v e^{xv} dv = (x e^x - (e^x - 1))/x²`.
#[inline]
pub(crate) fn phi2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Σ x^k / (k! (k+2))
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..14 {
            term *= x / k as f64;
            sum += term / (k as f64 + 2.0);
        }
        sum
    } else {
        (x * x.exp() - x.exp_m1()) / (x * x)
    }
}

/// `L_i = ∫_{-∞}^{t_i} e^{μ(t_i - s)} y(s) ds` for `μ < 0`, piecewise-linear
/// `y` on the nodes, starting from `L_0 = init`.
pub(crate) fn causal_pass(values: &[f64], dt: f64, mu: f64, init: f64) -> Vec<f64> {
    let decay = (mu * dt).exp();
    let a1 = dt * phi1(mu * dt);
    let a2 = dt * phi2(mu * dt);
    let mut out = vec![0.0; values.len()];
    out[0] = init;
    for i in 0..values.len() - 1 {
        let (y0, y1) = (values[i], values[i + 1]);
        out[i + 1] = decay * out[i] + y1 * a1 - (y1 - y0) * a2;
    }
    out
}

/// `R_i = ∫_{t_i}^{∞} e^{μ(t_i - s)} y(s) ds` for `μ > 0`, starting from the
/// last node value `init`.
pub(crate) fn anticausal_pass(values: &[f64], dt: f64, mu: f64, init: f64) -> Vec<f64> {
    let n = values.len();
    let decay = (-mu * dt).exp();
    let b1 = dt * phi1(-mu * dt);
    let b2 = dt * phi2(-mu * dt);
    let mut out = vec![0.0; n];
    out[n - 1] = init;
    for i in (0..n - 1).rev() {
        let (y0, y1) = (values[i], values[i + 1]);
        out[i] = decay * out[i + 1] + y0 * b1 + (y1 - y0) * b2;
    }
    out
}

/// The positive Green's function of `y'' - cy' - (1+q)y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenKernel {
    pub c: f64,
    pub q: f64,
    pub mu_plus_root: f64,
    pub mu_minus_root: f64,
    pub norm: f64,
}

impl GreenKernel {
    /// Builds the kernel and checks the ODE and the unit derivative jump.
    pub fn new(c: f64, q: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !(q >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel needs c > 0, q >= 0 (c={c}, q={q})")));
        }
        let disc = (c * c + 4.0 * (1.0 + q)).sqrt();
        let mu_plus_root = 0.5 * (c + disc);
        // product of roots is -(1+q); avoids cancellation in c - disc
        let mu_minus_root = -(1.0 + q) / mu_plus_root;
        let k = Self { c, q, mu_plus_root, mu_minus_root, norm: 1.0 / (mu_plus_root - mu_minus_root) };
        let (ode, jump) = k.self_check();
        if ode > 1e-6 || (jump - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "kernel self-check failed (ode residual {ode:e}, jump {jump})"
            )));
        }
        Ok(k)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.norm * (self.mu_minus_root * t).exp()
        } else {
            self.norm * (self.mu_plus_root * t).exp()
        }
    }

    /// One-sided derivative: right derivative at `t ≥ 0`, left for `t < 0`.
    pub fn derivative(&self, t: f64, from_left: bool) -> f64 {
        if t > 0.0 || (t == 0.0 && !from_left) {
            self.mu_minus_root * self.eval(t)
        } else {
            self.mu_plus_root * self.norm * (self.mu_plus_root * t).exp()
        }
    }

    /// `K'(0⁻) - K'(0⁺)`.
    pub fn derivative_jump(&self) -> f64 {
        self.derivative(0.0, true) - self.derivative(0.0, false)
    }

    /// `∫K` from the closed-form branch integrals.
    pub fn integral(&self) -> f64 {
        self.norm * (1.0 / self.mu_plus_root - 1.0 / self.mu_minus_root)
    }

    /// Largest relative residual of `K'' - cK' - (1+q)K` away from zero, by
    /// central differences on both branches, and the derivative jump.
    pub fn self_check(&self) -> (f64, f64) {
        let (mp, mm) = (self.mu_plus_root, -self.mu_minus_root);
        let h = 1e-4 / (1.0 + mp);
        let mut worst: f64 = 0.0;
        for t in [-2.0 / mp, -0.5 / mp, 0.3 / mm, 1.7 / mm] {
            let d2 = (self.eval(t + h) - 2.0 * self.eval(t) + self.eval(t - h)) / (h * h);
            let d1 = (self.eval(t + h) - self.eval(t - h)) / (2.0 * h);
            let r = d2 - self.c * d1 - (1.0 + self.q) * self.eval(t);
            let scale = self.eval(t) * (1.0 + mp * mp);
            worst = worst.max(r.abs() / scale);
        }
        (worst, self.derivative_jump())
    }

    /// `∫ K(t - s)·src(s) ds` at every node, where the source is `values`
    /// (linear between nodes) on the grid, `left` before it and the constant
    /// `right` after it.
    pub fn convolve(&self, grid: &Grid, values: &[f64], left: LeftTail, right: f64) -> Vec<f64> {
        let (causal, anticausal) = self.branches(grid, values, left, right);
        causal.iter().zip(&anticausal).map(|(l, r)| self.norm * (l + r)).collect()
    }

    /// Unnormalized causal and anti-causal partial integrals at the nodes.
    fn branches(&self, grid: &Grid, values: &[f64], left: LeftTail, right: f64) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(values.len(), grid.n, "source length must match grid");
        let (mm, mp) = (self.mu_minus_root, self.mu_plus_root);
        let causal = causal_pass(values, grid.dt, mm, left.causal_integral(mm, grid.t_min));
        let anticausal = anticausal_pass(values, grid.dt, mp, right / mp);
        (causal, anticausal)
    }

    /// The same convolution evaluated at an arbitrary point, including
    /// points outside the grid.
    pub fn convolve_at(&self, grid: &Grid, values: &[f64], left: LeftTail, right: f64, t: f64) -> f64 {
        let (causal, anticausal) = self.branches(grid, values, left, right);
        let (mm, mp) = (self.mu_minus_root, self.mu_plus_root);
        let (t0, t1) = (grid.t_min, grid.t_max());
        let total = if t < t0 {
            let l = left.causal_integral(mm, t);
            let r = left.anticausal_segment(mp, t, t0) + (mp * (t - t0)).exp() * anticausal[0];
            l + r
        } else if t > t1 {
            let d = t - t1;
            let l = (mm * d).exp() * causal[grid.n - 1] + right * d * phi1(mm * d);
            l + right / mp
        } else {
            let x = ((t - t0) / grid.dt).min((grid.n - 1) as f64);
            let i = (x.floor() as usize).min(grid.n - 2);
            let ti = grid.t(i);
            let (d0, d1) = (t - ti, grid.t(i + 1) - t);
            let (y0, y1) = (values[i], values[i + 1]);
            let slope = (y1 - y0) / grid.dt;
            let yt = y0 + slope * d0;
            // causal: from t_i to t, with u = t - s
            let l = (mm * d0).exp() * causal[i] + yt * d0 * phi1(mm * d0) - slope * d0 * d0 * phi2(mm * d0);
            // anti-causal: from t to t_{i+1}, with u = s - t
            let r = (-mp * d1).exp() * anticausal[i + 1] + yt * d1 * phi1(-mp * d1) + slope * d1 * d1 * phi2(-mp * d1);
            l + r
        };
        self.norm * total
    }
}
