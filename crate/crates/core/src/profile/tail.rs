//! Left tails that are exact eigenfunctions of the discretized linear map.
//!
//! On the grid, `A` acts on a geometric sequence `e^{ρt_i}` (linearized at
//! zero) as multiplication by a symbol `D(ρ)`, which differs from the
//! continuous `m/(m - χ)` by `O(Δ²)`. A tail built from the continuous root
//! would feed the fast mode through the left boundary and break the
//! translation invariance of the truncated problem, so tails are built from
//! the roots of `D(ρ) = 1` instead.
//!
//! Well above the critical speed the single slow root is used. Near it the
//! two roots are close (or complex for the discrete problem) and the tail
//! combines both, `e^{στ}(a·C(τ) + b·S(τ))` with `C = cosh δτ`,
//! `S = sinh(δτ)/δ` and `δ² = split2`, which passes smoothly through the
//! double root and into the complex pair.

use num_complex::Complex64;

use crate::chareq;
use crate::error::Result;
use crate::kernel::{phi1, phi2, GreenKernel, LeftTail};
use crate::model::Model;

/// Recursion weights of the piecewise-linear convolution on a grid of
/// step `Δ`.
#[derive(Debug, Clone, Copy)]
pub(super) struct Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub norm: f64,
    pub mu_plus: f64,
}

impl Coefficients {
    pub fn of(k: &GreenKernel, dt: f64) -> Self {
        let (mm, mp) = (k.mu_minus_root, k.mu_plus_root);
        Self {
            alpha: (mm * dt).exp(),
            beta: (-mp * dt).exp(),
            a1: dt * phi1(mm * dt),
            a2: dt * phi2(mm * dt),
            b1: dt * phi1(-mp * dt),
            b2: dt * phi2(-mp * dt),
            norm: k.norm,
            mu_plus: mp,
        }
    }
}

/// The discrete linearized map on geometric sequences.
#[derive(Debug, Clone)]
pub(super) struct Dispersion {
    pub co: Coefficients,
    dt: f64,
    /// Per atom of the linear part: whole-node offset, fraction, weight.
    taps: Vec<(isize, f64, f64)>,
}

impl Dispersion {
    pub fn new(model: &Model, c: f64, kernel: &GreenKernel, dt: f64) -> Self {
        let taps = model
            .lin()
            .atoms()
            .iter()
            .map(|a| {
                let (k, th) = split_offset(c * a.s / dt);
                (k, th, a.w)
            })
            .collect();
        Self { co: Coefficients::of(kernel, dt), dt, taps }
    }

    /// Source per unit `φ`: `1 + Σ w_j·interp(e^{ρ(t + cs_j)})/e^{ρt}`.
    fn multiplier(&self, r: Complex64) -> Complex64 {
        let mut m = Complex64::new(1.0, 0.0);
        for &(k, th, w) in &self.taps {
            let e0 = (r * (k as f64 * self.dt)).exp();
            let e1 = (r * ((k + 1) as f64 * self.dt)).exp();
            m += w * (e0 * (1.0 - th) + e1 * th);
        }
        m
    }

    /// `L_i / y_i` for `y_i = e^{ρt_i}`.
    fn causal_gain(&self, r: Complex64) -> Complex64 {
        let co = &self.co;
        let e = (r * self.dt).exp();
        ((co.a1 - co.a2) * e + co.a2) / (e - co.alpha)
    }

    /// `R_i / y_i` for `y_i = e^{ρt_i}`.
    fn anticausal_gain(&self, r: Complex64) -> Complex64 {
        let co = &self.co;
        let e = (r * self.dt).exp();
        ((co.b1 - co.b2) + co.b2 * e) / (1.0 - co.beta * e)
    }

    pub fn symbol(&self, r: Complex64) -> Complex64 {
        self.co.norm * self.multiplier(r) * (self.causal_gain(r) + self.anticausal_gain(r))
    }

    /// Causal integral at a node per unit tail amplitude there.
    fn seed(&self, r: Complex64) -> Complex64 {
        self.multiplier(r) * self.causal_gain(r)
    }

    fn excess(&self, r: f64) -> f64 {
        self.symbol(Complex64::new(r, 0.0)).re - 1.0
    }
}

/// `c·s/Δ = k + θ`, with rounding noise snapped onto the node.
pub(super) fn split_offset(d: f64) -> (isize, f64) {
    let k = d.floor();
    let th = d - k;
    if th > 1.0 - 1e-9 {
        (k as isize + 1, 0.0)
    } else if th < 1e-9 {
        (k as isize, 0.0)
    } else {
        (k as isize, th)
    }
}

/// Exponents used for the tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum Modes {
    Single(f64),
    Pair { sigma: f64, split2: f64 },
}

/// Below this `|δ|²` the pair is treated at `|δ| = 1e-6`; the induced
/// eigen-defect is of order `D''·1e-12`.
const MIN_SPLIT2: f64 = 1e-12;

impl Modes {
    /// Picks the tail exponents for a grid whose left end is `span` units
    /// below the pinned crossing.
    pub fn choose(model: &Model, c: f64, disp: &Dispersion, span: f64) -> Result<Self> {
        let roots = chareq::real_roots(model, c)?;
        let pair = match roots {
            Some(r) => r.critical || (r.lambda2 - r.lambda1) * span < 40.0,
            None => true,
        };
        let zm = chareq::real_minimizer(model, c);
        let mp = disp.co.mu_plus;
        let (lo, hi) = (0.25 * zm, zm + 0.75 * (mp - zm));
        let rm = golden_min(|r| disp.excess(r), lo, hi);
        let emin = disp.excess(rm);
        if emin < 0.0 {
            let r1 = bisect(|r| disp.excess(r), 0.0, rm);
            if !pair {
                return Ok(Modes::Single(r1));
            }
            let mut top = hi;
            while disp.excess(top) < 0.0 {
                top = 0.5 * (top + mp);
            }
            let r2 = bisect(|r| disp.excess(r), rm, top);
            let split2 = (0.5 * (r2 - r1)).powi(2).max(MIN_SPLIT2);
            return Ok(Modes::Pair { sigma: 0.5 * (r1 + r2), split2 });
        }
        // complex pair: refine the quadratic estimate with complex Newton
        let h = 1e-4 * rm.max(1e-3);
        let curv = (disp.excess(rm + h) - 2.0 * emin + disp.excess(rm - h)) / (h * h);
        let mut z = Complex64::new(rm, (2.0 * emin / curv.max(1e-300)).sqrt());
        for _ in 0..60 {
            let g = disp.symbol(z) - 1.0;
            let dz = Complex64::new(1e-7 * z.norm().max(1e-3), 0.0);
            let dg = (disp.symbol(z + dz) - disp.symbol(z - dz)) / (2.0 * dz);
            let step = g / dg;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            z -= step;
            if step.norm() < 1e-15 * z.norm() {
                break;
            }
        }
        let split2 = if z.re.is_finite() && z.im.is_finite() { -(z.im * z.im) } else { -(2.0 * emin / curv) };
        Ok(Modes::Pair { sigma: z.re, split2: if split2.abs() < MIN_SPLIT2 { MIN_SPLIT2 } else { split2 } })
    }

    /// Decay rate reported for the tail.
    pub fn rate(&self) -> f64 {
        match *self {
            Modes::Single(r) => r,
            Modes::Pair { sigma, .. } => sigma,
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Root of `f` on `[a, b]` given a sign change.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn cosh_like(split2: f64, tau: f64) -> f64 {
    if split2 >= 0.0 {
        (split2.sqrt() * tau).cosh()
    } else {
        ((-split2).sqrt() * tau).cos()
    }
}

fn sinh_like(split2: f64, tau: f64) -> f64 {
    if split2 >= 0.0 {
        let d = split2.sqrt();
        (d * tau).sinh() / d
    } else {
        let w = (-split2).sqrt();
        (w * tau).sin() / w
    }
}

/// A tail anchored at `t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct Tail {
    pub t0: f64,
    pub a: f64,
    pub b: f64,
    pub modes: Modes,
}

impl Tail {
    /// Matches `φ(t0) = first` and, for a pair, `φ(t0 + len) = second`;
    /// linear in the two samples.
    pub fn fit(modes: Modes, t0: f64, first: f64, len: f64, second: f64) -> Self {
        let b = match modes {
            Modes::Single(_) => 0.0,
            Modes::Pair { sigma, split2 } => {
                (second * (-sigma * len).exp() - first * cosh_like(split2, len)) / sinh_like(split2, len)
            }
        };
        Self { t0, a: first, b, modes }
    }

    pub fn value(&self, t: f64) -> f64 {
        let tau = t - self.t0;
        match self.modes {
            Modes::Single(r) => self.a * (r * tau).exp(),
            Modes::Pair { sigma, split2 } => {
                (sigma * tau).exp() * (self.a * cosh_like(split2, tau) + self.b * sinh_like(split2, tau))
            }
        }
    }

    /// Unnormalized causal integral of the linearized source at `t0`.
    pub fn seed(&self, disp: &Dispersion) -> f64 {
        match self.modes {
            Modes::Single(r) => self.a * disp.seed(Complex64::new(r, 0.0)).re,
            Modes::Pair { sigma, split2 } => {
                let d = Complex64::new(split2, 0.0).sqrt();
                let up = disp.seed(sigma + d);
                let down = disp.seed(sigma - d);
                (self.a * (up + down) * 0.5 + self.b * (up - down) / (2.0 * d)).re
            }
        }
    }

    /// Closed-form approximation for reporting: the exponential for a single
    /// mode, and the critical form `B(S - t)e^{σt}` for a pair with a
    /// positive slope coefficient.
    pub fn report(&self) -> LeftTail {
        let rate = self.modes.rate();
        let scale = (-rate * self.t0).exp();
        if self.b < 0.0 {
            LeftTail::Critical { amplitude: -self.b * scale, shift: self.t0 - self.a / self.b, rate }
        } else {
            LeftTail::Exponential { amplitude: self.a * scale, rate }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dispersion(model: &Model, c: f64, dt: f64) -> Dispersion {
        let q = model.lin().q();
        Dispersion::new(model, c, &GreenKernel::new(c, q).unwrap(), dt)
    }

    #[test]
    fn discrete_root_is_close_to_continuous() {
        let m = Model::kpp(1.0).unwrap();
        let disp = dispersion(&m, 2.5, 0.02);
        let modes = Modes::choose(&m, 2.5, &disp, 80.0).unwrap();
        let Modes::Single(r) = modes else { panic!("{modes:?}") };
        assert!((r - 0.5).abs() < 1e-3, "{r}");
        assert!((disp.symbol(Complex64::new(r, 0.0)).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_speed_uses_a_pair() {
        let m = Model::kpp(0.5).unwrap();
        let disp = dispersion(&m, 2.0, 0.02);
        let Modes::Pair { sigma, split2 } = Modes::choose(&m, 2.0, &disp, 40.0).unwrap() else { panic!() };
        assert!((sigma - 1.0).abs() < 1e-2);
        assert!(split2.abs() < 1e-3);
    }

    /// A geometric tail carried through one causal step reproduces itself.
    #[test]
    fn seed_matches_recursion() {
        let m = Model::nicholson(1.0, 2.0).unwrap();
        let dt = 0.05;
        let disp = dispersion(&m, 1.4, dt);
        let r = 0.4;
        let tail = Tail::fit(Modes::Single(r), -3.0, 2.0, 1.0, 0.0);
        let l0 = tail.seed(&disp);
        let l1 = Tail::fit(Modes::Single(r), -3.0 + dt, 2.0 * (r * dt).exp(), 1.0, 0.0).seed(&disp);
        let co = disp.co;
        let mult = disp.multiplier(Complex64::new(r, 0.0)).re;
        let (y0, y1) = (2.0 * mult, 2.0 * mult * (r * dt).exp());
        let step = co.alpha * l0 + (co.a1 - co.a2) * y1 + co.a2 * y0;
        assert!((step - l1).abs() < 1e-12 * l1.abs());
    }

    #[test]
    fn pair_fit_interpolates_and_is_continuous_in_split() {
        for split2 in [0.3, 1e-12, -0.2] {
            let modes = Modes::Pair { sigma: 0.7, split2 };
            let t = Tail::fit(modes, -10.0, 0.3, 1.5, 0.9);
            assert!((t.value(-10.0) - 0.3).abs() < 1e-14);
            assert!((t.value(-8.5) - 0.9).abs() < 1e-12);
        }
        let near = Tail::fit(Modes::Pair { sigma: 0.7, split2: 1e-12 }, 0.0, 1.0, 1.0, 3.0);
        let exact_b = 3.0 * (-0.7f64).exp() - 1.0;
        assert!((near.b - exact_b).abs() < 1e-9);
    }
}
