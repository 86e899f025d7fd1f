//! Delay reaction functionals `f: C[-h, 0] → ℝ`.
//!
//! A [`Model`] reads a history segment only at finitely many lags (its
//! *probes*), which covers discrete-delay equations such as the delayed
//! KPP-Fisher and Mackey-Glass type models. The linearization at zero is
//! carried separately as a [`Measure`]:
//!
//! ```text
//! f'(0)φ = -q·φ(0) + Σ_j w_j·φ(s_j)
//! ```

mod expr;
mod segment;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use expr::Expr;
pub use segment::HistorySegment;

/// Scalar map used by Mackey-Glass type models, `g: ℝ₊ → ℝ₊`.
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reaction evaluated on the probe values `φ(s_j)` of a segment.
pub type ReactionFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

const DOMAIN_TOL: f64 = 1e-12;

/// One point mass `w·δ_s` of the delayed part `μ₊` of the linearization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: f64,
    pub w: f64,
}

/// Linearization data `(q, μ₊)` with `μ₊` a finite sum of atoms.
///
/// Construction checks `q ≥ 0`, `w_j > 0` and `s_j ∈ [-h, 0]`. The
/// non-degeneracy `p > q` is not enforced here so that degenerate models can
/// still be built and rejected by the hypothesis checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    q: f64,
    atoms: Vec<Atom>,
}

impl Measure {
    pub fn new(q: f64, atoms: Vec<Atom>, h: f64) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be nonnegative, got {q}")));
        }
        for a in &atoms {
            if !(a.w > 0.0) || !a.w.is_finite() {
                return Err(Error::InvalidParameter(format!("atom weight {} not positive", a.w)));
            }
            if !(a.s <= 0.0 && a.s >= -h - DOMAIN_TOL) {
                return Err(Error::InvalidParameter(format!("atom position {} outside [-{h}, 0]", a.s)));
            }
        }
        Ok(Self { q, atoms })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Total mass `p = μ₊([-h, 0])`.
    pub fn p(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// `p - q`; positive exactly when the non-degeneracy condition holds.
    pub fn nd_margin(&self) -> f64 {
        self.p() - self.q
    }

    /// `-q·φ(0) + Σ w_j φ(s_j)` for any function given as a closure.
    pub fn apply(&self, phi: impl Fn(f64) -> f64) -> f64 {
        -self.q * phi(0.0) + self.atoms.iter().map(|a| a.w * phi(a.s)).sum::<f64>()
    }
}

/// Constants `(K, α, δ)` of the local smoothness bound
/// `|f(ψ) - f(φ) - f'(0)(ψ - φ)| ≤ K|ψ - φ|(|φ|^α + |ψ|^α)` for `|φ|, |ψ| < δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    #[serde(rename = "K")]
    pub k: f64,
    pub alpha: f64,
    pub delta: f64,
}

/// Serializable description of a model, used by configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Kpp {
        h: f64,
    },
    Nicholson {
        h: f64,
        p: f64,
    },
    May {
        h: f64,
        p: f64,
        z: f64,
        k: f64,
    },
    Custom {
        #[serde(default = "default_custom_name")]
        name: String,
        h: f64,
        /// Reaction expression, e.g. `u(0)*(1-u(-h))`.
        expr: String,
        q: f64,
        /// `[s, w]` pairs of the delayed part of the linearization.
        atoms: Vec<[f64; 2]>,
        kappa: f64,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        /// Overrides the default `K = 1, α = 1, δ = min(1, κ)`.
        #[serde(default)]
        smoothness: Option<Smoothness>,
    },
}

fn default_custom_name() -> String {
    "custom".into()
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        let mut model = match self {
            ModelSpec::Kpp { h } => Model::kpp(*h)?,
            ModelSpec::Nicholson { h, p } => Model::nicholson(*h, *p)?,
            ModelSpec::May { h, p, z, k } => Model::may(*h, *p, *z, *k)?,
            ModelSpec::Custom { name, h, expr, q, atoms, kappa, params, smoothness } => {
                let atoms = atoms.iter().map(|[s, w]| Atom { s: *s, w: *w }).collect();
                let measure = Measure::new(*q, atoms, *h)?;
                let m = Model::from_expr(name, *h, expr, params, measure, *kappa)?;
                match smoothness {
                    Some(sm) => m.with_smoothness(*sm)?,
                    None => m,
                }
            }
        };
        model.spec = Some(self.clone());
        Ok(model)
    }

    pub fn h(&self) -> f64 {
        match self {
            ModelSpec::Kpp { h }
            | ModelSpec::Nicholson { h, .. }
            | ModelSpec::May { h, .. }
            | ModelSpec::Custom { h, .. } => *h,
        }
    }
}

/// A delay reaction functional together with its linearization at zero,
/// positive equilibrium and smoothness constants.
///
/// Models are immutable and cheap to clone.
#[derive(Clone)]
pub struct Model {
    name: String,
    h: f64,
    probes: Vec<f64>,
    reaction: ReactionFn,
    lin: Measure,
    kappa: f64,
    smoothness: Smoothness,
    spec: Option<ModelSpec>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("h", &self.h)
            .field("probes", &self.probes)
            .field("lin", &self.lin)
            .field("kappa", &self.kappa)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl Model {
    /// General constructor. `reaction` receives `φ(probes[j])` in order.
    pub fn new(
        name: impl Into<String>,
        h: f64,
        probes: Vec<f64>,
        reaction: ReactionFn,
        lin: Measure,
        kappa: f64,
        smoothness: Smoothness,
    ) -> Result<Self> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("delay h must be nonnegative, got {h}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if let Some(s) = probes.iter().find(|s| !(**s <= 0.0 && **s >= -h - DOMAIN_TOL)) {
            return Err(Error::InvalidParameter(format!("probe lag {s} outside [-{h}, 0]")));
        }
        if let Some(a) = lin.atoms().iter().find(|a| a.s < -h - DOMAIN_TOL) {
            return Err(Error::InvalidParameter(format!("atom at {} outside [-{h}, 0]", a.s)));
        }
        let Smoothness { k, alpha, delta } = smoothness;
        if !(k > 0.0 && alpha > 0.0 && delta > 0.0) {
            return Err(Error::InvalidParameter("smoothness constants must be positive".into()));
        }
        Ok(Self { name: name.into(), h, probes, reaction, lin, kappa, smoothness, spec: None })
    }

    /// Delayed KPP-Fisher: `f(φ) = φ(0)(1 - φ(-h))`, `κ = 1`.
    pub fn kpp(h: f64) -> Result<Self> {
        let lin = Measure::new(0.0, vec![Atom { s: 0.0, w: 1.0 }], h)?;
        let smooth = Smoothness { k: 1.0, alpha: 1.0, delta: 1.0 };
        let reaction: ReactionFn = Arc::new(|u: &[f64]| u[0] * (1.0 - u[1]));
        let mut m = Self::new("kpp", h, vec![0.0, -h], reaction, lin, 1.0, smooth)?;
        m.spec = Some(ModelSpec::Kpp { h });
        Ok(m)
    }

    /// Mackey-Glass type model `f(φ) = -φ(0) + g(φ(-h))`.
    ///
    /// The smoothness constant is estimated as `K = sup|g''|/2` over
    /// `[0, κ]` (central differences, 1% margin) with `α = 1`, `δ = κ`.
    pub fn mackey_glass(h: f64, g: ScalarMap, g_prime_0: f64, kappa: f64) -> Result<Self> {
        let smooth = Smoothness { k: 1.01 * 0.5 * sup_second_derivative(&*g, 0.0, kappa), alpha: 1.0, delta: kappa };
        Self::mackey_glass_with("mackey_glass", h, g, g_prime_0, kappa, smooth)
    }

    fn mackey_glass_with(
        name: &str,
        h: f64,
        g: ScalarMap,
        g_prime_0: f64,
        kappa: f64,
        smooth: Smoothness,
    ) -> Result<Self> {
        if !(g_prime_0 > 1.0) {
            return Err(Error::InvalidParameter(format!("g'(0) = {g_prime_0} must exceed 1 (p must exceed q = 1)")));
        }
        let lin = Measure::new(1.0, vec![Atom { s: -h, w: g_prime_0 }], h)?;
        let reaction: ReactionFn = Arc::new(move |u: &[f64]| -u[0] + g(u[1]));
        Self::new(name, h, vec![0.0, -h], reaction, lin, kappa, smooth)
    }

    /// Nicholson's blowflies: `g(u) = p·u·e^{-u}`, `κ = ln p`.
    pub fn nicholson(h: f64, p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter(format!("Nicholson needs p > 1, got {p}")));
        }
        let kappa = p.ln();
        // |g''(u)| = p e^{-u} |u - 2| is maximal at u = 0 on [0, 2].
        let smooth = Smoothness { k: p, alpha: 1.0, delta: kappa.min(2.0) };
        let g: ScalarMap = Arc::new(move |u| p * u * (-u).exp());
        let mut m = Self::mackey_glass_with("nicholson", h, g, p, kappa, smooth)?;
        m.spec = Some(ModelSpec::Nicholson { h, p });
        Ok(m)
    }

    /// May's whale model: `g(u) = max{p·u·(1 - u^z/k^z), 0}`,
    /// `κ = k(1 - 1/p)^{1/z}`.
    pub fn may(h: f64, p: f64, z: f64, k: f64) -> Result<Self> {
        if !(p > 1.0 && z > 1.0 && k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "May model needs p > 1, z > 1, k > 0 (got p={p}, z={z}, k={k})"
            )));
        }
        let kappa = k * (1.0 - 1.0 / p).powf(1.0 / z);
        // g(b) - g(a) - p(b - a) = -p(b^{z+1} - a^{z+1})/k^z on [0, k].
        let smooth = Smoothness { k: p * (z + 1.0) / k.powf(z), alpha: z, delta: k };
        let g: ScalarMap = Arc::new(move |u| {
            let v = u.max(0.0);
            (p * v * (1.0 - (v / k).powf(z))).max(0.0)
        });
        let mut m = Self::mackey_glass_with("may", h, g, p, kappa, smooth)?;
        m.spec = Some(ModelSpec::May { h, p, z, k });
        Ok(m)
    }

    /// A user-defined model from an expression such as `u(0)*(1-u(-h))`.
    ///
    /// Smoothness defaults to `K = 1`, `α = 1`, `δ = min(1, κ)`; override
    /// with [`Model::with_smoothness`].
    pub fn from_expr(
        name: &str,
        h: f64,
        src: &str,
        params: &BTreeMap<String, f64>,
        lin: Measure,
        kappa: f64,
    ) -> Result<Self> {
        let expr = Expr::compile(src, h, params)?;
        let probes = expr.probes().to_vec();
        let reaction: ReactionFn = Arc::new(move |u: &[f64]| expr.eval(u));
        let smooth = Smoothness { k: 1.0, alpha: 1.0, delta: kappa.min(1.0) };
        Self::new(name, h, probes, reaction, lin, kappa, smooth)
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Result<Self> {
        let Smoothness { k, alpha, delta } = smoothness;
        if !(k > 0.0 && alpha > 0.0 && delta > 0.0) {
            return Err(Error::InvalidParameter("smoothness constants must be positive".into()));
        }
        self.smoothness = smoothness;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn lin(&self) -> &Measure {
        &self.lin
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn probes(&self) -> &[f64] {
        &self.probes
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    /// Evaluates the reaction from probe values `φ(probes[j])`.
    #[inline]
    pub fn eval_probes(&self, values: &[f64]) -> f64 {
        (self.reaction)(values)
    }

    fn check_domain(&self, seg: &HistorySegment) -> Result<()> {
        if (seg.h() - self.h).abs() > DOMAIN_TOL {
            return Err(Error::DomainMismatch { expected: self.h, got: seg.h() });
        }
        Ok(())
    }

    pub fn eval_f(&self, seg: &HistorySegment) -> Result<f64> {
        self.check_domain(seg)?;
        Ok(self.eval_with(|s| seg.eval(s)))
    }

    /// Evaluates `f` on the function `s ↦ phi(s)`.
    pub fn eval_with(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let mut buf = [0.0; 8];
        if self.probes.len() <= buf.len() {
            for (b, s) in buf.iter_mut().zip(&self.probes) {
                *b = phi(*s);
            }
            self.eval_probes(&buf[..self.probes.len()])
        } else {
            let vals: Vec<f64> = self.probes.iter().map(|s| phi(*s)).collect();
            self.eval_probes(&vals)
        }
    }

    pub fn eval_lin(&self, seg: &HistorySegment) -> Result<f64> {
        self.check_domain(seg)?;
        Ok(self.lin.apply(|s| seg.eval(s)))
    }

    /// `f*(x)`: the reaction on the constant segment `x`.
    pub fn f_star(&self, x: f64) -> f64 {
        self.eval_with(|_| x)
    }
}

/// `sup |g''|` over `[a, b]` from central second differences.
fn sup_second_derivative(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    let eps = 1e-4 * b.abs().max(1.0);
    (0..=n)
        .map(|i| {
            let x = a + (b - a) * i as f64 / n as f64;
            let x = x.max(a + eps);
            ((g(x + eps) - 2.0 * g(x) + g(x - eps)) / (eps * eps)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kpp_values() {
        let m = Model::kpp(1.0).unwrap();
        assert_eq!(m.f_star(0.0), 0.0);
        assert_eq!(m.f_star(1.0), 0.0);
        assert_eq!(m.f_star(0.5), 0.25);
        let seg = HistorySegment::from_fn(1.0, 11, |s| 0.5 + 0.5 * s);
        assert_eq!(m.eval_f(&seg).unwrap(), 0.5);
        let seg = HistorySegment::constant(1.0, 0.5);
        assert_eq!(m.eval_f(&seg).unwrap(), 0.25);
    }

    #[test]
    fn kpp_linearization() {
        let m = Model::kpp(1.0).unwrap();
        assert_eq!(m.eval_lin(&HistorySegment::constant(1.0, 1.0)).unwrap(), 1.0);
        let seg = HistorySegment::from_fn(1.0, 101, |s| (2.0 * s).exp());
        assert!((m.eval_lin(&seg).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.lin().nd_margin(), 1.0);
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let m = Model::kpp(1.0).unwrap();
        let seg = HistorySegment::constant(2.0, 0.5);
        assert!(matches!(m.eval_f(&seg), Err(Error::DomainMismatch { .. })));
        assert!(m.eval_lin(&seg).is_err());
    }

    #[test]
    fn nicholson_equilibrium_matches_root_find() {
        // g(x) = x by bisection on [0.1, 5].
        let (mut lo, mut hi) = (0.1f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid * (-mid).exp() - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let m = Model::nicholson(1.0, 2.0).unwrap();
        assert!((m.kappa() - lo).abs() < 1e-14);
        assert!((m.kappa() - 2f64.ln()).abs() < 1e-15);
        assert!(m.f_star(m.kappa()).abs() < 1e-15);
        assert_eq!(m.f_star(0.0), 0.0);
        let lin = m.eval_lin(&HistorySegment::constant(1.0, 1.0)).unwrap();
        assert_eq!(lin, 1.0);
    }

    #[test]
    fn may_preset() {
        let m = Model::may(1.0, 2.0, 2.0, 1.0).unwrap();
        assert_eq!(m.lin().q(), 1.0);
        assert_eq!(m.lin().p(), 2.0);
        assert_eq!(m.lin().nd_margin(), 1.0);
        assert!((m.kappa() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(m.f_star(m.kappa()).abs() < 1e-12);
        // the max{., 0} clamp switches off births beyond u = k
        assert_eq!(m.f_star(1.5), -1.5);
    }

    #[test]
    fn mackey_glass_rejects_weak_growth() {
        let g: ScalarMap = Arc::new(|u| 0.9 * u);
        assert!(Model::mackey_glass(1.0, g, 0.9, 1.0).is_err());
        assert!(Model::nicholson(1.0, 1.0).is_err());
    }

    #[test]
    fn mackey_glass_smoothness_estimate() {
        let p = 2.0;
        let g: ScalarMap = Arc::new(move |u| p * u * (-u).exp());
        let m = Model::mackey_glass(0.5, g, p, p.ln()).unwrap();
        // sup |g''| / 2 = p at u = 0
        assert!((m.smoothness().k - 1.01 * p).abs() < 1e-2);
        assert_eq!(m.lin().atoms()[0].s, -0.5);
    }

    #[test]
    fn spec_round_trip_builds_same_model() {
        let spec = ModelSpec::Custom {
            name: "kpp-expr".into(),
            h: 1.0,
            expr: "u(0)*(1-u(-h))".into(),
            q: 0.0,
            atoms: vec![[0.0, 1.0]],
            kappa: 1.0,
            params: BTreeMap::new(),
            smoothness: None,
        };
        let m = spec.build().unwrap();
        let k = Model::kpp(1.0).unwrap();
        let seg = HistorySegment::from_fn(1.0, 9, |s| 0.3 - 0.2 * s);
        assert_eq!(m.eval_f(&seg).unwrap(), k.eval_f(&seg).unwrap());
        assert_eq!(m.spec(), Some(&spec));
    }

    #[test]
    fn measure_validation() {
        assert!(Measure::new(-1.0, vec![], 1.0).is_err());
        assert!(Measure::new(0.0, vec![Atom { s: -2.0, w: 1.0 }], 1.0).is_err());
        assert!(Measure::new(0.0, vec![Atom { s: 0.0, w: 0.0 }], 1.0).is_err());
        let m = Measure::new(0.5, vec![Atom { s: -1.0, w: 0.25 }], 1.0).unwrap();
        assert!(m.nd_margin() < 0.0);
    }
}
