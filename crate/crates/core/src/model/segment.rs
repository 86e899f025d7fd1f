use crate::error::{Error, Result};

/// A continuous function on `[-h, 0]`, stored as uniform samples and
/// evaluated by piecewise-linear interpolation.
///
/// `values[0]` is the value at `s = -h` and the last sample is the value at
/// `s = 0`. A zero horizon holds a single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    h: f64,
    values: Vec<f64>,
}

impl HistorySegment {
    pub fn new(h: f64, values: Vec<f64>) -> Result<Self> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("segment horizon {h}")));
        }
        if values.is_empty() {
            return Err(Error::InvalidParameter("segment needs at least one sample".into()));
        }
        if h > 0.0 && values.len() < 2 {
            return Err(Error::InvalidParameter("segment with positive horizon needs at least two samples".into()));
        }
        Ok(Self { h, values })
    }

    pub fn constant(h: f64, value: f64) -> Self {
        let n = if h > 0.0 { 2 } else { 1 };
        Self { h, values: vec![value; n] }
    }

    /// Samples `f` at `n` uniform nodes of `[-h, 0]` (`n` is forced to 1 when
    /// `h == 0`).
    pub fn from_fn(h: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        if h == 0.0 || n < 2 {
            return Self { h, values: vec![f(0.0)] };
        }
        let step = h / (n - 1) as f64;
        let values = (0..n).map(|i| f(-h + i as f64 * step)).collect();
        Self { h, values }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `s`; arguments outside `[-h, 0]` are clamped to the domain.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let step = self.h / (n - 1) as f64;
        let x = ((s + self.h) / step).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let theta = x - i as f64;
        self.values[i] * (1.0 - theta) + self.values[i + 1] * theta
    }

    /// The max-norm `|φ|_C`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise linear combination `a·self + b·other` on a shared grid.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.h != other.h || self.values.len() != other.values.len() {
            return Err(Error::DomainMismatch { expected: self.h, got: other.h });
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { h: self.h, values })
    }
}
