//! Semi-wavefront profiles `u(t, x) = φ(x + ct)` of monostable reaction-diffusion
//! equations with delay,
//!
//! ```text
//! u_t = u_xx + f(u_t(·, x)),   u ≥ 0,
//! ```
//!
//! where `f` acts on the history segment `u(t + s, x)`, `s ∈ [-h, 0]`.
//!
//! The crate is split along the numerical pipeline:
//!
//! * [`model`]: reaction functionals, their linearization at zero and the
//!   built-in registry (delayed KPP-Fisher, Nicholson, May).
//! * [`chareq`]: the characteristic function `χ(z, c)`, its real roots, the
//!   critical speed and argument-principle zero counting.
//! * [`kernel`]: the Green's function of `y'' - cy' - (1+q)y = 0` and exact
//!   piecewise-linear convolution against it.
//! * [`profile`]: the damped fixed-point solver for the wave profile.
//! * [`asymptotics`]: tail decay fits and oscillation detection.
//! * [`verify`]: sampled hypothesis checks, profile diagnostics and the
//!   uniqueness harness.
//! * [`evolution`]: a method-of-lines time stepper used as an independent
//!   cross-check of the profile solver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// small dense linear algebra reads better with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod chareq;
mod error;
pub mod evolution;
pub mod kernel;
pub mod model;
pub mod profile;
pub mod verify;

pub use error::{Error, Result};
pub use model::{HistorySegment, Measure, Model, ModelSpec, Smoothness};
