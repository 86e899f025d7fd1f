//! Method-of-lines time stepper for `u_t = u_xx + f(u_t(·, x))` on a
//! truncated interval, used as an independent cross-check of the profile
//! solver.
//!
//! The PDE history at a node is `u(t + s, x)`, `s ∈ [-h, 0]`, while the
//! profile equation sees `φ(t + cs)`. A traveling wave `u = φ(x + ct)`
//! links the two, so the moving profile is compared with `φ` in the
//! variable `ξ = x + ct`, up to a shift fixed by the `κ/2` level set.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::profile::ProfileSolution;

/// Explicit Euler is stable for `dt ≤ Δx²/2`.
pub const CFL_LIMIT: f64 = 0.5;
/// Default explicit step as a fraction of `Δx²`.
pub const DEFAULT_CFL: f64 = 0.4;
/// Minimum distance between the front and either boundary.
pub const BOUNDARY_MARGIN: f64 = 10.0;
/// Nodes per parallel chunk. Each node is updated from the same inputs
/// whatever the split, so results do not depend on it.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Forward Euler for diffusion and reaction.
    Explicit,
    /// Backward Euler diffusion with explicit reaction.
    Implicit,
}

/// Initial data on `x`, held constant in time over `[-h, 0]` unless
/// `history_speed` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `κ e^{rate·(x - at)} / (1 + e^{rate·(x - at)})`: left tail `κe^{rate·x}`
    /// up to a constant.
    Tail { rate: f64, at: f64 },
    /// `κ` for `x ≥ at`, `0` to the left.
    Step { at: f64 },
}

impl InitialData {
    pub fn value(&self, x: f64, kappa: f64) -> f64 {
        match *self {
            InitialData::Tail { rate, at } => {
                let z = rate * (x - at);
                // stable logistic for either sign of z
                if z < 0.0 {
                    let e = z.exp();
                    kappa * e / (1.0 + e)
                } else {
                    kappa / (1.0 + (-z).exp())
                }
            }
            InitialData::Step { at } => {
                if x >= at {
                    kappa
                } else {
                    0.0
                }
            }
        }
    }

    fn position(&self) -> f64 {
        match *self {
            InitialData::Tail { at, .. } | InitialData::Step { at } => at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionOptions {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    /// Time step; `None` means `0.4·Δx²` for either scheme.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub initial: InitialData,
    /// When set, the history before `t = 0` is `u₀(x + v·s)`, a front
    /// already moving at speed `v`.
    pub history_speed: Option<f64>,
    /// Time between recorded front positions.
    pub record_every: f64,
    pub parallel: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            x_min: -160.0,
            x_max: 40.0,
            dx: 0.1,
            dt: None,
            t_end: 30.0,
            scheme: Scheme::Explicit,
            initial: InitialData::Tail { rate: 0.5, at: 0.0 },
            history_speed: None,
            record_every: 0.1,
            parallel: false,
        }
    }
}

impl EvolutionOptions {
    pub fn nodes(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round() as usize + 1
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(DEFAULT_CFL * self.dx * self.dx)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.dx > 0.0) || !(self.x_max > self.x_min) {
            return bad(format!("bad grid [{}, {}] with dx = {}", self.x_min, self.x_max, self.dx));
        }
        if self.nodes() < 3 {
            return bad("grid needs at least three nodes".into());
        }
        if !(self.t_end > 0.0) || !(self.record_every > 0.0) {
            return bad("t_end and record_every must be positive".into());
        }
        let dt = self.time_step();
        if !(dt > 0.0) {
            return bad(format!("time step {dt} must be positive"));
        }
        if self.scheme == Scheme::Explicit && dt > CFL_LIMIT * self.dx * self.dx {
            return bad(format!("explicit step {dt} exceeds the stability limit {}", CFL_LIMIT * self.dx * self.dx));
        }
        let at = self.initial.position();
        if at - self.x_min < BOUNDARY_MARGIN || self.x_max - at < BOUNDARY_MARGIN {
            return bad(format!("initial front at {at} is closer than {BOUNDARY_MARGIN} to a boundary"));
        }
        Ok(())
    }
}

/// Space-time state: the current field and the snapshots covering the
/// delay horizon. Boundary nodes hold `0` on the left and `κ` on the
/// right.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub x_min: f64,
    pub dx: f64,
    pub t: f64,
    pub u: Vec<f64>,
    /// `(time, field)` pairs, oldest first, spanning at least `[t - h, t]`.
    ring: VecDeque<(f64, Vec<f64>)>,
    model: Model,
    scheme: Scheme,
    parallel: bool,
    /// Nodes clamped to zero so far.
    pub clamped: usize,
}

impl EvolutionState {
    pub fn new(model: &Model, opts: &EvolutionOptions) -> Result<Self> {
        opts.validate()?;
        let n = opts.nodes();
        let kappa = model.kappa();
        let field = |shift: f64| -> Vec<f64> {
            let mut u: Vec<f64> =
                (0..n).map(|i| opts.initial.value(opts.x_min + i as f64 * opts.dx + shift, kappa)).collect();
            u[0] = 0.0;
            u[n - 1] = kappa;
            u
        };
        let dt = opts.time_step();
        let h = model.h();
        let mut ring = VecDeque::new();
        let back = (h / dt).ceil() as usize;
        for k in (1..=back).rev() {
            let s = -(k as f64) * dt;
            ring.push_back((s, field(opts.history_speed.map_or(0.0, |v| v * s))));
        }
        let u = field(0.0);
        ring.push_back((0.0, u.clone()));
        Ok(Self {
            x_min: opts.x_min,
            dx: opts.dx,
            t: 0.0,
            u,
            ring,
            model: model.clone(),
            scheme: opts.scheme,
            parallel: opts.parallel,
            clamped: 0,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Interpolation stencil `(ring index, weight)` pairs for time `t + s`.
    fn stencil(&self, s: f64) -> [(usize, f64); 2] {
        let target = self.t + s;
        let last = self.ring.len() - 1;
        if target >= self.ring[last].0 {
            return [(last, 1.0), (last, 0.0)];
        }
        if target <= self.ring[0].0 {
            return [(0, 1.0), (0, 0.0)];
        }
        // first snapshot strictly after the target
        let j = self.ring.partition_point(|(ts, _)| *ts <= target);
        let (t0, t1) = (self.ring[j - 1].0, self.ring[j].0);
        let w = (target - t0) / (t1 - t0);
        [(j - 1, 1.0 - w), (j, w)]
    }

    /// Reaction at every interior node.
    fn reaction(&self) -> Vec<f64> {
        let stencils: Vec<[(usize, f64); 2]> = self.model.probes().iter().map(|&s| self.stencil(s)).collect();
        let n = self.u.len();
        let node = |i: usize| -> f64 {
            if i == 0 || i == n - 1 {
                return 0.0;
            }
            let mut buf = [0.0; 8];
            let mut vals = Vec::new();
            let probe = |st: &[(usize, f64); 2]| {
                let [(a, wa), (b, wb)] = *st;
                wa * self.ring[a].1[i] + wb * self.ring[b].1[i]
            };
            if stencils.len() <= buf.len() {
                for (b, st) in buf.iter_mut().zip(&stencils) {
                    *b = probe(st);
                }
                self.model.eval_probes(&buf[..stencils.len()])
            } else {
                vals.extend(stencils.iter().map(probe));
                self.model.eval_probes(&vals)
            }
        };
        if self.parallel {
            let mut out = vec![0.0; n];
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                for (k, v) in chunk.iter_mut().enumerate() {
                    *v = node(c * CHUNK + k);
                }
            });
            out
        } else {
            (0..n).map(node).collect()
        }
    }

    /// Advances by `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let r = dt / (self.dx * self.dx);
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
        }
        if self.scheme == Scheme::Explicit && r > CFL_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "explicit step {dt} exceeds the stability limit {}",
                CFL_LIMIT * self.dx * self.dx
            )));
        }
        let f = self.reaction();
        let n = self.u.len();
        let u = &self.u;
        let mut next = match self.scheme {
            Scheme::Explicit => {
                let node = |i: usize| {
                    if i == 0 || i == n - 1 {
                        u[i]
                    } else {
                        u[i] + r * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + dt * f[i]
                    }
                };
                if self.parallel {
                    let mut out = vec![0.0; n];
                    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                        for (k, v) in chunk.iter_mut().enumerate() {
                            *v = node(c * CHUNK + k);
                        }
                    });
                    out
                } else {
                    (0..n).map(node).collect()
                }
            }
            Scheme::Implicit => {
                let rhs: Vec<f64> = (0..n).map(|i| u[i] + dt * f[i]).collect();
                solve_implicit(&rhs, r)
            }
        };
        for v in next.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                self.clamped += 1;
            }
        }
        self.t += dt;
        self.u = next;
        self.ring.push_back((self.t, self.u.clone()));
        let h = self.model.h();
        // keep one snapshot at or before t - h
        while self.ring.len() > 2 && self.ring[1].0 <= self.t - h {
            self.ring.pop_front();
        }
        Ok(())
    }

    /// Leftmost upward crossing of `level`, linearly interpolated.
    pub fn level_position(&self, level: f64) -> Option<f64> {
        let i = self.u.iter().position(|&v| v >= level)?;
        if i == 0 {
            return Some(self.x(0));
        }
        let (a, b) = (self.u[i - 1], self.u[i]);
        Some(self.x(i - 1) + (level - a) / (b - a) * self.dx)
    }
}

/// `(1 + 2r)v_i - r(v_{i-1} + v_{i+1}) = rhs_i` with the boundary values
/// of `rhs` held fixed, by the Thomas algorithm.
fn solve_implicit(rhs: &[f64], r: f64) -> Vec<f64> {
    let n = rhs.len();
    let m = n - 2;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    let (a, b) = (-r, 1.0 + 2.0 * r);
    for k in 0..m {
        let i = k + 1;
        let mut d = rhs[i];
        if i == 1 {
            d += r * rhs[0];
        }
        if i == n - 2 {
            d += r * rhs[n - 1];
        }
        let denom = if k == 0 { b } else { b - a * cp[k - 1] };
        cp[k] = a / denom;
        dp[k] = if k == 0 { d / denom } else { (d - a * dp[k - 1]) / denom };
    }
    let mut out = rhs.to_vec();
    for k in (0..m).rev() {
        out[k + 1] = if k == m - 1 { dp[k] } else { dp[k] - cp[k] * out[k + 2] };
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionRun {
    /// `(t, x)` samples of the `κ/2` level set.
    pub positions: Vec<(f64, f64)>,
    /// Front speed: minus the least-squares slope of the position over the
    /// second half of the run. The front moves toward `-∞`.
    pub speed: f64,
    pub t_end: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub clamped: usize,
    pub steps: usize,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
}

impl EvolutionRun {
    /// Final front position.
    pub fn front(&self) -> Option<f64> {
        self.positions.last().map(|p| p.1)
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    stx / stt
}

/// Runs to `t_end`, recording the `κ/2` front. Stops early with partial
/// data when the front comes within [`BOUNDARY_MARGIN`] of a boundary.
pub fn evolve(model: &Model, opts: &EvolutionOptions) -> Result<EvolutionRun> {
    let mut state = EvolutionState::new(model, opts)?;
    let dt = opts.time_step();
    let level = 0.5 * model.kappa();
    let steps_total = (opts.t_end / dt).round() as usize;
    let record = ((opts.record_every / dt).round() as usize).max(1);
    let mut positions = Vec::new();
    let mut aborted = None;
    let mut steps = 0;
    let push = |state: &EvolutionState, positions: &mut Vec<(f64, f64)>| -> Option<String> {
        match state.level_position(level) {
            Some(x) if x - opts.x_min >= BOUNDARY_MARGIN && opts.x_max - x >= BOUNDARY_MARGIN => {
                positions.push((state.t, x));
                None
            }
            Some(x) => Some(format!("front at x = {x} left the domain interior at t = {}", state.t)),
            None => Some(format!("no κ/2 level set at t = {}", state.t)),
        }
    };
    if let Some(why) = push(&state, &mut positions) {
        aborted = Some(why);
    }
    while aborted.is_none() && steps < steps_total {
        state.step(dt)?;
        steps += 1;
        if !state.u.iter().all(|v| v.is_finite()) {
            aborted = Some(format!("non-finite values at t = {}", state.t));
            break;
        }
        if steps % record == 0 || steps == steps_total {
            aborted = push(&state, &mut positions);
        }
    }
    let half: Vec<(f64, f64)> = positions.iter().copied().filter(|p| p.0 >= 0.5 * state.t).collect();
    let speed = if half.len() >= 2 { -slope(&half) } else { f64::NAN };
    let x = (0..state.u.len()).map(|i| state.x(i)).collect();
    Ok(EvolutionRun { positions, speed, t_end: state.t, x, u: state.u, clamped: state.clamped, steps, aborted })
}

/// Moving-frame comparison of a run's final field with a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameComparison {
    /// `ξ = x - offset` maps the field onto the profile variable.
    pub offset: f64,
    pub sup_error: f64,
    /// Compared range of `ξ`.
    pub window: (f64, f64),
}

/// Sup distance between `u(T, x)` and `φ(x - x_f - τ)`, where `x_f` is the
/// final `κ/2` position and `τ ∈ [-1, 1]` is refined on a grid of `Δx/10`.
/// Compared over `ξ ∈ [window.0, window.1]` intersected with both domains,
/// away from the boundaries.
pub fn compare_with_profile(run: &EvolutionRun, sol: &ProfileSolution, window: (f64, f64)) -> Result<FrameComparison> {
    let front = run.front().ok_or_else(|| Error::Evolution("run recorded no front position".into()))?;
    let dx = run.x[1] - run.x[0];
    let (x_lo, x_hi) = (run.x[0] + BOUNDARY_MARGIN, run.x[run.x.len() - 1] - BOUNDARY_MARGIN);
    let dist = |offset: f64| {
        let lo = window.0.max(sol.grid.t_min).max(x_lo - offset);
        let hi = window.1.min(sol.grid.t_max()).min(x_hi - offset);
        run.x
            .iter()
            .zip(&run.u)
            .filter(|(x, _)| **x - offset >= lo && **x - offset <= hi)
            .map(|(x, u)| (u - sol.eval_smooth(x - offset)).abs())
            .fold(0.0, f64::max)
    };
    let reach = (10.0 / dx).ceil() as i64;
    let best = (-reach..=reach)
        .map(|k| front + k as f64 * dx / 10.0)
        .map(|off| (off, dist(off)))
        .fold((front, f64::INFINITY), |b, cur| if cur.1 < b.1 { cur } else { b });
    let lo = window.0.max(sol.grid.t_min).max(x_lo - best.0);
    let hi = window.1.min(sol.grid.t_max()).min(x_hi - best.0);
    Ok(FrameComparison { offset: best.0, sup_error: best.1, window: (lo, hi) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(initial: InitialData) -> EvolutionOptions {
        EvolutionOptions { x_min: -30.0, x_max: 30.0, dx: 0.2, t_end: 1.0, initial, ..Default::default() }
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let m = Model::kpp(1.0).unwrap();
        let mut opts = small(InitialData::Step { at: -40.0 });
        opts.x_min = -50.0;
        let mut st = EvolutionState::new(&m, &opts).unwrap();
        st.u.iter_mut().for_each(|v| *v = 1.0);
        st.ring.iter_mut().for_each(|(_, f)| f.iter_mut().for_each(|v| *v = 1.0));
        for _ in 0..50 {
            st.step(opts.time_step()).unwrap();
        }
        // interior is exactly κ; the left boundary node is held at 0
        assert!(st.u[2..].iter().all(|&v| v == 1.0));
        let mut zero = EvolutionState::new(&m, &small(InitialData::Step { at: 0.0 })).unwrap();
        zero.u.iter_mut().for_each(|v| *v = 0.0);
        zero.ring.iter_mut().for_each(|(_, f)| f.iter_mut().for_each(|v| *v = 0.0));
        let n = zero.u.len();
        for _ in 0..50 {
            zero.step(opts.time_step()).unwrap();
        }
        assert!(zero.u[..n - 3].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let m = Model::kpp(0.0).unwrap();
        let mut opts = small(InitialData::Step { at: 0.0 });
        opts.dt = Some(0.6 * opts.dx * opts.dx);
        assert!(EvolutionState::new(&m, &opts).is_err());
        opts.scheme = Scheme::Implicit;
        assert!(EvolutionState::new(&m, &opts).is_ok());
        let mut st = EvolutionState::new(&m, &small(InitialData::Step { at: 0.0 })).unwrap();
        assert!(st.step(0.6 * 0.04).is_err());
    }

    #[test]
    fn thomas_solve_matches_the_system() {
        let rhs: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let r = 0.8;
        let v = solve_implicit(&rhs, r);
        assert_eq!(v[0], rhs[0]);
        assert_eq!(v[11], rhs[11]);
        for i in 1..11 {
            let lhs = (1.0 + 2.0 * r) * v[i] - r * (v[i - 1] + v[i + 1]);
            assert!((lhs - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_split_is_bitwise_identical() {
        let m = Model::kpp(0.5).unwrap();
        let mut opts = small(InitialData::Tail { rate: 0.5, at: 0.0 });
        opts.dx = 0.05;
        opts.t_end = 0.2;
        let serial = evolve(&m, &opts).unwrap();
        opts.parallel = true;
        let par = evolve(&m, &opts).unwrap();
        assert!(serial.u.iter().zip(&par.u).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn history_interpolation_is_linear_in_time() {
        let m = Model::kpp(1.0).unwrap();
        let opts = small(InitialData::Step { at: 0.0 });
        let mut st = EvolutionState::new(&m, &opts).unwrap();
        let dt = opts.time_step();
        for _ in 0..10 {
            st.step(dt).unwrap();
        }
        let [(a, wa), (b, wb)] = st.stencil(-2.5 * dt);
        assert_eq!(b, a + 1);
        assert!((wa - 0.5).abs() < 1e-9 && (wb - 0.5).abs() < 1e-9);
        assert!((st.ring[st.ring.len() - 1].0 - st.t).abs() < 1e-15);
        assert!(st.ring[0].0 <= st.t - 1.0 + 1e-12);
    }
}
