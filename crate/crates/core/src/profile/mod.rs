//! Semi-wavefront profiles.
//!
//! A profile `φ` of speed `c` solves `φ'' - cφ' + f(φ̃_t) = 0` with the
//! scaled history `φ̃_t(s) = φ(t + cs)`. Adding `(1+q)φ` to both sides and
//! inverting with the Green's function gives the fixed-point form
//!
//! ```text
//! φ = Aφ,   Aφ(t) = ∫ K(t - s)[(1+q)φ(s) + f(φ̃_s)] ds,
//! ```
//!
//! which is solved on a truncated grid. Left of the grid `φ` follows a
//! decaying eigenfunction of the discretized linear map, refitted every
//! sweep (see the `tail` module); right of it `φ` is frozen at its last
//! value.
//!
//! The sweep is a damped iteration of the pinned map `φ ↦ pin(Aφ)`,
//! accelerated by Anderson mixing, where `pin` translates so that the first
//! upward crossing of `κ/2` sits on the grid node `t = 0`. The grid is the
//! same for every initial guess, so distinct guesses converge to the same
//! discrete solution.

use serde::{Deserialize, Serialize};

use crate::chareq;
use crate::error::{Error, Result};
use crate::kernel::{anticausal_pass, causal_pass, GreenKernel, Grid, LeftTail};
use crate::model::Model;

mod tail;

use tail::{split_offset, Dispersion, Modes, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Left end of the grid; `None` means `-40/λ₁`.
    pub t_minus: Option<f64>,
    pub t_plus: f64,
    pub dt: f64,
    /// Mixing weight `ω` of the damped update.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Anderson history length; 0 gives the plain damped iteration.
    pub anderson_depth: usize,
    /// Upper clamp; `None` means `4κ`.
    pub sup_bound: Option<f64>,
    pub floor: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            t_minus: None,
            t_plus: 40.0,
            dt: 0.02,
            damping: 0.5,
            tol: 1e-9,
            max_iter: 20_000,
            anderson_depth: 8,
            sup_bound: None,
            floor: 1e-300,
        }
    }
}

impl ProfileOptions {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.dt > 0.0) {
            return bad("grid step must be positive");
        }
        if !(self.t_plus > 0.0) {
            return bad("T+ must be positive");
        }
        if let Some(t) = self.t_minus {
            if !(t < 0.0) {
                return bad("T- must be negative");
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.floor > 0.0) {
            return bad("floor must be positive");
        }
        Ok(())
    }
}

/// A computed profile with its grid, extensions and convergence record.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub model: Model,
    pub c: f64,
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// `sup |Aφ - φ|` over the grid.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Form of `φ` left of the grid.
    pub tail: LeftTail,
    /// Constant value of `φ` right of the grid.
    pub right: f64,
    pub lambda1: f64,
    pub critical: bool,
    pub tol: f64,
    pub residual_history: Vec<f64>,
    /// Number of node values pulled back into `[floor, sup_bound]`.
    pub clamped: usize,
    pub sup_bound: f64,
    pub warnings: Vec<String>,
    spec: TailSpec,
}

/// Serializable digest of a [`ProfileSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub model: String,
    pub c: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub dt: f64,
    pub nodes: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    pub lambda1: f64,
    pub critical: bool,
    pub tail: LeftTail,
    pub right: f64,
    pub clamped: usize,
    pub sup_bound: f64,
    pub bound_active: bool,
    pub sup_phi: f64,
    pub warnings: Vec<String>,
}

impl ProfileSolution {
    /// A profile given by samples, with the residual evaluated and
    /// `converged` set when it is at most `tol`. The derivative is recovered
    /// regardless of the residual.
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        model: &Model,
        c: f64,
        grid: Grid,
        phi: Vec<f64>,
        tail: LeftTail,
        right: f64,
        tol: f64,
    ) -> Result<Self> {
        if phi.len() != grid.n {
            return Err(Error::InvalidParameter("sample count does not match grid".into()));
        }
        let spec = TailSpec::Given(tail);
        let op = Operator::new(model, c, grid.dt, Some(Modes::Single(tail.rate())), 0.0)?;
        let ap = op.apply(&phi, &grid, &spec, right);
        let residual = sup_diff(&ap, &phi);
        let dphi = derivative_with(model, c, &grid, &phi, &spec, right);
        let sup_bound = phi.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            model: model.clone(),
            c,
            grid,
            phi,
            dphi,
            residual,
            iterations: 0,
            converged: residual <= tol,
            tail,
            right,
            lambda1: tail.rate(),
            critical: matches!(tail, LeftTail::Critical { .. }),
            tol,
            residual_history: vec![residual],
            clamped: 0,
            sup_bound,
            warnings: Vec::new(),
            spec,
        })
    }

    /// `φ(t)` with the tail and constant extensions outside the grid.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.grid.t_min {
            return self.spec.value(t);
        }
        if t > self.grid.t_max() {
            return self.right;
        }
        interp(&self.phi, &self.grid, t)
    }

    /// Like [`eval`](Self::eval) but cubic Hermite on the grid, using the
    /// recovered derivative.
    pub fn eval_smooth(&self, t: f64) -> f64 {
        let g = &self.grid;
        if t < g.t_min || t > g.t_max() {
            return self.eval(t);
        }
        let x = (t - g.t_min) / g.dt;
        let i = (x.floor() as usize).min(g.n - 2);
        let s = x - i as f64;
        let (p0, p1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.dphi[i] * g.dt, self.dphi[i + 1] * g.dt);
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (3.0 * s2 - 2.0 * s3) * p1 + (s3 - s2) * m1
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes().collect()
    }

    pub fn summary(&self) -> ProfileSummary {
        let sup_phi = self.phi.iter().cloned().fold(0.0, f64::max);
        ProfileSummary {
            model: self.model.name().to_string(),
            c: self.c,
            t_minus: self.grid.t_min,
            t_plus: self.grid.t_max(),
            dt: self.grid.dt,
            nodes: self.grid.n,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            tol: self.tol,
            lambda1: self.lambda1,
            critical: self.critical,
            tail: self.tail,
            right: self.right,
            clamped: self.clamped,
            sup_bound: self.sup_bound,
            bound_active: sup_phi >= self.sup_bound,
            sup_phi,
            warnings: self.warnings.clone(),
        }
    }
}

fn interp(values: &[f64], grid: &Grid, t: f64) -> f64 {
    let x = ((t - grid.t_min) / grid.dt).clamp(0.0, (grid.n - 1) as f64);
    let i = (x.floor() as usize).min(grid.n - 2);
    let th = x - i as f64;
    values[i] * (1.0 - th) + values[i + 1] * th
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluates the reaction along the grid using the scaled history
/// `φ(t_i + c·s_j)`, interpolated between nodes and taken from the tail
/// before the grid.
struct History {
    /// Per probe: whole-node offset and fractional part, `c·s_j/Δ = k + θ`.
    taps: Vec<(isize, f64)>,
}

impl History {
    fn new(model: &Model, c: f64, dt: f64) -> Self {
        Self { taps: model.probes().iter().map(|s| split_offset(c * s / dt)).collect() }
    }

    fn reaction(&self, model: &Model, phi: &[f64], grid: &Grid, tail: &TailSpec, buf: &mut [f64]) -> Vec<f64> {
        let get = |idx: isize| -> f64 {
            if idx >= 0 {
                phi[idx as usize]
            } else {
                tail.value(grid.t_min + idx as f64 * grid.dt)
            }
        };
        (0..grid.n)
            .map(|i| {
                for (b, &(k, th)) in buf.iter_mut().zip(&self.taps) {
                    let j = i as isize + k;
                    *b = if th == 0.0 { get(j) } else { get(j) * (1.0 - th) + get(j + 1) * th };
                }
                model.eval_probes(buf)
            })
            .collect()
    }
}

/// Behaviour of `φ` left of the grid: fitted to the samples, or prescribed
/// in closed form for profiles given by samples.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TailSpec {
    Fitted(Tail),
    Given(LeftTail),
}

impl TailSpec {
    fn value(&self, t: f64) -> f64 {
        match self {
            TailSpec::Fitted(tail) => tail.value(t),
            TailSpec::Given(tail) => tail.value(t),
        }
    }

    fn report(&self) -> LeftTail {
        match self {
            TailSpec::Fitted(tail) => tail.report(),
            TailSpec::Given(tail) => *tail,
        }
    }
}

/// The map `A` for a fixed model, speed and step.
struct Operator {
    model: Model,
    q: f64,
    c: f64,
    kernel: GreenKernel,
    disp: Dispersion,
    modes: Modes,
    history: History,
}

impl Operator {
    fn new(model: &Model, c: f64, dt: f64, modes: Option<Modes>, span: f64) -> Result<Self> {
        let q = model.lin().q();
        let kernel = GreenKernel::new(c, q)?;
        let disp = Dispersion::new(model, c, &kernel, dt);
        let modes = match modes {
            Some(m) => m,
            None => Modes::choose(model, c, &disp, span)?,
        };
        Ok(Self { model: model.clone(), q, c, kernel, disp, modes, history: History::new(model, c, dt) })
    }

    /// Second node used to fit a two-mode tail, about `1/λ` to the right.
    fn tail_node(&self, grid: &Grid) -> usize {
        ((1.0 / self.modes.rate() / grid.dt).round() as usize).clamp(1, grid.n / 4)
    }

    /// Tail through `φ(t_0) = first` and `φ(t_J) = second`.
    fn tail_from(&self, first: f64, second: f64, grid: &Grid) -> Tail {
        let len = grid.t(self.tail_node(grid)) - grid.t_min;
        Tail::fit(self.modes, grid.t_min, first, len, second)
    }

    fn fit_tail(&self, phi: &[f64], grid: &Grid) -> TailSpec {
        TailSpec::Fitted(self.tail_from(phi[0], phi[self.tail_node(grid)], grid))
    }

    /// Closed-form tail of the source `(1+q)φ + f(φ̃)` implied by a given
    /// tail of `φ`: linearized for decaying tails, exact for constants.
    fn source_tail(&self, tail: LeftTail) -> LeftTail {
        let m_at = |rate: f64| {
            let lin = self.model.lin();
            let c = self.c;
            let m0 = 1.0 + lin.atoms().iter().map(|a| a.w * (rate * c * a.s).exp()).sum::<f64>();
            let m1 = lin.atoms().iter().map(|a| a.w * c * a.s * (rate * c * a.s).exp()).sum::<f64>();
            (m0, m1)
        };
        match tail {
            LeftTail::Exponential { amplitude, rate: 0.0 } => LeftTail::Exponential {
                amplitude: (1.0 + self.q) * amplitude + self.model.f_star(amplitude),
                rate: 0.0,
            },
            LeftTail::Exponential { amplitude, rate } => {
                LeftTail::Exponential { amplitude: amplitude * m_at(rate).0, rate }
            }
            LeftTail::Critical { amplitude, shift, rate } => {
                let (m0, m1) = m_at(rate);
                LeftTail::Critical { amplitude: amplitude * m0, shift: shift - m1 / m0, rate }
            }
        }
    }

    fn source(&self, phi: &[f64], grid: &Grid, tail: &TailSpec) -> Vec<f64> {
        let mut buf = vec![0.0; self.model.probes().len()];
        let f = self.history.reaction(&self.model, phi, grid, tail, &mut buf);
        phi.iter().zip(f).map(|(p, fv)| (1.0 + self.q) * p + fv).collect()
    }

    /// Causal integral of the source at the first node.
    fn seed(&self, grid: &Grid, tail: &TailSpec) -> f64 {
        match tail {
            TailSpec::Fitted(t) => t.seed(&self.disp),
            TailSpec::Given(t) => self.source_tail(*t).causal_integral(self.kernel.mu_minus_root, grid.t_min),
        }
    }

    fn apply(&self, phi: &[f64], grid: &Grid, tail: &TailSpec, right: f64) -> Vec<f64> {
        let src = self.source(phi, grid, tail);
        let src_right = (1.0 + self.q) * right + self.model.f_star(right);
        let (mm, mp) = (self.kernel.mu_minus_root, self.kernel.mu_plus_root);
        let causal = causal_pass(&src, grid.dt, mm, self.seed(grid, tail));
        let anticausal = anticausal_pass(&src, grid.dt, mp, src_right / mp);
        causal.iter().zip(&anticausal).map(|(l, r)| self.kernel.norm * (l + r)).collect()
    }
}

/// `φ'(t) = ∫_t^∞ e^{c(t-s)} f(φ̃_s) ds` on the grid, with the reaction
/// frozen at `f*(right)` beyond the grid.
pub fn derivative_of(model: &Model, c: f64, grid: &Grid, phi: &[f64], tail: LeftTail, right: f64) -> Vec<f64> {
    derivative_with(model, c, grid, phi, &TailSpec::Given(tail), right)
}

fn derivative_with(model: &Model, c: f64, grid: &Grid, phi: &[f64], tail: &TailSpec, right: f64) -> Vec<f64> {
    let history = History::new(model, c, grid.dt);
    let mut buf = vec![0.0; model.probes().len()];
    let f = history.reaction(model, phi, grid, tail, &mut buf);
    anticausal_pass(&f, grid.dt, c, model.f_star(right) / c)
}

/// `φ'` of a converged solution.
pub fn recover_derivative(sol: &ProfileSolution) -> Result<Vec<f64>> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    Ok(derivative_with(&sol.model, sol.c, &sol.grid, &sol.phi, &sol.spec, sol.right))
}

/// `sup |Aφ - φ|` over the grid of `sol`.
pub fn residual(sol: &ProfileSolution) -> f64 {
    let modes = match sol.spec {
        TailSpec::Fitted(t) => Some(t.modes),
        TailSpec::Given(_) => Some(Modes::Single(sol.tail.rate())),
    };
    let Ok(op) = Operator::new(&sol.model, sol.c, sol.grid.dt, modes, 0.0) else {
        return f64::INFINITY;
    };
    let spec = match sol.spec {
        TailSpec::Fitted(_) => op.fit_tail(&sol.phi, &sol.grid),
        given => given,
    };
    sup_diff(&op.apply(&sol.phi, &sol.grid, &spec, sol.right), &sol.phi)
}

/// Fractional node index of the first upward crossing of `level`.
fn first_crossing(phi: &[f64], level: f64) -> Option<f64> {
    phi.windows(2).position(|w| w[0] < level && w[1] >= level).map(|i| {
        let (a, b) = (phi[i], phi[i + 1]);
        i as f64 + (level - a) / (b - a)
    })
}

/// Moves samples by `k` whole nodes (`φ_i ← φ_{i+k}`), extending with the
/// tail on the left and the last value on the right.
fn shift_nodes(phi: &[f64], grid: &Grid, tail: &TailSpec, k: isize) -> Vec<f64> {
    let n = phi.len() as isize;
    (0..n)
        .map(|i| {
            let j = i + k;
            if j < 0 {
                tail.value(grid.t_min + j as f64 * grid.dt)
            } else if j >= n {
                phi[(n - 1) as usize]
            } else {
                phi[j as usize]
            }
        })
        .collect()
}

/// `φ_i ← φ(i + s)` for `|s| < 1` by four-point cubic interpolation. The
/// samples are extended geometrically on the left and by the last value
/// on the right.
fn shift_fraction(phi: &[f64], s: f64) -> Vec<f64> {
    if s == 0.0 {
        return phi.to_vec();
    }
    let n = phi.len() as isize;
    let ratio = if phi[0] > 0.0 && phi[1] > 0.0 { phi[0] / phi[1] } else { 1.0 };
    let at = |j: isize| -> f64 {
        if j < 0 {
            phi[0] * ratio.powi((-j) as i32)
        } else if j >= n {
            phi[(n - 1) as usize]
        } else {
            phi[j as usize]
        }
    };
    let (base, u) = if s >= 0.0 { (0, s) } else { (-1, 1.0 + s) };
    // Lagrange weights on nodes -1, 0, 1, 2 at u ∈ [0, 1)
    let w = [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ];
    (0..n)
        .map(|i| {
            let j = i + base;
            w[0] * at(j - 1) + w[1] * at(j) + w[2] * at(j + 1) + w[3] * at(j + 2)
        })
        .collect()
}

/// Sub-node shifts allowed while settling the pin.
const MAX_PIN_ROUNDS: usize = 20;

/// Rate of the decaying tail: `λ₁(c)` when `c ≥ c*`, otherwise the real
/// part of the characteristic minimizer with a warning.
fn tail_rate(m: &Model, c: f64, warnings: &mut Vec<String>) -> Result<(f64, bool)> {
    match chareq::real_roots(m, c)? {
        Some(r) => Ok((r.lambda1, r.critical)),
        None => {
            warnings.push(format!("speed {c} is below the critical speed; a positive profile is not guaranteed"));
            Ok((chareq::real_minimizer(m, c), false))
        }
    }
}

/// Solves from the default guess `min(κ, (κ/2)e^{λ₁t})`.
pub fn solve_profile(m: &Model, c: f64, opts: &ProfileOptions) -> Result<ProfileSolution> {
    let mut warnings = Vec::new();
    let (lam, _) = tail_rate(m, c, &mut warnings)?;
    let kappa = m.kappa();
    solve_profile_from(m, c, opts, move |t| kappa.min(0.5 * kappa * (lam * t).exp()))
}

/// Solves from an arbitrary positive initial guess.
pub fn solve_profile_from(
    m: &Model,
    c: f64,
    opts: &ProfileOptions,
    guess: impl Fn(f64) -> f64,
) -> Result<ProfileSolution> {
    opts.validate()?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("speed must be positive, got {c}")));
    }
    let mut warnings = Vec::new();
    let (lam, critical) = tail_rate(m, c, &mut warnings)?;
    let kappa = m.kappa();
    let t_minus = opts.t_minus.unwrap_or(-40.0 / lam);
    let grid = Grid::spanning(t_minus, opts.t_plus, opts.dt)?;
    let sup_bound = opts.sup_bound.unwrap_or(4.0 * kappa);
    let i0 = (-grid.t_min / grid.dt).round();
    let op = Operator::new(m, c, grid.dt, None, -grid.t_min)?;

    let clamp = |v: &mut [f64], count: &mut usize| {
        for x in v.iter_mut() {
            if !(*x >= opts.floor) {
                *x = opts.floor;
                *count += 1;
            } else if *x > sup_bound {
                *x = sup_bound;
                *count += 1;
            }
        }
    };

    let mut clamped = 0;
    let mut phi: Vec<f64> = grid.nodes().map(&guess).collect();
    clamp(&mut phi, &mut clamped);
    // whole-node shift bringing the κ/2 crossing within one node of t = 0
    let repin = |phi: &mut Vec<f64>| -> bool {
        if let Some(x) = first_crossing(phi, 0.5 * kappa) {
            let k = (x - i0).round() as isize;
            if k != 0 && (x - i0).abs() >= 1.0 {
                let tail = op.fit_tail(phi, &grid);
                *phi = shift_nodes(phi, &grid, &tail, k);
                return true;
            }
        }
        false
    };
    repin(&mut phi);

    // relative weights so that the deep tail is resolved in relative terms
    let weight: Vec<f64> = grid.nodes().map(|t| (lam * t).exp().min(1.0)).collect();
    let mut mixer = Anderson::new(opts.anderson_depth, opts.damping);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut best = (f64::INFINITY, phi.clone());
    let mut pin_rounds = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let tail = op.fit_tail(&phi, &grid);
        let right = *phi.last().unwrap();
        let ap = op.apply(&phi, &grid, &tail, right);
        let r: Vec<f64> = ap.iter().zip(&phi).map(|(a, p)| a - p).collect();
        let rw: Vec<f64> = r.iter().zip(&weight).map(|(x, w)| x / w).collect();
        let res_w = rw.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        history.push(r.iter().fold(0.0, |m: f64, x| m.max(x.abs())));
        if !res_w.is_finite() {
            break;
        }
        if res_w <= opts.tol {
            // Converged up to translation. Move the crossing onto t = 0 by a
            // sub-node shift and re-converge, until the offset is below tol.
            let d = first_crossing(&phi, 0.5 * kappa).map_or(0.0, |x| x - i0);
            let slope = phi.windows(2).fold(0.0, |m: f64, w| m.max((w[1] - w[0]).abs()));
            if d.abs() * slope <= opts.tol || pin_rounds >= MAX_PIN_ROUNDS {
                converged = true;
                break;
            }
            pin_rounds += 1;
            let k = d.trunc() as isize;
            if k != 0 {
                phi = shift_nodes(&phi, &grid, &tail, k);
            }
            phi = shift_fraction(&phi, d - k as f64);
            mixer.reset();
            best = (f64::INFINITY, phi.clone());
            continue;
        }
        if res_w < best.0 {
            best = (res_w, phi.clone());
        } else if res_w > 1e3 * best.0 {
            // divergence of the mixed sequence: restart from the best iterate
            phi = best.1.clone();
            mixer.reset();
            continue;
        }
        phi = mixer.next(&phi, &r, &rw);
        clamp(&mut phi, &mut clamped);
        if repin(&mut phi) {
            mixer.reset();
        }
    }

    if !converged {
        warnings.push(format!("no convergence after {iterations} sweeps"));
    }
    if first_crossing(&phi, 0.5 * kappa).is_none() {
        warnings.push("profile never reaches κ/2; pinning skipped".into());
    } else if converged && pin_rounds >= MAX_PIN_ROUNDS {
        warnings.push(format!("κ/2 crossing not settled on t = 0 after {MAX_PIN_ROUNDS} shifts"));
    }
    let tail = op.fit_tail(&phi, &grid);
    let right = *phi.last().unwrap();
    let residual = sup_diff(&op.apply(&phi, &grid, &tail, right), &phi);
    if phi[0] >= 0.01 * kappa {
        warnings.push(format!("left truncation too shallow: φ(T-) = {:e}", phi[0]));
    }
    let dphi = derivative_with(m, c, &grid, &phi, &tail, right);
    Ok(ProfileSolution {
        model: m.clone(),
        c,
        grid,
        phi,
        dphi,
        residual,
        iterations,
        converged,
        tail: tail.report(),
        right,
        lambda1: lam,
        critical,
        tol: opts.tol,
        residual_history: history,
        clamped,
        sup_bound,
        warnings,
        spec: tail,
    })
}

/// Anderson mixing on top of the damped update `x + βr`.
struct Anderson {
    depth: usize,
    beta: f64,
    prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Columns `(Δx, Δr, Δr_weighted)`.
    cols: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize, beta: f64) -> Self {
        Self { depth, beta, prev: None, cols: Vec::new() }
    }

    fn reset(&mut self) {
        self.prev = None;
        self.cols.clear();
    }

    fn next(&mut self, x: &[f64], r: &[f64], rw: &[f64]) -> Vec<f64> {
        let beta = self.beta;
        if self.depth == 0 {
            return x.iter().zip(r).map(|(a, b)| a + beta * b).collect();
        }
        if let Some((px, pr, prw)) = self.prev.take() {
            let dx = x.iter().zip(&px).map(|(a, b)| a - b).collect();
            let dr = r.iter().zip(&pr).map(|(a, b)| a - b).collect();
            let drw = rw.iter().zip(&prw).map(|(a, b)| a - b).collect();
            if self.cols.len() == self.depth {
                self.cols.remove(0);
            }
            self.cols.push((dx, dr, drw));
        }
        self.prev = Some((x.to_vec(), r.to_vec(), rw.to_vec()));

        let mut out: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + beta * b).collect();
        let m = self.cols.len();
        if m == 0 {
            return out;
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gram = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for a in 0..m {
            for b in 0..=a {
                let v = dot(&self.cols[a].2, &self.cols[b].2);
                gram[a][b] = v;
                gram[b][a] = v;
            }
            rhs[a] = dot(&self.cols[a].2, rw);
        }
        let scale = (0..m).map(|a| gram[a][a]).fold(0.0, f64::max);
        for (a, row) in gram.iter_mut().enumerate() {
            row[a] += 1e-12 * scale + f64::MIN_POSITIVE;
        }
        let Some(gamma) = solve_dense(gram, rhs) else {
            self.cols.clear();
            return out;
        };
        for (g, (dx, dr, _)) in gamma.iter().zip(&self.cols) {
            for i in 0..out.len() {
                out[i] -= g * (dx[i] + beta * dr[i]);
            }
        }
        out
    }
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
