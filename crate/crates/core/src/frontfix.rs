//! Time integration of the free boundary problem in front-fixed coordinates.
//!
//! With `y = x / h(t)` and `w(t, y) = u(t, x)` the moving domain `[0, h(t)]`
//! becomes `[0, 1]` and the density obeys
//!
//! ```text
//! w_t = (d / h^2) w_yy + (y h' / h) w_y + w (m(h y) - w)
//! alpha w - (beta / h) w_y = 0 at y = 0,   w = 0 at y = 1,
//! h' = -(mu / h) w_y(t, 1).
//! ```
//!
//! Each step treats diffusion and advection implicitly (one tridiagonal
//! solve) and the logistic reaction explicitly. The front and the density are
//! coupled by a Heun predictor-corrector on `(h, h')`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::numerics::{solve_tridiagonal, trapezoid, MonotoneCubic};

/// Smallest supported interior resolution.
pub const MIN_RESOLUTION: usize = 32;
/// Relative slack on the a priori bounds `w <= M` and `h' <= mu M`.
pub const BOUND_SLACK: f64 = 1e-8;

/// Snapshot of the front-fixed solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontFixedState {
    pub t: f64,
    pub h: f64,
    pub hprime: f64,
    /// `w(t, y_j)` on `N + 1` uniform nodes over `[0, 1]`, with `w[N] = 0`.
    pub w: Vec<f64>,
}

impl FrontFixedState {
    pub fn resolution(&self) -> usize {
        self.w.len() - 1
    }

    pub fn max_w(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }

    /// `int_0^h u dx`.
    pub fn mass(&self) -> f64 {
        self.h * trapezoid(&self.w, 1.0 / self.resolution() as f64)
    }

    /// Physical abscissae `x_j = h y_j`.
    pub fn x_nodes(&self) -> Vec<f64> {
        let n = self.resolution();
        (0..=n).map(|j| self.h * j as f64 / n as f64).collect()
    }

    /// `u(t, x)` by linear interpolation in `y`; zero beyond the front.
    pub fn density_at(&self, x: f64) -> f64 {
        if x >= self.h {
            return 0.0;
        }
        crate::numerics::linear_uniform(&self.w, 1.0, x / self.h)
    }
}

/// Front speed from the Stefan law with the second-order one-sided
/// difference at `y = 1` (where `w = 0`).
pub fn front_speed(w: &[f64], h: f64, mu: f64) -> f64 {
    let n = w.len() - 1;
    let dy = 1.0 / n as f64;
    mu / h * (4.0 * w[n - 1] - w[n - 2]) / (2.0 * dy)
}

/// Map the initial data onto the front-fixed grid with `n` intervals.
pub fn transform_initial(spec: &ProblemSpec, n: usize) -> Result<FrontFixedState> {
    if n < MIN_RESOLUTION {
        return Err(Error::InvalidParameter(format!("resolution N must be at least {MIN_RESOLUTION} (got {n})")));
    }
    spec.ensure_valid()?;
    let u0 = spec.u0();
    let interp = MonotoneCubic::new(u0.h0, &u0.samples);
    let mut w: Vec<f64> = (0..=n).map(|j| interp.eval(u0.h0 * j as f64 / n as f64)).collect();
    w[n] = 0.0;
    if spec.boundary().is_dirichlet() {
        w[0] = 0.0;
    }
    let hprime = front_speed(&w, u0.h0, spec.mu());
    if !(hprime > 0.0) {
        return Err(Error::Precondition(format!("initial front speed must be positive (got {hprime})")));
    }
    Ok(FrontFixedState { t: 0.0, h: u0.h0, hprime, w })
}

/// Front-speed ceiling `mu M~` from a gradient barrier at the front:
/// `M~ = 2 M max(sqrt(sup m / (2 d)), 4 |u0'|_inf / (3 M), 1 / h0)` with
/// `M = max(max u0, sup m)`. Unlike `mu M`, this bound accounts for steep
/// initial data.
pub fn speed_ceiling(spec: &ProblemSpec) -> f64 {
    let bound = spec.density_bound();
    let u0 = spec.u0();
    let dx = u0.dx();
    let slope = u0.samples.windows(2).map(|p| ((p[1] - p[0]) / dx).abs()).fold(0.0, f64::max);
    let k = (spec.m().sup_bound().max(0.0) / (2.0 * spec.d()))
        .sqrt()
        .max(4.0 * slope / (3.0 * bound))
        .max(1.0 / u0.h0);
    spec.mu() * 2.0 * bound * k
}

/// Largest step the scheme accepts from `state`: the reaction bound keeping the
/// explicit logistic update monotone and positive, and a front limiter that
/// keeps the relative front motion per step at most 5%.
pub fn dt_max(state: &FrontFixedState, spec: &ProblemSpec) -> f64 {
    let m = spec.m();
    let bound = spec.density_bound();
    let reaction = 0.5 / (m.sup_bound().abs() + m.inf_bound().abs() + 2.0 * bound);
    let front = if state.hprime > 0.0 { 0.05 * state.h / state.hprime } else { f64::INFINITY };
    reaction.min(front)
}

/// One implicit solve of `(I - dt L) w_new = w + dt w (m(h y) - w)` with the
/// coefficients frozen at `(h, hprime)`.
fn implicit_update(w: &[f64], spec: &ProblemSpec, h: f64, hprime: f64, dt: f64) -> Option<Vec<f64>> {
    let n = w.len() - 1;
    let dy = 1.0 / n as f64;
    let diff = spec.d() / (h * h);
    let c = dt * diff / (dy * dy);
    let boundary = spec.boundary();
    let first = usize::from(boundary.is_dirichlet());
    let size = n - first;
    let mut lower = vec![0.0; size.saturating_sub(1)];
    let mut diag = vec![0.0; size];
    let mut upper = vec![0.0; size.saturating_sub(1)];
    let mut rhs = vec![0.0; size];
    for k in 0..size {
        let j = first + k;
        let y = j as f64 * dy;
        let m = spec.m().eval(h * y);
        rhs[k] = w[j] * (1.0 + dt * (m - w[j]));
        if j == 0 {
            // Ghost node from the Robin relation; advection vanishes at y = 0.
            diag[k] = 1.0 + c * (2.0 + 2.0 * dy * h * boundary.robin_ratio());
            if k + 1 < size {
                upper[k] = -2.0 * c;
            }
            continue;
        }
        let xi = y * hprime / h;
        let peclet = xi * dy / (2.0 * diff);
        let (lo, di, up) = if peclet <= 1.0 {
            let a = dt * xi / (2.0 * dy);
            (-(c - a), 1.0 + 2.0 * c, -(c + a))
        } else {
            let a = dt * xi / dy;
            (-c, 1.0 + 2.0 * c + a, -(c + a))
        };
        diag[k] = di;
        if k > 0 {
            lower[k - 1] = lo;
        }
        if k + 1 < size {
            upper[k] = up;
        }
    }
    let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut out = vec![0.0; n + 1];
    out[first..n].copy_from_slice(&sol);
    Some(out)
}

fn check_positive(w: &[f64], t: f64) -> Result<()> {
    let n = w.len() - 1;
    if let Some((j, v)) = w[1..n].iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::StepRejected { t, reason: format!("w = {v:e} at interior node {}", j + 1) });
    }
    Ok(())
}

/// Advance `state` by `dt` with the predictor-corrector IMEX step.
pub fn step(state: &FrontFixedState, spec: &ProblemSpec, dt: f64) -> Result<FrontFixedState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {dt})")));
    }
    let t_new = state.t + dt;
    let reject = |reason: String| Error::StepRejected { t: t_new, reason };
    let predicted = implicit_update(&state.w, spec, state.h, state.hprime, dt).ok_or_else(|| reject("singular predictor system".into()))?;
    check_positive(&predicted, t_new)?;
    let h_pred = state.h + dt * state.hprime;
    let hp_pred = front_speed(&predicted, h_pred, spec.mu());
    if !(hp_pred > 0.0) {
        return Err(reject(format!("predicted front speed {hp_pred:e}")));
    }
    let h_mid = 0.5 * (state.h + h_pred);
    let hp_mid = 0.5 * (state.hprime + hp_pred);
    let w = implicit_update(&state.w, spec, h_mid, hp_mid, dt).ok_or_else(|| reject("singular corrector system".into()))?;
    check_positive(&w, t_new)?;
    let h = state.h + dt * hp_mid;
    let hprime = front_speed(&w, h, spec.mu());
    if !(hprime > 0.0) {
        return Err(reject(format!("front speed {hprime:e}")));
    }
    Ok(FrontFixedState { t: t_new, h, hprime, w })
}

/// Boundary flux `u_x(t, 0)` seen by the mass balance.
fn flux_at_origin(state: &FrontFixedState, spec: &ProblemSpec) -> f64 {
    let b = spec.boundary();
    if b.is_neumann() {
        0.0
    } else if b.is_dirichlet() {
        let dy = 1.0 / state.resolution() as f64;
        crate::model::forward_difference(&state.w, dy) / state.h
    } else {
        b.robin_ratio() * state.w[0]
    }
}

/// `int_0^h u (m - u) dx`.
fn reaction_integral(state: &FrontFixedState, spec: &ProblemSpec) -> f64 {
    let n = state.resolution();
    let dy = 1.0 / n as f64;
    let f: Vec<f64> = state
        .w
        .iter()
        .enumerate()
        .map(|(j, &w)| w * (spec.m().eval(state.h * j as f64 * dy) - w))
        .collect();
    state.h * trapezoid(&f, dy)
}

/// Discrete residual of `d/dt mass + (d/mu) h' + d u_x(0) - int u (m - u)`
/// across one accepted step (trapezoid in time).
pub fn mass_balance_residual(before: &FrontFixedState, after: &FrontFixedState, spec: &ProblemSpec) -> f64 {
    let dt = after.t - before.t;
    let d = spec.d();
    let avg = |f: &dyn Fn(&FrontFixedState) -> f64| 0.5 * (f(before) + f(after));
    let rate = (after.mass() - before.mass()) / dt;
    let front = avg(&|s| d / spec.mu() * s.hprime);
    let origin = avg(&|s| d * flux_at_origin(s, spec));
    let reaction = avg(&|s| reaction_integral(s, spec));
    (rate + front + origin - reaction).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    /// Interior resolution `N` of the `y`-grid.
    pub n: usize,
    /// Upper limit on the step size.
    pub dt_max: f64,
    /// Halvings attempted after a rejected step.
    pub max_retries: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { n: 200, dt_max: 1e-2, max_retries: 30 }
    }
}

/// Running diagnostics over every accepted step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub rejections: usize,
    /// `max_t max_y w / M`.
    pub max_density_ratio: f64,
    /// `max_t h' / (mu M)`.
    pub max_speed_ratio: f64,
    /// `min_t min_interior w`.
    pub min_interior_w: f64,
    /// Smallest front increment `h_{n+1} - h_n` over accepted steps. May be
    /// exactly zero once `h' dt` drops below the spacing of floats near `h`.
    pub min_front_increment: f64,
    /// `min_t h'`; strict front growth means this stays positive.
    pub min_hprime: f64,
}

impl RunStats {
    /// Do all accepted steps respect `0 < w <= M(1 + slack)`,
    /// `0 < h' <= mu M (1 + slack)` and front growth?
    pub fn bounds_hold(&self) -> bool {
        self.density_bound_holds() && self.max_speed_ratio <= 1.0 + BOUND_SLACK
    }

    /// `0 < w <= M(1 + slack)`, `h' > 0` and `h` non-decreasing, without the
    /// speed ceiling.
    pub fn density_bound_holds(&self) -> bool {
        self.max_density_ratio <= 1.0 + BOUND_SLACK
            && self.min_interior_w > 0.0
            && self.min_hprime > 0.0
            && self.min_front_increment >= 0.0
    }
}

/// Adaptive driver around [`step`] that owns the current state.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    spec: &'a ProblemSpec,
    opts: IntegratorOptions,
    state: FrontFixedState,
    bound: f64,
    stats: RunStats,
    last_residual: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(spec: &'a ProblemSpec, opts: IntegratorOptions) -> Result<Self> {
        if !(opts.dt_max > 0.0) {
            return Err(Error::InvalidParameter(format!("dt_max must be positive (got {})", opts.dt_max)));
        }
        let state = transform_initial(spec, opts.n)?;
        let bound = spec.density_bound();
        let n = state.resolution();
        let stats = RunStats {
            steps: 0,
            rejections: 0,
            max_density_ratio: state.max_w() / bound,
            max_speed_ratio: state.hprime / (spec.mu() * bound),
            min_interior_w: state.w[1..n].iter().copied().fold(f64::INFINITY, f64::min),
            min_front_increment: f64::INFINITY,
            min_hprime: state.hprime,
        };
        Ok(Self { spec, opts, state, bound, stats, last_residual: 0.0 })
    }

    pub fn state(&self) -> &FrontFixedState {
        &self.state
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    /// `M = max(max u0, sup m)`.
    pub fn density_bound(&self) -> f64 {
        self.bound
    }

    /// Mass-balance residual of the most recent accepted step.
    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    fn accept(&mut self, next: FrontFixedState) -> Result<()> {
        let n = next.resolution();
        let max_w = next.max_w();
        if max_w > 2.0 * self.bound {
            return Err(Error::BlowUp { t: next.t, max_w, limit: 2.0 * self.bound });
        }
        let s = &mut self.stats;
        s.steps += 1;
        s.max_density_ratio = s.max_density_ratio.max(max_w / self.bound);
        s.max_speed_ratio = s.max_speed_ratio.max(next.hprime / (self.spec.mu() * self.bound));
        s.min_interior_w = next.w[1..n].iter().copied().fold(s.min_interior_w, f64::min);
        s.min_front_increment = s.min_front_increment.min(next.h - self.state.h);
        s.min_hprime = s.min_hprime.min(next.hprime);
        self.last_residual = mass_balance_residual(&self.state, &next, self.spec);
        self.state = next;
        Ok(())
    }

    /// Take adaptive steps until `t == t_target` exactly.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.state.t < t_target {
            let remaining = t_target - self.state.t;
            let mut dt = self.opts.dt_max.min(dt_max(&self.state, self.spec));
            if dt >= remaining || remaining - dt < 1e-9 * dt {
                dt = remaining;
            }
            let mut retries = 0;
            let next = loop {
                match step(&self.state, self.spec, dt) {
                    Ok(next) => break next,
                    Err(Error::StepRejected { .. }) if retries < self.opts.max_retries => {
                        retries += 1;
                        self.stats.rejections += 1;
                        dt *= 0.5;
                    }
                    Err(e) => return Err(e),
                }
            };
            let landing = dt == remaining;
            self.accept(next)?;
            if landing {
                self.state.t = t_target;
            }
        }
        Ok(())
    }

    pub fn sample(&self) -> TrajectorySample {
        TrajectorySample {
            t: self.state.t,
            h: self.state.h,
            hprime: self.state.hprime,
            max_u: self.state.max_w(),
            mass: self.state.mass(),
            mass_residual: self.last_residual,
        }
    }
}

/// Observables recorded at one output time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub h: f64,
    pub hprime: f64,
    pub max_u: f64,
    pub mass: f64,
    pub mass_residual: f64,
}

/// When to record samples and full profile snapshots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSchedule {
    pub sample_interval: f64,
    pub snapshot_times: Vec<f64>,
}

impl OutputSchedule {
    pub fn every(sample_interval: f64) -> Self {
        Self { sample_interval, snapshot_times: Vec::new() }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<FrontFixedState>,
    pub stats: RunStats,
    pub density_bound: f64,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Integrate to `t_end`, recording samples every `schedule.sample_interval`
/// and profile snapshots at the requested times.
pub fn simulate(spec: &ProblemSpec, t_end: f64, opts: IntegratorOptions, schedule: &OutputSchedule) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be finite and non-negative (got {t_end})")));
    }
    if !(schedule.sample_interval > 0.0) {
        return Err(Error::InvalidParameter("sample interval must be positive".into()));
    }
    let mut integrator = Integrator::new(spec, opts)?;
    let mut stops: Vec<(f64, bool)> = Vec::new();
    let count = (t_end / schedule.sample_interval).round() as usize;
    for i in 1..=count {
        stops.push(((i as f64 * schedule.sample_interval).min(t_end), false));
    }
    if stops.last().is_none_or(|s| s.0 < t_end) && t_end > 0.0 {
        stops.push((t_end, false));
    }
    for &ts in &schedule.snapshot_times {
        if ts > 0.0 && ts <= t_end {
            stops.push((ts, true));
        }
    }
    stops.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut samples = vec![integrator.sample()];
    let mut snapshots = Vec::new();
    if schedule.snapshot_times.contains(&0.0) {
        snapshots.push(integrator.state().clone());
    }
    for (ts, is_snapshot) in stops {
        integrator.advance_to(ts)?;
        if is_snapshot {
            if snapshots.last().is_none_or(|s: &FrontFixedState| s.t < ts) {
                snapshots.push(integrator.state().clone());
            }
        } else if samples.last().is_none_or(|s| s.t < ts) {
            samples.push(integrator.sample());
        }
    }
    Ok(Trajectory { samples, snapshots, stats: integrator.stats().clone(), density_bound: integrator.density_bound() })
}
