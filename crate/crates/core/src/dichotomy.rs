//! Spreading/vanishing classification, the sharp threshold in `mu`, long-time
//! convergence to the half-line equilibrium, and spreading-speed estimates.
//!
//! Spreading is certified as soon as the front passes the critical length: on
//! any longer interval the principal eigenvalue is negative, so the front can
//! no longer stall. Vanishing has no finite-time certificate; it is declared
//! from an evidence triple (small density, stalled front, positive eigenvalue
//! at the current front) held over a unit time window.

use serde::Serialize;

use crate::eigen::{critical_length, principal_eigenvalue, EigenOptions, TOL_SIGN};
use crate::error::{Error, Result};
use crate::frontfix::{
    simulate, FrontFixedState, Integrator, IntegratorOptions, OutputSchedule, Trajectory, TrajectorySample,
};
use crate::model::ProblemSpec;
use crate::numerics::least_squares_slope;
use crate::stationary::{default_schedule, solve_halfline, HalflineOptions, StationarySolution};

/// Vanishing density threshold relative to `M`.
pub const EPS_DENSITY: f64 = 1e-4;
/// Vanishing front-speed threshold relative to `mu M`.
pub const EPS_SPEED: f64 = 1e-6;
/// Duration over which the vanishing evidence must hold.
pub const VANISHING_WINDOW: f64 = 1.0;
/// Default relative tolerance of the `mu*` bisection.
pub const TOL_MU: f64 = 1e-3;
/// Relative tolerance of the critical-length bisection.
const TOL_H_STAR: f64 = 1e-9;
/// How often the classifier inspects the state.
const CHECK_INTERVAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Spreading,
    Vanishing,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Spreading => "spreading",
            Verdict::Vanishing => "vanishing",
            Verdict::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub verdict: Verdict,
    pub t_decided: f64,
    pub h_end: f64,
    pub max_u_end: f64,
    /// Critical length, `None` when it is not attained below the probe limit.
    pub h_star: Option<f64>,
    /// Safety margin added to `h*` for the spreading certificate.
    pub margin: f64,
    /// `lambda1(h_end)` from an explicit eigen-solve at the decision.
    pub lambda_end: Option<f64>,
    /// States inspected by the classifier (every `0.05` time units).
    pub samples: Vec<TrajectorySample>,
}

/// Margin `2 (h* bisection tolerance + h / N)` for the spreading certificate.
pub fn certificate_margin(h_star: f64, h: f64, n: usize) -> f64 {
    2.0 * (TOL_H_STAR * h_star + h / n as f64)
}

fn eigen_options(spec: &ProblemSpec) -> EigenOptions {
    EigenOptions { ell_max: (100.0 * spec.h0()).max(100.0), ..EigenOptions::default() }
}

/// Critical length for the spec, `None` when not attained.
pub fn critical_length_of(spec: &ProblemSpec) -> Result<Option<f64>> {
    match critical_length(spec.d(), spec.m(), spec.boundary(), &eigen_options(spec)) {
        Ok(h) => Ok(Some(h)),
        Err(Error::NotAttained { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn lambda_at(spec: &ProblemSpec, h: f64) -> Result<f64> {
    let opts = eigen_options(spec);
    Ok(principal_eigenvalue(h, spec.d(), spec.m(), spec.boundary(), opts.nodes_for(h))?.lambda1)
}

/// Integrate until the trajectory is certified spreading, shows vanishing
/// evidence, or reaches `t_max`. `n` is the front-fixed grid resolution.
pub fn classify(spec: &ProblemSpec, t_max: f64, n: usize) -> Result<Outcome> {
    let h_star = critical_length_of(spec)?;
    classify_with(spec, t_max, n, h_star)
}

fn classify_with(spec: &ProblemSpec, t_max: f64, n: usize, h_star: Option<f64>) -> Result<Outcome> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameter(format!("t_max must be positive (got {t_max})")));
    }
    let mut integrator = Integrator::new(spec, IntegratorOptions { n, ..IntegratorOptions::default() })?;
    let bound = integrator.density_bound();
    let mut samples = Vec::new();
    let mut quiet_since: Option<f64> = None;
    let finish = |verdict, state: &FrontFixedState, margin, lambda_end, samples| Outcome {
        verdict,
        t_decided: state.t,
        h_end: state.h,
        max_u_end: state.max_w(),
        h_star,
        margin,
        lambda_end,
        samples,
    };
    loop {
        let state = integrator.state();
        samples.push(integrator.sample());
        let margin = h_star.map_or(0.0, |hs| certificate_margin(hs, state.h, n));
        if let Some(hs) = h_star {
            if state.h > hs + margin {
                let lambda = lambda_at(spec, state.h)?;
                log::info!("spreading certified at t = {} (h = {}, h* = {hs})", state.t, state.h);
                return Ok(finish(Verdict::Spreading, state, margin, Some(lambda), samples));
            }
        }
        let quiet = state.max_w() < EPS_DENSITY * bound
            && state.hprime < EPS_SPEED * spec.mu() * bound
            && h_star.is_none_or(|hs| state.h < hs);
        if quiet {
            let since = *quiet_since.get_or_insert(state.t);
            if state.t - since >= VANISHING_WINDOW - 1e-12 {
                let lambda = lambda_at(spec, state.h)?;
                if lambda > TOL_SIGN {
                    log::info!("vanishing evidence at t = {} (h = {}, lambda1 = {lambda:e})", state.t, state.h);
                    return Ok(finish(Verdict::Vanishing, state, margin, Some(lambda), samples));
                }
                quiet_since = None;
            }
        } else {
            quiet_since = None;
        }
        if state.t >= t_max {
            return Ok(finish(Verdict::Undetermined, state, margin, None, samples));
        }
        let next = (state.t + CHECK_INTERVAL).min(t_max);
        integrator.advance_to(next)?;
    }
}

/// Result of the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSearch {
    pub mu_star: f64,
    /// Final bracket: vanishing at `lo`, spreading at `hi`.
    pub lo: f64,
    pub hi: f64,
    /// Horizon in force at the end (possibly doubled along the way).
    pub t_max: f64,
    pub evaluations: Vec<(f64, Verdict)>,
}

/// Classification with `t_max` doubling on undetermined outcomes, up to
/// `cap`. Returns the verdict and the horizon that produced it.
fn classify_patiently(spec: &ProblemSpec, mut t_max: f64, cap: f64, n: usize, h_star: Option<f64>) -> Result<(Outcome, f64)> {
    loop {
        let outcome = classify_with(spec, t_max, n, h_star)?;
        if outcome.verdict != Verdict::Undetermined || 2.0 * t_max > cap {
            return Ok((outcome, t_max));
        }
        t_max *= 2.0;
        log::debug!("mu = {}: undetermined, retrying with t_max = {t_max}", spec.mu());
    }
}

/// Sharp threshold `mu*` by geometric bisection on the classifier verdict.
///
/// `bracket = (mu_lo, mu_hi)` must classify as vanishing and spreading.
/// Undetermined verdicts double `t_max` up to 16x before giving up with
/// [`Error::Ambiguous`].
pub fn find_mu_star(spec: &ProblemSpec, t_max: f64, bracket: (f64, f64), tol_mu: f64, n: usize) -> Result<ThresholdSearch> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < mu_lo < mu_hi (got {lo}, {hi})")));
    }
    if !(tol_mu > 0.0) {
        return Err(Error::InvalidParameter(format!("tol_mu must be positive (got {tol_mu})")));
    }
    spec.ensure_valid()?;
    let h_star = critical_length_of(spec)?;
    let lambda0 = lambda_at(spec, spec.h0())?;
    if lambda0 <= TOL_SIGN {
        return Err(Error::BracketInvalid(format!(
            "lambda1(h0) = {lambda0:e} <= 0: the front spreads for every mu, no threshold exists"
        )));
    }
    let Some(h_star) = h_star else {
        return Err(Error::BracketInvalid("critical length not attained: no spreading is possible".into()));
    };
    let cap = 16.0 * t_max;
    let mut t_max = t_max;
    let mut evaluations = Vec::new();
    let mut run = |mu: f64, t_max: &mut f64| -> Result<Verdict> {
        let (outcome, used) = classify_patiently(&spec.with_mu(mu)?, *t_max, cap, n, Some(h_star))?;
        *t_max = used;
        evaluations.push((mu, outcome.verdict));
        Ok(outcome.verdict)
    };
    let v_lo = run(lo, &mut t_max)?;
    if v_lo != Verdict::Vanishing {
        return Err(Error::BracketInvalid(format!("mu_lo = {lo} classifies as {v_lo}, expected vanishing")));
    }
    let v_hi = run(hi, &mut t_max)?;
    if v_hi != Verdict::Spreading {
        return Err(Error::BracketInvalid(format!("mu_hi = {hi} classifies as {v_hi}, expected spreading")));
    }
    while hi - lo > tol_mu * hi {
        let mid = (lo * hi).sqrt();
        match run(mid, &mut t_max)? {
            Verdict::Spreading => hi = mid,
            Verdict::Vanishing => lo = mid,
            Verdict::Undetermined => return Err(Error::Ambiguous { lo, hi }),
        }
    }
    Ok(ThresholdSearch { mu_star: 0.5 * (lo + hi), lo, hi, t_max, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: f64,
    pub h: f64,
    /// `max |u(t, .) - u_hat|` on the window; `None` if the front had not
    /// yet passed the window.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub window: f64,
    pub checkpoints: Vec<Checkpoint>,
    /// Gaps are non-increasing over the last three evaluated checkpoints.
    pub non_increasing: bool,
    pub reference: StationarySolution,
}

impl ConvergenceReport {
    pub fn last_gap(&self) -> Option<f64> {
        self.checkpoints.iter().rev().find_map(|c| c.gap)
    }
}

/// Compare the simulated density with the half-line equilibrium on `[0, window]`
/// at the given times. Refuses trajectories that have not spread by the last
/// checkpoint.
pub fn convergence_check(spec: &ProblemSpec, checkpoints: &[f64], window: f64, n: usize) -> Result<ConvergenceReport> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints[0] < 0.0 {
        return Err(Error::InvalidParameter("checkpoints must be non-negative and strictly increasing".into()));
    }
    if !(window > 0.0) {
        return Err(Error::InvalidParameter(format!("window must be positive (got {window})")));
    }
    let h_star = critical_length_of(spec)?
        .ok_or_else(|| Error::Precondition("critical length not attained; the solution cannot spread".into()))?;
    let t_end = *checkpoints.last().expect("non-empty");
    let schedule = OutputSchedule::every(t_end.max(1e-3)).with_snapshots(checkpoints.to_vec());
    let trajectory = simulate(spec, t_end, IntegratorOptions { n, ..IntegratorOptions::default() }, &schedule)?;
    let last = trajectory.last();
    if !(last.h > h_star + certificate_margin(h_star, last.h, n)) {
        return Err(Error::Precondition(format!(
            "front h = {} has not passed h* = {h_star}; convergence applies to spreading solutions only",
            last.h
        )));
    }

    let mut truncations = default_schedule(spec.d(), spec.m(), spec.boundary(), 6)?;
    if truncations[0] < 2.0 * window {
        let scale = 2.0 * window / truncations[0];
        truncations.iter_mut().for_each(|l| *l *= scale);
    }
    let opts = HalflineOptions { window: Some(window), ..HalflineOptions::default() };
    let reference = solve_halfline(spec.d(), spec.m(), spec.boundary(), &truncations, &opts)?;
    let dx = reference.dx();
    let window_nodes = (window / dx).floor() as usize;

    let mut report = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        let Some(state) = trajectory.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * t.max(1.0)) else {
            continue;
        };
        let gap = if state.h < window {
            log::info!("checkpoint t = {t} skipped: front h = {} inside the window", state.h);
            None
        } else {
            Some(
                (0..=window_nodes)
                    .map(|i| (state.density_at(i as f64 * dx) - reference.values[i]).abs())
                    .fold(0.0, f64::max),
            )
        };
        report.push(Checkpoint { t, h: state.h, gap });
    }
    let gaps: Vec<f64> = report.iter().filter_map(|c| c.gap).collect();
    let tail = &gaps[gaps.len().saturating_sub(3)..];
    let non_increasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport { window, checkpoints: report, non_increasing, reference })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    /// Least-squares slope of `h(t)` over the trailing fit window.
    pub slope: f64,
    /// The same over the trailing half of that window (drift diagnostic).
    pub slope_quarter: f64,
    pub t_from: f64,
    pub t_to: f64,
    /// `[k_low - delta, k_high + delta]` when bounds were supplied.
    pub band: Option<(f64, f64)>,
    pub in_band: Option<bool>,
}

fn trailing(samples: &[TrajectorySample], fraction: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_end = samples.last().map_or(0.0, |s| s.t);
    let t_from = t_end * (1.0 - fraction);
    let (t, h): (Vec<f64>, Vec<f64>) = samples.iter().filter(|s| s.t >= t_from).map(|s| (s.t, s.h)).unzip();
    if t.len() < 3 || t[t.len() - 1] <= t[0] {
        return Err(Error::WindowTooShort(format!(
            "{} samples in the trailing {:.0}% of [0, {t_end}]",
            t.len(),
            100.0 * fraction
        )));
    }
    Ok((t, h))
}

/// Fit the front speed over the trailing `fraction` of the trajectory and
/// optionally compare with `bounds = (k_low, k_high)` widened by `delta`.
pub fn speed_estimate(trajectory: &Trajectory, fraction: f64, bounds: Option<(f64, f64)>, delta: f64) -> Result<SpeedEstimate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fit fraction must lie in (0, 1] (got {fraction})")));
    }
    let (t, h) = trailing(&trajectory.samples, fraction)?;
    let (tq, hq) = trailing(&trajectory.samples, 0.5 * fraction)?;
    let slope = least_squares_slope(&t, &h).ok_or_else(|| Error::WindowTooShort("degenerate fit window".into()))?;
    let slope_quarter = least_squares_slope(&tq, &hq).ok_or_else(|| Error::WindowTooShort("degenerate fit window".into()))?;
    let band = bounds.map(|(lo, hi)| (lo - delta, hi + delta));
    let in_band = band.map(|(lo, hi)| slope >= lo && slope <= hi);
    Ok(SpeedEstimate { slope, slope_quarter, t_from: t[0], t_to: t[t.len() - 1], band, in_band })
}
