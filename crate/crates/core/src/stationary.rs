//! Positive equilibria of `-d u'' = u (m(x) - u)`.
//!
//! On a finite interval `(0, ell)` with the Robin operator at `0` and
//! `u(ell) = 0`, the positive solution exists exactly when the principal
//! eigenvalue is negative. It is computed by damped Newton on the
//! central-difference system, falling back to monotone Picard iteration
//! between the ordered barriers `eps * phi` and `sup m`.
//!
//! The half-line equilibrium is the monotone limit of interval solutions as
//! `ell` grows; [`solve_halfline`] follows a truncation schedule until two
//! consecutive solutions agree on an observation window.

use serde::Serialize;

use crate::eigen::{critical_length, discrete_principal, EigenOptions};
use crate::error::{Error, Result};
use crate::model::{BoundaryOperator, GrowthProfile};
use crate::numerics::solve_tridiagonal;

/// Smallest accepted node count for interval solves.
pub const MIN_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `(0, ell)` with `u(ell) = 0`.
    Interval { ell: f64 },
    /// Truncation of the half line at `length`.
    HalfLine { length: f64 },
}

/// One entry of the exhaustion history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationStep {
    pub length: f64,
    /// Max-norm distance to the previous truncation on the observation window
    /// (`None` for the first entry).
    pub gap: Option<f64>,
    /// `max(u_prev - u)` over the previous interval; should not exceed
    /// round-off since `u_ell` increases with `ell`.
    pub monotone_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySolution {
    pub domain: Domain,
    /// Right end of the grid (`ell` or the truncation length).
    pub extent: f64,
    /// Samples on a uniform grid over `[0, extent]`, including both ends.
    pub values: Vec<f64>,
    /// Max-norm residual of the discrete equations.
    pub residual: f64,
    /// Residual threshold the solve had to meet.
    pub tolerance: f64,
    /// Principal eigenvalue of the discrete linearization at zero.
    pub lambda_grid: f64,
    /// Iterations used (Newton, plus Picard sweeps if the fallback ran).
    pub iterations: usize,
    pub history: Vec<TruncationStep>,
}

impl StationarySolution {
    pub fn dx(&self) -> f64 {
        self.extent / (self.values.len() - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.values.len()).map(|i| i as f64 * dx).collect()
    }

    /// Smallest value over the interior nodes.
    pub fn min_interior(&self) -> f64 {
        let n = self.values.len();
        self.values[1..n - 1].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Residual threshold `1e-8 * sup m * (1 + d / dx^2)`.
pub fn tol_stat(sup_m: f64, d: f64, dx: f64) -> f64 {
    1e-8 * sup_m.max(f64::MIN_POSITIVE) * (1.0 + d / (dx * dx))
}

/// The discrete problem on a fixed grid; unknowns are nodes `first..n-1`.
struct Discretization {
    c: f64,
    /// Extra diagonal weight and doubled upper coupling at the Robin row.
    robin: Option<f64>,
    m: Vec<f64>,
    first: usize,
    n: usize,
}

impl Discretization {
    fn new(ell: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, nodes: usize) -> Self {
        let dx = ell / (nodes - 1) as f64;
        let first = usize::from(boundary.is_dirichlet());
        let robin = (first == 0).then(|| 2.0 * d * boundary.robin_ratio() / dx);
        let m = (0..nodes).map(|i| m.eval(i as f64 * dx)).collect();
        Self { c: d / (dx * dx), robin, m, first, n: nodes }
    }

    /// Diffusion matrix `-d D2` (with the ghost-node row) as (lower, diag, upper).
    fn diffusion(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.n - 1 - self.first;
        let lower = vec![-self.c; k - 1];
        let mut diag = vec![2.0 * self.c; k];
        let mut upper = vec![-self.c; k - 1];
        if let Some(r) = self.robin {
            diag[0] += r;
            upper[0] = -2.0 * self.c;
        }
        (lower, diag, upper)
    }

    /// `-d D2 u - u (m - u)` at the unknown nodes.
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let (lower, diag, upper) = self.diffusion();
        let k = diag.len();
        (0..k)
            .map(|j| {
                let i = self.first + j;
                let mut r = diag[j] * u[i] - u[i] * (self.m[i] - u[i]);
                if j > 0 {
                    r += lower[j - 1] * u[i - 1];
                } else if self.first == 1 {
                    r -= self.c * u[0];
                }
                if j + 1 < k {
                    r += upper[j] * u[i + 1];
                }
                r
            })
            .collect()
    }

    fn residual_norm(&self, u: &[f64]) -> f64 {
        self.residual(u).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// One Newton correction `J^{-1} F(u)`.
    fn newton_step(&self, u: &[f64]) -> Option<Vec<f64>> {
        let (lower, mut diag, upper) = self.diffusion();
        for (j, dj) in diag.iter_mut().enumerate() {
            let i = self.first + j;
            *dj += 2.0 * u[i] - self.m[i];
        }
        solve_tridiagonal(&lower, &diag, &upper, &self.residual(u))
    }

    /// Damped Newton from `guess`. Returns the iterate and the iteration count,
    /// or `NewtonStalled`.
    fn newton(&self, guess: &[f64], tol: f64, scale: f64) -> Result<(Vec<f64>, usize)> {
        let mut u = guess.to_vec();
        let mut norm = self.residual_norm(&u);
        for it in 1..=60 {
            let delta = self.newton_step(&u).ok_or(Error::NewtonStalled { iterations: it, residual: norm })?;
            let step_size = delta.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let mut theta = 1.0;
            let accepted = loop {
                let mut trial = u.clone();
                for (j, dv) in delta.iter().enumerate() {
                    trial[self.first + j] -= theta * dv;
                }
                let trial_norm = self.residual_norm(&trial);
                if trial_norm < (1.0 - 1e-4 * theta) * norm || trial_norm <= 0.1 * tol {
                    break Some((trial, trial_norm));
                }
                theta *= 0.5;
                if theta < 1e-4 {
                    break None;
                }
            };
            let Some((trial, trial_norm)) = accepted else {
                if norm <= tol {
                    return Ok((u, it));
                }
                return Err(Error::NewtonStalled { iterations: it, residual: norm });
            };
            u = trial;
            norm = trial_norm;
            if norm <= tol && theta * step_size <= 1e-13 * scale {
                return Ok((u, it));
            }
        }
        if norm <= tol {
            Ok((u, 60))
        } else {
            Err(Error::NewtonStalled { iterations: 60, residual: norm })
        }
    }

    /// Monotone iteration `(A + K) u_next = u (m - u) + K u` from a lower solution.
    fn picard(&self, lower_solution: &[f64], shift: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
        let (lower, mut diag, upper) = self.diffusion();
        diag.iter_mut().for_each(|v| *v += shift);
        let mut u = lower_solution.to_vec();
        for it in 1..=200_000 {
            let rhs: Vec<f64> = (0..diag.len())
                .map(|j| {
                    let i = self.first + j;
                    u[i] * (self.m[i] - u[i]) + shift * u[i]
                })
                .collect();
            let next = solve_tridiagonal(&lower, &diag, &upper, &rhs)
                .ok_or(Error::NewtonStalled { iterations: it, residual: f64::NAN })?;
            for (j, v) in next.into_iter().enumerate() {
                u[self.first + j] = v;
            }
            if it % 50 == 0 && self.residual_norm(&u) <= tol {
                return Ok((u, it));
            }
        }
        Err(Error::NewtonStalled { iterations: 200_000, residual: self.residual_norm(&u) })
    }
}

/// Ordered barriers `(eps * phi, sup m)` and the raw discrete eigenvalue.
///
/// `eps = min(-lambda / 2, sup m)` with `max phi = 1`, which makes `eps * phi`
/// a lower solution of the discrete problem.
pub fn barriers(
    ell: f64,
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    grid_n: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let (lambda, phi) = discrete_principal(ell, d, m, boundary, grid_n)?;
    if lambda >= 0.0 {
        return Err(Error::NoPositiveSolution { lambda });
    }
    let eps = (-0.5 * lambda).min(m.sup_bound());
    Ok((phi.iter().map(|v| eps * v.max(0.0)).collect(), m.sup_bound(), lambda))
}

fn check_interval_args(ell: f64, d: f64, grid_n: usize) -> Result<()> {
    if grid_n < MIN_GRID {
        return Err(Error::InvalidParameter(format!("grid_n must be at least {MIN_GRID} (got {grid_n})")));
    }
    if !(ell.is_finite() && ell > 0.0 && d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!("need ell > 0 and d > 0 (got ell = {ell}, d = {d})")));
    }
    Ok(())
}

/// Positive solution on `(0, ell)` with `u(ell) = 0`, on `grid_n` uniform nodes.
pub fn solve_interval(
    ell: f64,
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    grid_n: usize,
) -> Result<StationarySolution> {
    solve_interval_from(ell, d, m, boundary, grid_n, None)
}

/// As [`solve_interval`], starting Newton from `guess` (all nodes) instead of
/// the barrier midpoint.
pub fn solve_interval_from(
    ell: f64,
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    grid_n: usize,
    guess: Option<&[f64]>,
) -> Result<StationarySolution> {
    check_interval_args(ell, d, grid_n)?;
    let (lower, upper, lambda_grid) = barriers(ell, d, m, boundary, grid_n)?;
    let disc = Discretization::new(ell, d, m, boundary, grid_n);
    let dx = ell / (grid_n - 1) as f64;
    let tol = tol_stat(upper, d, dx);

    let mut start: Vec<f64> = match guess {
        Some(g) if g.len() == grid_n => g.to_vec(),
        Some(g) => return Err(Error::InvalidParameter(format!("guess has {} samples, expected {grid_n}", g.len()))),
        None => lower.iter().map(|l| 0.5 * (l + upper)).collect(),
    };
    start[grid_n - 1] = 0.0;
    if disc.first == 1 {
        start[0] = 0.0;
    }

    let positive = |u: &[f64]| u[disc.first..grid_n - 1].iter().all(|&v| v > 0.0);
    let (values, iterations) = match disc.newton(&start, tol, upper) {
        Ok((u, it)) if positive(&u) => (u, it),
        other => {
            let newton_iters = other.as_ref().map(|r| r.1).unwrap_or(0);
            log::debug!("Newton failed on ell = {ell}; falling back to monotone iteration");
            let shift = (2.0 * upper - m.inf_bound()).max(0.0);
            let (u, sweeps) = disc.picard(&lower, shift, tol)?;
            // Polish; keep the Picard iterate if Newton wanders off.
            match disc.newton(&u, tol, upper) {
                Ok((p, it)) if positive(&p) => (p, newton_iters + sweeps + it),
                _ => (u, newton_iters + sweeps),
            }
        }
    };
    let residual = disc.residual_norm(&values);
    if residual > tol {
        return Err(Error::NewtonStalled { iterations, residual });
    }
    Ok(StationarySolution {
        domain: Domain::Interval { ell },
        extent: ell,
        values,
        residual,
        tolerance: tol,
        lambda_grid,
        iterations,
        history: Vec::new(),
    })
}

/// Knobs for [`solve_halfline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalflineOptions {
    /// Grid nodes per unit length (the spacing is shared by all truncations).
    pub points_per_length: f64,
    /// Cauchy tolerance relative to `sup m`.
    pub tol_tail: f64,
    /// Observation window `[0, window]`; defaults to half the first truncation.
    pub window: Option<f64>,
}

impl Default for HalflineOptions {
    fn default() -> Self {
        Self { points_per_length: 32.0, tol_tail: 1e-6, window: None }
    }
}

/// Doubling schedule `L0, 2 L0, ...` with `L0 = max(4 h*, 20 sqrt(d / sup m))`.
pub fn default_schedule(d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, count: usize) -> Result<Vec<f64>> {
    let h_star = critical_length(d, m, boundary, &EigenOptions::default())?;
    let l0 = (4.0 * h_star).max(20.0 * (d / m.sup_bound()).sqrt());
    Ok((0..count).map(|k| l0 * 2f64.powi(k as i32)).collect())
}

/// Half-line equilibrium by exhaustion over an increasing schedule of
/// truncation lengths.
pub fn solve_halfline(
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    schedule: &[f64],
    opts: &HalflineOptions,
) -> Result<StationarySolution> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) || schedule[0] <= 0.0 {
        return Err(Error::InvalidParameter("truncation schedule must be positive and strictly increasing".into()));
    }
    let window = opts.window.unwrap_or(0.5 * schedule[0]);
    if !(window > 0.0 && window <= schedule[0]) {
        return Err(Error::InvalidParameter(format!("observation window {window} must lie in (0, {}]", schedule[0])));
    }
    // One spacing for the whole schedule so truncations share nodes.
    let dx = schedule[0] / (schedule[0] * opts.points_per_length).ceil().max((MIN_GRID - 1) as f64);
    let window_nodes = (window / dx).round() as usize;
    let tol = opts.tol_tail * m.sup_bound();

    let mut history = Vec::with_capacity(schedule.len());
    let mut previous: Option<StationarySolution> = None;
    for &target in schedule {
        let intervals = (target / dx).round().max((MIN_GRID - 1) as f64) as usize;
        let length = intervals as f64 * dx;
        let mut sol = solve_interval(length, d, m, boundary, intervals + 1)?;
        let (gap, defect) = match &previous {
            Some(prev) => {
                let gap = (0..=window_nodes).map(|i| (sol.values[i] - prev.values[i]).abs()).fold(0.0, f64::max);
                let defect = prev.values.iter().zip(&sol.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
                (Some(gap), Some(defect))
            }
            None => (None, None),
        };
        if let Some(defect) = defect {
            if defect > 10.0 * sol.tolerance.max(previous.as_ref().map_or(0.0, |p| p.tolerance)) {
                log::warn!("exhaustion not monotone at L = {length}: defect {defect:e}");
            }
        }
        history.push(TruncationStep { length, gap, monotone_defect: defect });
        log::debug!("truncation L = {length}: gap {gap:?}");
        if gap.is_some_and(|g| g < tol) {
            sol.domain = Domain::HalfLine { length };
            sol.history = history;
            return Ok(sol);
        }
        previous = Some(sol);
    }
    let last = history.last().expect("schedule is non-empty");
    Err(Error::NotConverged { length: last.length, gap: last.gap.unwrap_or(f64::INFINITY) })
}

/// `(min, max)` of `u(x) / x^gamma` over grid nodes in `[lo, hi]`.
pub fn tail_report(sol: &StationarySolution, gamma: f64, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let slack = 1e-9 * sol.extent;
    if !(lo >= -slack && hi <= sol.extent + slack && lo < hi) {
        return Err(Error::WindowOutsideGrid { lo, hi, extent: sol.extent });
    }
    if gamma != 0.0 && lo <= 0.0 {
        return Err(Error::WindowOutsideGrid { lo, hi, extent: sol.extent });
    }
    let dx = sol.dx();
    let ratios: Vec<f64> = (0..sol.values.len())
        .map(|i| i as f64 * dx)
        .zip(&sol.values)
        .filter(|(x, _)| *x >= lo - slack && *x <= hi + slack)
        .map(|(x, u)| if gamma == 0.0 { *u } else { u / x.powf(gamma) })
        .collect();
    if ratios.is_empty() {
        return Err(Error::WindowOutsideGrid { lo, hi, extent: sol.extent });
    }
    Ok((
        ratios.iter().copied().fold(f64::INFINITY, f64::min),
        ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ))
}
