//! Semi-wave profiles: `-d w'' + k w' = w (c - w)` on the half line with
//! `w(0) = 0`, `w(inf) = c`, and the speed `k0` solving `mu w_k'(0) = k`.
//!
//! The half line is truncated at `L` with `w(L) = c`; a profile that has not
//! settled by `3L/4` is rejected and the caller doubles `L`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect, linear_uniform, solve_tridiagonal};

/// Initial truncation in units of `sqrt(d / c)`.
pub const TRUNCATION_LENGTHS: f64 = 40.0;
/// Nodes per `sqrt(d / c)` in the default grid.
pub const NODES_PER_LENGTH: f64 = 100.0;
/// Far-field settling requirement `|w(3L/4) - c| <= TOL_FAR * c`.
pub const TOL_FAR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiWaveResult {
    pub k: f64,
    pub c: f64,
    pub d: f64,
    pub l_trunc: f64,
    /// `w_k` on a uniform grid over `[0, l_trunc]`.
    pub profile: Vec<f64>,
    /// `w_k'(0)` by the second-order one-sided difference.
    pub slope0: f64,
    /// Max-norm residual of the discrete ODE.
    pub residual: f64,
}

impl SemiWaveResult {
    /// `mu * w_k'(0) - k`.
    pub fn speed_residual(&self, mu: f64) -> f64 {
        mu * self.slope0 - self.k
    }

    pub fn dx(&self) -> f64 {
        self.l_trunc / (self.profile.len() - 1) as f64
    }
}

/// Minimal KPP speed `2 sqrt(d c)`.
pub fn kpp_speed(c: f64, d: f64) -> f64 {
    2.0 * (d * c).sqrt()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")))
    }
}

fn ode_residual(w: &[f64], k: f64, c: f64, d: f64, dx: f64) -> Vec<f64> {
    let diff = d / (dx * dx);
    let adv = k / (2.0 * dx);
    (1..w.len() - 1)
        .map(|i| -diff * (w[i - 1] - 2.0 * w[i] + w[i + 1]) + adv * (w[i + 1] - w[i - 1]) - w[i] * (c - w[i]))
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Solve the truncated boundary-value problem on `grid_n` uniform nodes,
/// starting Newton from `guess` when given (resampled to the grid).
pub fn solve_semiwave_from(
    k: f64,
    c: f64,
    d: f64,
    l_trunc: f64,
    grid_n: usize,
    guess: Option<&[f64]>,
) -> Result<SemiWaveResult> {
    check_positive("c", c)?;
    check_positive("d", d)?;
    check_positive("l_trunc", l_trunc)?;
    if !(k.is_finite() && k >= 0.0 && k < kpp_speed(c, d)) {
        return Err(Error::InvalidParameter(format!("k must lie in [0, 2 sqrt(d c)) (got {k})")));
    }
    if grid_n < 16 {
        return Err(Error::InvalidParameter(format!("grid_n must be at least 16 (got {grid_n})")));
    }
    let dx = l_trunc / (grid_n - 1) as f64;
    let mut w: Vec<f64> = match guess {
        // The guess is taken to span the same [0, l_trunc].
        Some(g) if g.len() >= 2 => (0..grid_n).map(|i| linear_uniform(g, 1.0, i as f64 / (grid_n - 1) as f64)).collect(),
        _ => {
            let rate = (c / (2.0 * d)).sqrt();
            (0..grid_n).map(|i| c * (i as f64 * dx * rate).tanh()).collect()
        }
    };
    w[0] = 0.0;
    w[grid_n - 1] = c;

    let diff = d / (dx * dx);
    let adv = k / (2.0 * dx);
    let tol = 1e-10 * c * (1.0 + diff);
    let mut norm = max_abs(&ode_residual(&w, k, c, d, dx));
    let mut converged = norm <= tol;
    let mut iterations = 0;
    while !converged {
        iterations += 1;
        if iterations > 100 {
            return Err(Error::NewtonStalled { iterations, residual: norm });
        }
        let r = ode_residual(&w, k, c, d, dx);
        let inner = grid_n - 2;
        let lower = vec![-diff - adv; inner - 1];
        let upper = vec![-diff + adv; inner - 1];
        let diag: Vec<f64> = (1..grid_n - 1).map(|i| 2.0 * diff - c + 2.0 * w[i]).collect();
        let delta = solve_tridiagonal(&lower, &diag, &upper, &r).ok_or(Error::NewtonStalled { iterations, residual: norm })?;
        let mut theta = 1.0;
        loop {
            let mut trial = w.clone();
            for (i, dv) in delta.iter().enumerate() {
                trial[i + 1] -= theta * dv;
            }
            let trial_norm = max_abs(&ode_residual(&trial, k, c, d, dx));
            if trial_norm < (1.0 - 1e-4 * theta) * norm || trial_norm <= tol {
                w = trial;
                norm = trial_norm;
                break;
            }
            theta *= 0.5;
            if theta < 1e-6 {
                return Err(Error::NewtonStalled { iterations, residual: norm });
            }
        }
        let step = theta * max_abs(&delta);
        converged = norm <= tol || (step <= 1e-14 * c && norm <= 1e3 * tol);
    }

    // Strict increase is only resolvable away from the round-off plateau at c.
    if let Some(i) = w.windows(2).position(|p| !(p[1] > p[0]) && c - p[0] > 1e-9 * c) {
        return Err(Error::NewtonStalled { iterations, residual: norm }).inspect_err(|_| {
            log::debug!("semi-wave profile for k = {k} not increasing at node {i}");
        });
    }
    let probe = linear_uniform(&w, l_trunc, 0.75 * l_trunc);
    let gap = (probe - c).abs();
    if gap > TOL_FAR * c {
        return Err(Error::TruncationTooShort { length: l_trunc, gap });
    }
    let slope0 = (4.0 * w[1] - w[2]) / (2.0 * dx);
    Ok(SemiWaveResult { k, c, d, l_trunc, profile: w, slope0, residual: norm })
}

/// Solve the truncated boundary-value problem on `grid_n` uniform nodes.
pub fn solve_semiwave(k: f64, c: f64, d: f64, l_trunc: f64, grid_n: usize) -> Result<SemiWaveResult> {
    solve_semiwave_from(k, c, d, l_trunc, grid_n, None)
}

/// Solve with the default truncation and spacing, doubling the truncation
/// (at fixed spacing) until the far field has settled.
pub fn semiwave_auto(k: f64, c: f64, d: f64) -> Result<SemiWaveResult> {
    check_positive("c", c)?;
    check_positive("d", d)?;
    let unit = (d / c).sqrt();
    let mut intervals = (TRUNCATION_LENGTHS * NODES_PER_LENGTH) as usize;
    let mut length = TRUNCATION_LENGTHS * unit;
    for _ in 0..6 {
        match solve_semiwave(k, c, d, length, intervals + 1) {
            Err(Error::TruncationTooShort { .. }) | Err(Error::NewtonStalled { .. }) => {
                log::debug!("semi-wave k = {k}: widening truncation beyond {length}");
                length *= 2.0;
                intervals *= 2;
            }
            other => return other,
        }
    }
    solve_semiwave(k, c, d, length, intervals + 1)
}

/// The unique `k0` in `(0, 2 sqrt(d c))` with `mu w_{k0}'(0) = k0`.
pub fn find_k0(mu: f64, c: f64, d: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    check_positive("c", c)?;
    check_positive("d", d)?;
    let kpp = kpp_speed(c, d);
    let g = |k: f64| semiwave_auto(k, c, d).map(|r| r.speed_residual(mu));
    let g0 = g(0.0)?;
    if g0 <= 0.0 {
        return Err(Error::BracketInvalid(format!("g(0) = {g0} is not positive")));
    }
    // g is decreasing, so any probe with g < 0 closes the bracket. Probing
    // upward toward kpp (1 - 1e-6) avoids the long-shelf profiles near the
    // KPP speed, which need very wide truncations.
    let ceiling = kpp * (1.0 - 1e-6);
    let mut hi = 0.5 * kpp;
    let g_hi = loop {
        let value = g(hi)?;
        if value < 0.0 {
            break value;
        }
        if hi >= ceiling {
            return Err(Error::BracketInvalid(format!("g({hi}) = {value} is not negative")));
        }
        hi = (kpp - 0.5 * (kpp - hi)).min(ceiling);
    };
    log::trace!("k0 bracket [0, {hi}], g(hi) = {g_hi}");
    bisect(g, 0.0, hi, g0, 1e-6 * kpp, 0.0)
}

/// Bounds `(k0(mu, m1), k0(mu, m2))` on the asymptotic spreading speed.
pub fn speed_bounds(mu: f64, m1: f64, m2: f64, d: f64) -> Result<(f64, f64)> {
    if !(m1 > 0.0 && m2 >= m1) {
        return Err(Error::InvalidParameter(format!("need 0 < m1 <= m2 (got {m1}, {m2})")));
    }
    let low = find_k0(mu, m1, d)?;
    let high = if m2 == m1 { low } else { find_k0(mu, m2, d)? };
    Ok((low, high))
}
