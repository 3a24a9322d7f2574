//! Principal eigenvalue of `-d phi'' - m(x) phi` on `(0, ell)` with the Robin
//! operator at `x = 0` and `phi(ell) = 0`.
//!
//! The operator is discretized with second-order central differences; the
//! Robin condition enters through a ghost node, which leaves a tridiagonal
//! matrix that is diagonally similar to a symmetric one. The smallest
//! eigenvalue comes from bisection on the Sturm sign count, the eigenfunction
//! from shifted inverse iteration, and the reported value is Richardson
//! extrapolated from grids with spacing `dx` and `dx / 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BoundaryOperator, GrowthProfile};
use crate::numerics::{bisect, solve_tridiagonal, trapezoid};

/// Relative tolerance on the discrete eigen-residual.
pub const TOL_EIG: f64 = 1e-6;
/// Sign threshold for certified-negative eigenvalues.
pub const TOL_SIGN: f64 = 1e-8;

/// Knobs shared by the threshold searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    /// Minimum node count of the coarse grid.
    pub grid_n: usize,
    /// Nodes per unit length; long intervals get `ceil(ell * points_per_length) + 1` nodes.
    pub points_per_length: f64,
    /// Largest interval probed by [`critical_length`].
    pub ell_max: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { grid_n: 256, points_per_length: 32.0, ell_max: 100.0 }
    }
}

impl EigenOptions {
    pub fn nodes_for(&self, ell: f64) -> usize {
        self.grid_n.max((ell * self.points_per_length).ceil() as usize + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    /// Extrapolated principal eigenvalue.
    pub lambda1: f64,
    pub ell: f64,
    /// Eigenfunction on `grid_n` uniform nodes over `[0, ell]`, `max = 1`.
    pub phi: Vec<f64>,
    pub grid_n: usize,
    /// Raw eigenvalue of the discrete operator on the `grid_n` grid.
    pub lambda_grid: f64,
    /// `max |(-d D2 - m) phi - lambda1 phi|` over the unknown nodes.
    pub residual: f64,
    /// Eigen-equation consistency of the ghost-node Robin row at `x = 0`.
    pub boundary_residual: f64,
}

/// The discrete operator in symmetric form, restricted to the unknown nodes.
#[derive(Debug, Clone)]
pub(crate) struct SymmetricTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Index of the first unknown node (1 under Dirichlet, 0 otherwise).
    pub first: usize,
    /// Scale of the first unknown in the similarity transform.
    pub head_scale: f64,
}

/// Assemble `-d D2 - m` on `nodes` uniform nodes over `[0, ell]`.
pub(crate) fn assemble(ell: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, nodes: usize) -> Result<SymmetricTridiagonal> {
    let dx = ell / (nodes - 1) as f64;
    let c = d / (dx * dx);
    let first = usize::from(boundary.is_dirichlet());
    let last = nodes - 2;
    let mut diag: Vec<f64> = (first..=last).map(|i| 2.0 * c - m.eval(i as f64 * dx)).collect();
    // Nonsymmetric couplings: row i to i+1 (upper) and row i+1 to i (lower).
    let mut upper = vec![-c; diag.len() - 1];
    let lower = vec![-c; diag.len() - 1];
    if first == 0 {
        diag[0] += 2.0 * d * boundary.robin_ratio() / dx;
        upper[0] = -2.0 * c;
    }
    let mut off = Vec::with_capacity(upper.len());
    for (row, (u, l)) in upper.iter().zip(&lower).enumerate() {
        let p = u * l;
        if !(p > 0.0) {
            return Err(Error::NotSymmetrizable { row });
        }
        off.push(-p.sqrt());
    }
    let head_scale = if first == 0 { std::f64::consts::SQRT_2 } else { 1.0 };
    Ok(SymmetricTridiagonal { diag, off, first, head_scale })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let scale = diag.iter().map(|v| v.abs()).fold(0.0, f64::max) + off.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let guard = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            let prev = if q.abs() < guard { -guard } else { q };
            q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
pub fn smallest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector for an eigenvalue at the bottom of the spectrum by shifted
/// inverse iteration. The shift sits just below `lambda`, keeping the shifted
/// matrix positive definite so the unpivoted solve is stable.
fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let scale = diag.iter().map(|v| v.abs()).fold(0.0, f64::max) + 2.0 * off.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let shift = lambda - 1e-10 * scale.max(lambda.abs()).max(1e-300);
    let shifted: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut x = vec![1.0; diag.len()];
    for _ in 0..4 {
        x = solve_tridiagonal(off, &shifted, off, &x)?;
        let norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Some(x)
}

/// Raw principal eigenpair of the discrete operator on `nodes` grid nodes.
/// The eigenfunction covers all nodes, is normalized to `max = 1` and includes
/// the boundary values.
pub(crate) fn discrete_principal(
    ell: f64,
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    nodes: usize,
) -> Result<(f64, Vec<f64>)> {
    let op = assemble(ell, d, m, boundary, nodes)?;
    let lambda = smallest_eigenvalue(&op.diag, &op.off);
    let psi = inverse_iteration(&op.diag, &op.off, lambda)
        .ok_or_else(|| Error::GridTooCoarse("inverse iteration broke down".into()))?;
    let mut phi = vec![0.0; nodes];
    for (k, v) in psi.iter().enumerate() {
        phi[op.first + k] = *v;
    }
    phi[op.first] *= op.head_scale;
    let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let peak = phi.iter().map(|v| v * sign).fold(f64::NEG_INFINITY, f64::max);
    phi.iter_mut().for_each(|v| *v *= sign / peak);
    Ok((lambda, phi))
}

/// Discrete eigenvalue only (no eigenvector), used inside root searches.
fn discrete_eigenvalue(ell: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, nodes: usize) -> Result<f64> {
    let op = assemble(ell, d, m, boundary, nodes)?;
    Ok(smallest_eigenvalue(&op.diag, &op.off))
}

/// Richardson-extrapolated eigenvalue from `nodes` and `2 nodes - 1` nodes.
pub fn extrapolated_eigenvalue(ell: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, nodes: usize) -> Result<f64> {
    let coarse = discrete_eigenvalue(ell, d, m, boundary, nodes)?;
    let fine = discrete_eigenvalue(ell, d, m, boundary, 2 * nodes - 1)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `(-d D2 - m) phi - lambda phi` in max norm over the unknown nodes.
fn eigen_residual(phi: &[f64], lambda: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, dx: f64) -> (f64, f64) {
    let n = phi.len();
    let c = d / (dx * dx);
    let first = usize::from(boundary.is_dirichlet());
    let mut worst: f64 = 0.0;
    for i in first..n - 1 {
        let left = if i == 0 { phi[1] - 2.0 * dx * boundary.robin_ratio() * phi[0] } else { phi[i - 1] };
        let r = -c * (left - 2.0 * phi[i] + phi[i + 1]) - m.eval(i as f64 * dx) * phi[i] - lambda * phi[i];
        worst = worst.max(r.abs());
    }
    let boundary_residual = if boundary.is_dirichlet() {
        phi[0].abs()
    } else {
        // Ghost value implied by the eigen equation at the first node.
        let ghost = 2.0 * phi[0] - phi[1] - dx * dx * (m.eval(0.0) + lambda) * phi[0] / d;
        (boundary.alpha() * phi[0] - boundary.beta() * (phi[1] - ghost) / (2.0 * dx)).abs()
    };
    (worst, boundary_residual)
}

/// Principal eigenvalue `lambda1(ell; d, m)` and its eigenfunction.
pub fn principal_eigenvalue(
    ell: f64,
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    grid_n: usize,
) -> Result<EigenResult> {
    if grid_n < 16 {
        return Err(Error::InvalidParameter(format!("grid_n must be at least 16 (got {grid_n})")));
    }
    if !(ell.is_finite() && ell > 0.0 && d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!("need ell > 0 and d > 0 (got ell = {ell}, d = {d})")));
    }
    let (lambda_grid, phi) = discrete_principal(ell, d, m, boundary, grid_n)?;
    let fine = discrete_eigenvalue(ell, d, m, boundary, 2 * grid_n - 1)?;
    let lambda1 = (4.0 * fine - lambda_grid) / 3.0;
    if let Some((i, v)) = phi[1..grid_n - 1].iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::GridTooCoarse(format!("eigenfunction not positive at node {} ({v:e})", i + 1)));
    }
    let dx = ell / (grid_n - 1) as f64;
    let (residual, boundary_residual) = eigen_residual(&phi, lambda_grid, d, m, boundary, dx);
    let (residual_extrapolated, _) = eigen_residual(&phi, lambda1, d, m, boundary, dx);
    let limit = TOL_EIG * (lambda1.abs() + d / (dx * dx));
    if residual > limit {
        return Err(Error::GridTooCoarse(format!("eigen-residual {residual:e} exceeds {limit:e}")));
    }
    Ok(EigenResult {
        lambda1,
        ell,
        phi,
        grid_n,
        lambda_grid,
        residual: residual_extrapolated,
        boundary_residual,
    })
}

/// Critical length `h*(d)` where `lambda1(h*; d, m) = 0`.
///
/// Returns [`Error::NotAttained`] when `lambda1` stays non-negative up to
/// `opts.ell_max`.
pub fn critical_length(d: f64, m: &GrowthProfile, boundary: &BoundaryOperator, opts: &EigenOptions) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!("d must be positive (got {d})")));
    }
    let eig = |ell: f64, nodes: usize| extrapolated_eigenvalue(ell, d, m, boundary, nodes);
    let mut lo = opts.ell_max.min(1.0);
    let mut lam_lo = eig(lo, opts.nodes_for(lo))?;
    let mut halvings = 0;
    while lam_lo <= 0.0 {
        halvings += 1;
        if halvings > 60 {
            return Err(Error::GridTooCoarse("lambda1 does not turn positive for short intervals".into()));
        }
        lo *= 0.5;
        lam_lo = eig(lo, opts.nodes_for(lo))?;
    }
    let mut hi = lo;
    loop {
        let lam = eig(hi, opts.nodes_for(hi))?;
        if lam < 0.0 {
            break;
        }
        lo = hi;
        if hi >= opts.ell_max {
            return Err(Error::NotAttained { probe: hi, lambda: lam });
        }
        hi = (2.0 * hi).min(opts.ell_max);
    }
    let nodes = opts.nodes_for(hi);
    let lam_lo = eig(lo, nodes)?;
    if lam_lo <= 0.0 {
        // Resolution change moved the sign; the lower end is still admissible.
        return Ok(lo);
    }
    bisect(|ell| eig(ell, nodes), lo, hi, lam_lo, 1e-10 * hi, 1e-13)
}

/// Critical diffusion `d*(h0)` where `lambda1(h0; d*, m) = 0`.
///
/// Returns [`Error::NotAttained`] when `max m <= 0` on `[0, h0]`.
pub fn critical_diffusion(h0: f64, m: &GrowthProfile, boundary: &BoundaryOperator, opts: &EigenOptions) -> Result<f64> {
    if !(h0.is_finite() && h0 > 0.0) {
        return Err(Error::InvalidParameter(format!("h0 must be positive (got {h0})")));
    }
    let peak = m.max_on(0.0, h0);
    if peak <= 0.0 {
        return Err(Error::NotAttained { probe: h0, lambda: -peak });
    }
    let nodes = opts.nodes_for(h0);
    let eig = |d: f64| extrapolated_eigenvalue(h0, d, m, boundary, nodes);
    let mut lo = 1.0;
    let mut lam_lo = eig(lo)?;
    let mut steps = 0;
    while lam_lo >= 0.0 {
        steps += 1;
        if steps > 40 {
            return Err(Error::NotAttained { probe: h0, lambda: lam_lo });
        }
        lo *= 0.25;
        lam_lo = eig(lo)?;
    }
    let mut hi = lo.max(1.0);
    let mut steps = 0;
    while eig(hi)? <= 0.0 {
        steps += 1;
        if steps > 40 {
            return Err(Error::GridTooCoarse("lambda1 does not turn positive for large d".into()));
        }
        lo = hi;
        hi *= 4.0;
    }
    let lam_lo = eig(lo)?;
    bisect(eig, lo, hi, lam_lo, 1e-11 * hi, 1e-13)
}

/// Rayleigh quotient of samples `phi` on a uniform grid over `[0, ell]`.
///
/// The Robin relation `phi'(0) = (alpha / beta) phi(0)` is substituted into the
/// boundary term. Derivatives are those of the piecewise-linear interpolant;
/// mass integrals use the trapezoid rule.
pub fn rayleigh_quotient(phi: &[f64], ell: f64, d: f64, m: &GrowthProfile, boundary: &BoundaryOperator) -> Result<f64> {
    if phi.len() < 3 {
        return Err(Error::InvalidParameter("phi needs at least three samples".into()));
    }
    let n = phi.len() - 1;
    let dx = ell / n as f64;
    let peak = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidParameter("phi has zero norm".into()));
    }
    if phi[n].abs() > 1e-12 * peak {
        return Err(Error::Precondition("phi must vanish at ell".into()));
    }
    if boundary.is_dirichlet() && phi[0].abs() > 1e-12 * peak {
        return Err(Error::Precondition("phi must vanish at 0 under a Dirichlet condition".into()));
    }
    let boundary_term = if boundary.is_dirichlet() { 0.0 } else { d * boundary.robin_ratio() * phi[0] * phi[0] };
    let stiffness: f64 = phi.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / dx;
    let weighted: Vec<f64> = phi.iter().enumerate().map(|(i, v)| m.eval(i as f64 * dx) * v * v).collect();
    let squares: Vec<f64> = phi.iter().map(|v| v * v).collect();
    let mass = trapezoid(&squares, dx);
    Ok((boundary_term + d * stiffness - trapezoid(&weighted, dx)) / mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeVerdict {
    NegativeLimit,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitProbe {
    pub values: Vec<(f64, f64)>,
    pub verdict: ProbeVerdict,
}

/// Probe the sign of `lim_{ell -> inf} lambda1(ell; d, m)` along an increasing
/// schedule of lengths; stops at the first certified-negative value.
pub fn lambda_infinity_probe(
    d: f64,
    m: &GrowthProfile,
    boundary: &BoundaryOperator,
    schedule: &[f64],
    opts: &EigenOptions,
) -> Result<LimitProbe> {
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.first().is_some_and(|&l| l <= 0.0) {
        return Err(Error::InvalidParameter("ell schedule must be positive and strictly increasing".into()));
    }
    let mut values = Vec::with_capacity(schedule.len());
    for &ell in schedule {
        let lambda = extrapolated_eigenvalue(ell, d, m, boundary, opts.nodes_for(ell))?;
        values.push((ell, lambda));
        if lambda < -TOL_SIGN {
            return Ok(LimitProbe { values, verdict: ProbeVerdict::NegativeLimit });
        }
    }
    Ok(LimitProbe { values, verdict: ProbeVerdict::Inconclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn neumann_closed_form() {
        let r = principal_eigenvalue(FRAC_PI_2, 1.0, &GrowthProfile::constant(1.0), &BoundaryOperator::neumann(), 256).unwrap();
        assert!(r.lambda1.abs() < 1e-6, "{}", r.lambda1);
        assert_eq!(r.phi.len(), 256);
        assert_eq!(r.phi[255], 0.0);
        assert!(r.phi[1..255].iter().all(|&v| v > 0.0));
        assert!((r.phi[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_closed_form() {
        let r = principal_eigenvalue(PI, 1.0, &GrowthProfile::constant(1.0), &BoundaryOperator::dirichlet(), 256).unwrap();
        assert!(r.lambda1.abs() < 1e-6, "{}", r.lambda1);
        assert_eq!(r.phi[0], 0.0);
    }

    #[test]
    fn robin_sits_between_neumann_and_dirichlet() {
        let m = GrowthProfile::constant(0.5);
        let l = |b: BoundaryOperator| principal_eigenvalue(2.0, 1.0, &m, &b, 128).unwrap().lambda1;
        let n = l(BoundaryOperator::neumann());
        let r = l(BoundaryOperator::new(0.5, 0.5).unwrap());
        let dd = l(BoundaryOperator::dirichlet());
        assert!(n < r && r < dd);
        // Robin root of tan: eigenvalue (theta/ell)^2 - c with theta tan(theta)... checked loosely.
        assert!(r > n + 1e-3);
    }

    #[test]
    fn non_positive_growth_gives_positive_eigenvalue() {
        let m = GrowthProfile::piecewise_linear(vec![[0.0, 0.0], [1.0, -2.0], [3.0, 0.0]]).unwrap();
        for b in [BoundaryOperator::neumann(), BoundaryOperator::dirichlet(), BoundaryOperator::new(0.2, 0.8).unwrap()] {
            let r = principal_eigenvalue(3.0, 0.3, &m, &b, 64).unwrap();
            assert!(r.lambda1 > 0.0);
        }
    }

    #[test]
    fn rejects_tiny_grids() {
        let m = GrowthProfile::constant(1.0);
        assert!(principal_eigenvalue(1.0, 1.0, &m, &BoundaryOperator::neumann(), 8).is_err());
    }

    #[test]
    fn critical_length_closed_forms() {
        let m = GrowthProfile::constant(1.0);
        let opts = EigenOptions::default();
        let b = BoundaryOperator::neumann();
        let h1 = critical_length(1.0, &m, &b, &opts).unwrap();
        let h4 = critical_length(4.0, &m, &b, &opts).unwrap();
        assert!((h1 - FRAC_PI_2).abs() < 1e-5, "{h1}");
        assert!((h4 - PI).abs() < 1e-5, "{h4}");
    }

    #[test]
    fn critical_length_not_attained_for_hostile_habitat() {
        let m = GrowthProfile::piecewise_linear(vec![[0.0, -1.0], [50.0, -1.0], [50.005, 1e-3], [50.01, -1.0]]).unwrap();
        let opts = EigenOptions { ell_max: 100.0, ..Default::default() };
        match critical_length(1e3, &m, &BoundaryOperator::neumann(), &opts) {
            Err(Error::NotAttained { probe, lambda }) => {
                assert_eq!(probe, 100.0);
                assert!(lambda > 0.0);
            }
            other => panic!("expected NotAttained, got {other:?}"),
        }
    }

    #[test]
    fn critical_diffusion_closed_forms() {
        let m = GrowthProfile::constant(1.0);
        let opts = EigenOptions::default();
        let dn = critical_diffusion(FRAC_PI_2, &m, &BoundaryOperator::neumann(), &opts).unwrap();
        let dd = critical_diffusion(PI, &m, &BoundaryOperator::dirichlet(), &opts).unwrap();
        assert!((dn - 1.0).abs() < 1e-5, "{dn}");
        assert!((dd - 1.0).abs() < 1e-5, "{dd}");
        let hostile = GrowthProfile::constant(-0.5);
        assert!(matches!(
            critical_diffusion(2.0, &hostile, &BoundaryOperator::neumann(), &opts),
            Err(Error::NotAttained { .. })
        ));
    }

    #[test]
    fn rayleigh_of_sine_mode() {
        let ell = 2.0;
        let n = 2000;
        let phi: Vec<f64> = (0..=n).map(|i| (PI * i as f64 / n as f64).sin()).collect();
        let mut phi = phi;
        phi[0] = 0.0;
        phi[n] = 0.0;
        let c = 0.7;
        let q = rayleigh_quotient(&phi, ell, 1.3, &GrowthProfile::constant(c), &BoundaryOperator::dirichlet()).unwrap();
        let exact = 1.3 * (PI / ell).powi(2) - c;
        assert!((q - exact).abs() < 1e-5, "{q} vs {exact}");
    }

    #[test]
    fn rayleigh_rejects_inadmissible_functions() {
        let m = GrowthProfile::constant(1.0);
        let b = BoundaryOperator::neumann();
        assert!(rayleigh_quotient(&[0.0, 0.0, 0.0], 1.0, 1.0, &m, &b).is_err());
        assert!(rayleigh_quotient(&[1.0, 1.0, 1.0], 1.0, 1.0, &m, &b).is_err());
        assert!(rayleigh_quotient(&[1.0, 1.0, 0.0], 1.0, 1.0, &m, &BoundaryOperator::dirichlet()).is_err());
    }

    #[test]
    fn probe_on_constant_growth() {
        let p = lambda_infinity_probe(
            1.0,
            &GrowthProfile::constant(1.0),
            &BoundaryOperator::neumann(),
            &[1.0, 2.0, 4.0, 8.0],
            &EigenOptions::default(),
        )
        .unwrap();
        assert_eq!(p.verdict, ProbeVerdict::NegativeLimit);
        assert_eq!(p.values.len(), 2);
        assert!(p.values[0].1 > 0.0 && p.values[1].1 < 0.0);
        let exact = |l: f64| (FRAC_PI_2 / l).powi(2) - 1.0;
        for (l, v) in p.values {
            assert!((v - exact(l)).abs() < 1e-6);
        }
    }
}
