//! Small numerical kernels: tridiagonal solves, quadrature and interpolation.

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i` to
/// column `i + 1`. Returns `None` when a pivot vanishes.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(rhs.len() == n && lower.len() + 1 == n.max(1) && upper.len() + 1 == n.max(1));
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return None;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Composite trapezoid rule on a uniform grid with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Uniform nodes `0, dx, ..., extent` (`intervals + 1` of them).
pub fn uniform_nodes(extent: f64, intervals: usize) -> Vec<f64> {
    let dx = extent / intervals as f64;
    (0..=intervals).map(|i| if i == intervals { extent } else { i as f64 * dx }).collect()
}

/// Piecewise-linear interpolation of samples on a uniform grid over `[0, extent]`.
/// Clamps outside the grid.
pub fn linear_uniform(values: &[f64], extent: f64, x: f64) -> f64 {
    let n = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    if x >= extent {
        return values[n];
    }
    let s = x / extent * n as f64;
    let i = (s.floor() as usize).min(n - 1);
    let frac = s - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes) over
/// samples on a uniform grid. Preserves monotonicity and sign of the data
/// between nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    extent: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(extent: f64, values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "monotone cubic needs at least two samples");
        let h = extent / (n - 1) as f64;
        let secants: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
        }
        // Endpoint slopes must not overshoot the neighbouring secant.
        for (i, s) in [(0usize, 0usize), (n - 1, n - 2)] {
            if slopes[i] * secants[s] < 0.0 {
                slopes[i] = 0.0;
            } else if slopes[i].abs() > 3.0 * secants[s].abs() {
                slopes[i] = 3.0 * secants[s];
            }
        }
        Self { extent, values: values.to_vec(), slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len() - 1;
        let h = self.extent / n as f64;
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= self.extent {
            return self.values[n];
        }
        let i = ((x / h).floor() as usize).min(n - 1);
        let t = (x - i as f64 * h) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    Some(sxy / sxx)
}

/// Plain bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
/// Stops when the bracket is narrower than `x_tol` or `|f| <= f_tol`.
pub fn bisect<E, F>(mut f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, x_tol: f64, f_tol: f64) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.abs() <= f_tol {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        let lower = [1.0, -2.0, 0.5];
        let diag = [4.0, 5.0, 6.0, 3.0];
        let upper = [-1.0, 2.0, 1.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x_true[i];
                if i > 0 {
                    s += lower[i - 1] * x_true[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn monotone_cubic_keeps_positive_data_positive() {
        let data = [0.0, 1.0, 1e-6, 1e-6, 2.0, 0.0];
        let p = MonotoneCubic::new(5.0, &data);
        for i in 0..=500 {
            let x = i as f64 * 0.01;
            assert!(p.eval(x) >= -1e-15, "negative at {x}: {}", p.eval(x));
        }
        for (i, v) in data.iter().enumerate() {
            assert!((p.eval(i as f64) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let v: Vec<f64> = uniform_nodes(2.0, 10).iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&v, 0.2) - 8.0).abs() < 1e-13);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((least_squares_slope(&x, &y).unwrap() - 2.0).abs() < 1e-14);
    }
}
