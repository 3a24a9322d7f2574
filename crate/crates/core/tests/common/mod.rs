//! Builders shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stefan_core::model::{BoundaryOperator, GrowthProfile, InitialProfile, ProblemSpec};
use std::f64::consts::{FRAC_PI_2, PI};

/// Initial density with the right boundary behaviour at `0` and a simple zero
/// at `h0`: a quarter cosine for non-Dirichlet operators, a sine hump otherwise.
pub fn hump(boundary: &BoundaryOperator, h0: f64, amplitude: f64) -> InitialProfile {
    let dirichlet = boundary.is_dirichlet();
    InitialProfile::sampled(h0, 128, boundary, move |x| {
        if dirichlet {
            amplitude * (PI * x / h0).sin()
        } else {
            amplitude * (FRAC_PI_2 * x / h0).cos()
        }
    })
    .expect("valid initial profile")
}

pub fn logistic_spec(boundary: BoundaryOperator, d: f64, mu: f64, h0: f64, amplitude: f64) -> ProblemSpec {
    let u0 = hump(&boundary, h0, amplitude);
    ProblemSpec::new(d, mu, boundary, GrowthProfile::constant(1.0), u0).expect("valid spec")
}

/// Oscillating-tail profile with `gamma = 0` and levels `(m1, m2)`.
pub fn oscillating_tail(m1: f64, m2: f64, period: f64) -> GrowthProfile {
    let core = vec![[0.0, 0.5 * (m1 + m2)], [1.0, 0.5 * (m1 + m2)]];
    GrowthProfile::new(stefan_core::model::ProfileKind::TailPrescribed { gamma: 0.0, m1, m2, period, core })
        .expect("valid tail profile")
}

/// Random piecewise-linear growth rate on `[0, extent]` with values in
/// `[lo, hi]` and at least one positive knot.
pub fn random_profile(rng: &mut ChaCha8Rng, extent: f64, lo: f64, hi: f64) -> GrowthProfile {
    let count = rng.gen_range(2..=6);
    let mut knots: Vec<[f64; 2]> = (0..count)
        .map(|i| [extent * i as f64 / (count - 1) as f64, rng.gen_range(lo..hi)])
        .collect();
    let pick = rng.gen_range(0..count);
    knots[pick][1] = rng.gen_range(0.2 * hi.max(0.1)..hi.max(0.2));
    GrowthProfile::piecewise_linear(knots).expect("valid knots")
}

pub fn random_boundary(rng: &mut ChaCha8Rng) -> BoundaryOperator {
    match rng.gen_range(0..4) {
        0 => BoundaryOperator::neumann(),
        1 => BoundaryOperator::dirichlet(),
        _ => {
            let alpha = rng.gen_range(0.05..0.95);
            BoundaryOperator::new(alpha, 1.0 - alpha).expect("valid weights")
        }
    }
}
