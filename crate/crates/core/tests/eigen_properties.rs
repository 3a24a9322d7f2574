mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use stefan_core::eigen::{
    critical_diffusion, critical_length, lambda_infinity_probe, principal_eigenvalue, rayleigh_quotient, EigenOptions,
    ProbeVerdict,
};
use stefan_core::model::{BoundaryOperator, GrowthProfile};

fn boundary_strategy() -> impl Strategy<Value = BoundaryOperator> {
    prop_oneof![
        Just(BoundaryOperator::neumann()),
        Just(BoundaryOperator::dirichlet()),
        (0.05f64..0.95).prop_map(|a| BoundaryOperator::new(a, 1.0 - a).unwrap()),
    ]
}

fn profile_strategy(extent: f64) -> impl Strategy<Value = GrowthProfile> {
    prop::collection::vec(-1.0f64..2.0, 2..6).prop_map(move |values| {
        let n = values.len();
        let knots = values.iter().enumerate().map(|(i, v)| [extent * i as f64 / (n - 1) as f64, *v]).collect();
        GrowthProfile::piecewise_linear(knots).unwrap()
    })
}

/// Smallest eigenvalue of the symmetric form of the operator, built
/// independently and diagonalized densely.
fn dense_symmetric(ell: f64, d: f64, m: &GrowthProfile, b: &BoundaryOperator, nodes: usize) -> f64 {
    let dx = ell / (nodes - 1) as f64;
    let c = d / (dx * dx);
    let first = usize::from(b.is_dirichlet());
    let k = nodes - 1 - first;
    let mut a = DMatrix::<f64>::zeros(k, k);
    for r in 0..k {
        a[(r, r)] = 2.0 * c - m.eval((first + r) as f64 * dx);
        if r + 1 < k {
            a[(r, r + 1)] = -c;
            a[(r + 1, r)] = -c;
        }
    }
    if first == 0 {
        a[(0, 0)] += 2.0 * d * b.robin_ratio() / dx;
        let s = -(2.0f64).sqrt() * c;
        a[(0, 1)] = s;
        a[(1, 0)] = s;
    }
    a.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bisection_matches_dense_eigensolver(
        ell in 0.5f64..6.0,
        d in 0.05f64..3.0,
        nodes in 16usize..=128,
        b in boundary_strategy(),
        seed in 0u64..1000,
    ) {
        let m = common::random_profile(&mut rand::SeedableRng::seed_from_u64(seed), ell, -1.0, 2.0);
        let ours = principal_eigenvalue(ell, d, &m, &b, nodes).unwrap().lambda_grid;
        let dense = dense_symmetric(ell, d, &m, &b, nodes);
        prop_assert!((ours - dense).abs() <= 1e-10 * dense.abs().max(1.0), "{ours} vs {dense}");
    }

    #[test]
    fn rayleigh_quotient_bounds_eigenvalue_from_above(
        ell in 0.5f64..5.0,
        d in 0.1f64..2.0,
        b in boundary_strategy(),
        m in profile_strategy(5.0),
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
    ) {
        let nodes = 257;
        let r = principal_eigenvalue(ell, d, &m, &b, nodes).unwrap();
        // Admissible trial functions: a positive bump plus a few sine modes,
        // adjusted to satisfy the boundary relation at 0.
        let dx = ell / (nodes - 1) as f64;
        let mut trial: Vec<f64> = (0..nodes)
            .map(|i| {
                let x = i as f64 * dx;
                let s = x / ell;
                let mut v = 1.0 - s * s;
                for (j, c) in coeffs.iter().enumerate() {
                    v += 0.3 * c * (std::f64::consts::PI * (j + 1) as f64 * s).sin() * (1.0 - s);
                }
                v
            })
            .collect();
        trial[nodes - 1] = 0.0;
        if b.is_dirichlet() {
            trial[0] = 0.0;
        }
        let q_trial = rayleigh_quotient(&trial, ell, d, &m, &b).unwrap();
        let q_phi = rayleigh_quotient(&r.phi, ell, d, &m, &b).unwrap();
        prop_assert!(q_trial >= r.lambda_grid - 1e-9 * r.lambda_grid.abs().max(1.0));
        // The discrete eigenvector attains the discrete eigenvalue.
        prop_assert!((q_phi - r.lambda_grid).abs() <= 1e-8 * r.lambda_grid.abs().max(1.0), "{q_phi} vs {}", r.lambda_grid);
    }

    #[test]
    fn eigenvalue_increases_with_diffusion(
        ell in 0.5f64..5.0,
        d in 0.05f64..2.0,
        factor in 1.05f64..3.0,
        b in boundary_strategy(),
        m in profile_strategy(5.0),
    ) {
        let a = principal_eigenvalue(ell, d, &m, &b, 129).unwrap().lambda_grid;
        let c = principal_eigenvalue(ell, factor * d, &m, &b, 129).unwrap().lambda_grid;
        prop_assert!(c > a);
    }

    #[test]
    fn eigenfunction_positive_and_normalized(
        ell in 0.5f64..5.0,
        d in 0.1f64..2.0,
        b in boundary_strategy(),
        m in profile_strategy(5.0),
    ) {
        let r = principal_eigenvalue(ell, d, &m, &b, 200).unwrap();
        let peak = r.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((peak - 1.0).abs() < 1e-12);
        prop_assert!(r.phi[1..199].iter().all(|v| *v > 0.0));
        prop_assert_eq!(r.phi[199], 0.0);
    }
}

#[test]
fn critical_length_is_a_root() {
    let m = GrowthProfile::piecewise_linear(vec![[0.0, 1.5], [2.0, -0.5], [4.0, 1.0]]).unwrap();
    let b = BoundaryOperator::new(0.3, 0.7).unwrap();
    let opts = EigenOptions::default();
    let h = critical_length(0.7, &m, &b, &opts).unwrap();
    let lam = principal_eigenvalue(h, 0.7, &m, &b, opts.nodes_for(h)).unwrap().lambda1;
    assert!(lam.abs() < 1e-8, "{lam}");
    let d = critical_diffusion(h, &m, &b, &opts).unwrap();
    assert!((d - 0.7).abs() < 1e-7, "{d}");
}

#[test]
fn dirichlet_critical_lengths_scale_with_sqrt_d() {
    let m = GrowthProfile::constant(2.0);
    let b = BoundaryOperator::dirichlet();
    let opts = EigenOptions::default();
    for d in [0.25, 1.0, 9.0] {
        let h = critical_length(d, &m, &b, &opts).unwrap();
        let exact = std::f64::consts::PI * (d / 2.0f64).sqrt();
        assert!((h - exact).abs() < 1e-5 * exact.max(1.0), "d = {d}: {h} vs {exact}");
    }
}

#[test]
fn hostile_far_field_probe_is_inconclusive() {
    let m = GrowthProfile::piecewise_linear(vec![[0.0, 0.2], [0.5, -1.0]]).unwrap();
    let probe = lambda_infinity_probe(1.0, &m, &BoundaryOperator::dirichlet(), &[1.0, 2.0, 4.0, 8.0], &EigenOptions::default())
        .unwrap();
    assert_eq!(probe.verdict, ProbeVerdict::Inconclusive);
    assert_eq!(probe.values.len(), 4);
    assert!(probe.values.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
}
