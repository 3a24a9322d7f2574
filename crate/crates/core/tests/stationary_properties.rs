use proptest::prelude::*;
use stefan_core::model::{BoundaryOperator, GrowthProfile};
use stefan_core::stationary::{barriers, default_schedule, solve_halfline, solve_interval, HalflineOptions};
use stefan_core::Error;

fn boundary_strategy() -> impl Strategy<Value = BoundaryOperator> {
    prop_oneof![
        Just(BoundaryOperator::neumann()),
        Just(BoundaryOperator::dirichlet()),
        (0.05f64..0.95).prop_map(|a| BoundaryOperator::new(a, 1.0 - a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_sits_between_barriers(
        ell in 4.0f64..10.0,
        d in 0.2f64..1.5,
        b in boundary_strategy(),
        low in -0.5f64..0.5,
        high in 0.8f64..2.0,
    ) {
        let m = GrowthProfile::piecewise_linear(vec![[0.0, high], [ell / 2.0, low], [ell, high]]).unwrap();
        let nodes = 257;
        let (lower, upper, lambda) = match barriers(ell, d, &m, &b, nodes) {
            Ok(v) => v,
            Err(Error::NoPositiveSolution { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert!(lambda < 0.0);
        let sol = solve_interval(ell, d, &m, &b, nodes).unwrap();
        prop_assert!(sol.residual <= sol.tolerance);
        let slack = 1e-9 * upper;
        for (u, lo) in sol.values.iter().zip(&lower) {
            prop_assert!(*u >= lo - slack && *u <= upper + slack);
        }
        prop_assert!(sol.min_interior() > 0.0);
    }

    #[test]
    fn solutions_increase_with_length(ell in 3.0f64..6.0, factor in 1.1f64..2.0, d in 0.3f64..1.0) {
        // Same spacing on both intervals, so the shorter grid embeds in the longer.
        let m = GrowthProfile::constant(1.0);
        let b = BoundaryOperator::new(0.5, 0.5).unwrap();
        let short = solve_interval(ell, d, &m, &b, 201).unwrap();
        let nodes = ((factor * ell) / short.dx()).round() as usize + 1;
        let long = solve_interval((nodes - 1) as f64 * short.dx(), d, &m, &b, nodes).unwrap();
        for (a, c) in short.values.iter().zip(&long.values) {
            prop_assert!(*c >= *a - 1e-9, "{c} < {a}");
        }
    }
}

#[test]
fn interval_solution_converges_at_second_order() {
    let m = GrowthProfile::piecewise_linear(vec![[0.0, 1.0], [2.0, -0.3], [5.0, 1.2]]).unwrap();
    let b = BoundaryOperator::new(0.3, 0.7).unwrap();
    let at_mid = |nodes: usize| {
        let s = solve_interval(5.0, 0.5, &m, &b, nodes).unwrap();
        s.values[(nodes - 1) / 2]
    };
    let (a, c, e) = (at_mid(101), at_mid(201), at_mid(401));
    let ratio = (a - c) / (c - e);
    assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
}

#[test]
fn dirichlet_half_line_dominates_tanh_subsolution() {
    // c tanh(x sqrt(c / (4d))) is a subsolution of d u'' + u (c - u) = 0.
    let (c, d) = (1.5, 0.8);
    let m = GrowthProfile::constant(c);
    let b = BoundaryOperator::dirichlet();
    let schedule = default_schedule(d, &m, &b, 4).unwrap();
    let sol = solve_halfline(d, &m, &b, &schedule, &HalflineOptions::default()).unwrap();
    let rate = (c / (4.0 * d)).sqrt();
    let window = 0.5 * schedule[0];
    for (x, u) in sol.nodes().iter().zip(&sol.values).filter(|(x, _)| **x <= window) {
        assert!(*u >= c * (x * rate).tanh() - 1e-6, "x = {x}: {u}");
        assert!(*u <= c + 1e-9);
    }
}

#[test]
fn short_intervals_have_no_positive_solution() {
    let m = GrowthProfile::constant(1.0);
    let b = BoundaryOperator::dirichlet();
    // Critical length pi sqrt(d / c) = pi.
    assert!(matches!(solve_interval(3.0, 1.0, &m, &b, 257), Err(Error::NoPositiveSolution { .. })));
    assert!(solve_interval(3.3, 1.0, &m, &b, 257).is_ok());
}
