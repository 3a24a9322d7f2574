mod common;

use proptest::prelude::*;
use stefan_core::model::{validate_spec, BoundaryOperator, GrowthProfile, ProblemSpec, ProfileKind};

fn kind_strategy() -> impl Strategy<Value = ProfileKind> {
    prop_oneof![
        (-2.0f64..3.0).prop_map(|c| ProfileKind::Constant { c }),
        prop::collection::vec((0.0f64..10.0, -2.0f64..3.0), 1..6).prop_map(|mut pts| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-6);
            ProfileKind::PiecewiseLinear { knots: pts.into_iter().map(|(x, v)| [x, v]).collect() }
        }),
        (0.1f64..3.0, -1.0f64..=0.0, 0.05f64..1.0, 0.0f64..4.0, 0.2f64..2.0).prop_map(|(rho, background, ramp, a, len)| {
            ProfileKind::Patchy { rho, intervals: vec![[a + 0.5, a + 0.5 + len], [a + 6.0, a + 6.0 + len]], background, ramp }
        }),
        (0.1f64..3.0, -1.9f64..=0.0, 1.5f64..3.0, 0.5f64..2.0, -1.0f64..=0.0).prop_map(|(rho, gamma, k, a, background)| {
            ProfileKind::AlgebraicFloor { rho, gamma, k, anchors: vec![a, 4.0 * k * a], background, ramp: 0.25 }
        }),
        (-1.9f64..=0.0, 0.1f64..1.0, 0.0f64..1.0, 0.5f64..5.0, -1.0f64..2.0).prop_map(|(gamma, m1, spread, period, core)| {
            ProfileKind::TailPrescribed { gamma, m1, m2: m1 + spread, period, core: vec![[0.0, core], [1.0, core]] }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn profile_values_respect_certified_bounds(kind in kind_strategy(), xs in prop::collection::vec(0.0f64..60.0, 32)) {
        let m = GrowthProfile::new(kind).unwrap();
        for x in xs {
            let v = m.eval(x);
            prop_assert!(v <= m.sup_bound() + 1e-12, "m({x}) = {v} above {}", m.sup_bound());
            prop_assert!(v >= m.inf_bound() - 1e-12, "m({x}) = {v} below {}", m.inf_bound());
        }
        if let Some(w) = m.witness() {
            prop_assert!(m.eval(w) > 0.0);
        }
    }

    #[test]
    fn profile_json_round_trip(kind in kind_strategy()) {
        let m = GrowthProfile::new(kind).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: GrowthProfile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn boundary_weights_normalize(alpha in 0.0f64..10.0, beta in 0.0f64..10.0) {
        prop_assume!(alpha + beta > 1e-6);
        let b = BoundaryOperator::new(alpha, beta).unwrap();
        prop_assert!((b.alpha() + b.beta() - 1.0).abs() < 1e-14);
        prop_assert!((b.alpha() * beta - b.beta() * alpha).abs() < 1e-12 * (alpha + beta));
    }

    #[test]
    fn sampled_hump_specs_validate(
        d in 0.05f64..5.0,
        mu in 0.01f64..10.0,
        h0 in 0.2f64..5.0,
        amplitude in 0.01f64..3.0,
        alpha in 0.0f64..=1.0,
    ) {
        let b = BoundaryOperator::new(alpha, 1.0 - alpha).unwrap();
        let u0 = common::hump(&b, h0, amplitude);
        let spec = ProblemSpec::new(d, mu, b, GrowthProfile::constant(1.0), u0).unwrap();
        prop_assert!(validate_spec(&spec).is_empty(), "{:?}", validate_spec(&spec));
        let text = serde_json::to_string(&spec).unwrap();
        let back: ProblemSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn spec_document_rejects_unknown_fields_and_h0_mismatch() {
    let b = BoundaryOperator::neumann();
    let spec = common::logistic_spec(b, 1.0, 1.0, 1.0, 0.5);
    let mut value = serde_json::to_value(&spec).unwrap();
    value["extra"] = serde_json::json!(1);
    assert!(serde_json::from_value::<ProblemSpec>(value.clone()).is_err());
    value.as_object_mut().unwrap().remove("extra");
    value["h0"] = serde_json::json!(2.0);
    assert!(serde_json::from_value::<ProblemSpec>(value).is_err());
}
