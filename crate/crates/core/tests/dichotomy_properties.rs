mod common;

use stefan_core::dichotomy::{classify, convergence_check, find_mu_star, Verdict, TOL_MU};
use stefan_core::model::{BoundaryOperator, GrowthProfile, ProblemSpec};
use stefan_core::Error;

const N: usize = 100;

fn subcritical() -> ProblemSpec {
    // h0 = 0.5 below h* = pi/2 for the Neumann logistic problem.
    common::logistic_spec(BoundaryOperator::neumann(), 1.0, 1.0, 0.5, 0.5)
}

#[test]
fn verdicts_are_monotone_in_mu() {
    let base = subcritical();
    let verdicts: Vec<Verdict> = [1e-3, 1e-1, 1.0, 1e1, 1e2]
        .iter()
        .map(|&mu| classify(&base.with_mu(mu).unwrap(), 50.0, N).unwrap().verdict)
        .collect();
    assert!(!verdicts.contains(&Verdict::Undetermined), "{verdicts:?}");
    let first_spread = verdicts.iter().position(|v| *v == Verdict::Spreading).unwrap_or(verdicts.len());
    assert!(verdicts[first_spread..].iter().all(|v| *v == Verdict::Spreading), "{verdicts:?}");
    assert_eq!(verdicts[0], Verdict::Vanishing);
    assert_eq!(*verdicts.last().unwrap(), Verdict::Spreading);
}

#[test]
fn shrinking_initial_data_never_turns_vanishing_into_spreading() {
    for mu in [0.5, 2.0] {
        let spec = subcritical().with_mu(mu).unwrap();
        let out = classify(&spec, 50.0, N).unwrap();
        if out.verdict == Verdict::Vanishing {
            let smaller = spec.with_u0(spec.u0().scaled(0.1)).unwrap();
            assert_eq!(classify(&smaller, 50.0, N).unwrap().verdict, Verdict::Vanishing, "mu = {mu}");
        }
    }
}

#[test]
fn spreading_ends_with_negative_principal_eigenvalue() {
    let spec = common::logistic_spec(BoundaryOperator::new(0.4, 0.6).unwrap(), 0.7, 2.0, 1.5, 0.6);
    let out = classify(&spec, 50.0, N).unwrap();
    assert_eq!(out.verdict, Verdict::Spreading);
    let h_star = out.h_star.unwrap();
    assert!(out.h_end > h_star + out.margin);
    assert!(out.lambda_end.unwrap() < 0.0);
}

#[test]
fn vanishing_ends_below_critical_length() {
    let out = classify(&subcritical().with_mu(1e-3).unwrap(), 50.0, N).unwrap();
    assert_eq!(out.verdict, Verdict::Vanishing);
    assert!(out.h_end <= out.h_star.unwrap() + out.margin);
    assert!(out.lambda_end.unwrap() > 0.0);
}

#[test]
fn convergence_check_requires_spreading() {
    let spec = subcritical().with_mu(1e-3).unwrap();
    assert!(matches!(convergence_check(&spec, &[5.0, 10.0], 2.0, N), Err(Error::Precondition(_))));
}

#[test]
fn threshold_search_rejects_hostile_growth() {
    // With m <= 0 the critical length is never attained.
    let b = BoundaryOperator::neumann();
    let spec = ProblemSpec::new(1.0, 1.0, b, GrowthProfile::piecewise_linear(vec![[0.0, 0.2], [0.5, -1.0]]).unwrap(), common::hump(&b, 0.5, 0.5))
        .unwrap();
    assert!(matches!(find_mu_star(&spec, 20.0, (1e-3, 1e2), TOL_MU, N), Err(Error::BracketInvalid(_))));
}
