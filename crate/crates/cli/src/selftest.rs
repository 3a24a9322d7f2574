//! Bundled invariant checks: closed forms plus a few randomized runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use stefan_core::eigen::{critical_length, principal_eigenvalue, EigenOptions};
use stefan_core::frontfix::{simulate, IntegratorOptions, OutputSchedule};
use stefan_core::model::{BoundaryOperator, GrowthProfile, InitialProfile, ProblemSpec};
use stefan_core::semiwave::semiwave_auto;
use stefan_core::stationary::{barriers, solve_interval};

use crate::commands::Report;
use crate::error::CliError;

type Check = std::result::Result<String, String>;

fn closed_form_eigenvalues() -> Check {
    let one = GrowthProfile::constant(1.0);
    let n = principal_eigenvalue(FRAC_PI_2, 1.0, &one, &BoundaryOperator::neumann(), 256).map_err(|e| e.to_string())?;
    let d = principal_eigenvalue(PI, 1.0, &one, &BoundaryOperator::dirichlet(), 256).map_err(|e| e.to_string())?;
    let worst = n.lambda1.abs().max(d.lambda1.abs());
    if worst <= 1e-6 {
        Ok(format!("|lambda1| <= {worst:.1e}"))
    } else {
        Err(format!("lambda1 = {} (Neumann), {} (Dirichlet)", n.lambda1, d.lambda1))
    }
}

fn critical_length_closed_form() -> Check {
    let h = critical_length(1.0, &GrowthProfile::constant(1.0), &BoundaryOperator::neumann(), &EigenOptions::default())
        .map_err(|e| e.to_string())?;
    let err = (h - FRAC_PI_2).abs();
    if err <= 1e-5 {
        Ok(format!("h* error {err:.1e}"))
    } else {
        Err(format!("h* = {h}"))
    }
}

fn standing_wave_slope() -> Check {
    let r = semiwave_auto(0.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let err = (r.slope0 - 3f64.sqrt().recip()).abs();
    if err <= 1e-4 {
        Ok(format!("slope error {err:.1e}"))
    } else {
        Err(format!("slope0 = {}", r.slope0))
    }
}

fn stationary_barriers() -> Check {
    let m = GrowthProfile::piecewise_linear(vec![[0.0, 1.0], [4.0, -0.5], [8.0, 1.0]]).map_err(|e| e.to_string())?;
    let b = BoundaryOperator::new(0.5, 0.5).map_err(|e| e.to_string())?;
    let sol = solve_interval(8.0, 1.0, &m, &b, 257).map_err(|e| e.to_string())?;
    let (lower, upper, _) = barriers(8.0, 1.0, &m, &b, 257).map_err(|e| e.to_string())?;
    let inside = sol.values.iter().zip(&lower).all(|(u, lo)| *u >= lo - 1e-9 && *u <= upper + 1e-9);
    if inside && sol.residual <= sol.tolerance {
        Ok(format!("residual {:.1e}", sol.residual))
    } else {
        Err(format!("barriers violated or residual {:.1e} above {:.1e}", sol.residual, sol.tolerance))
    }
}

fn random_runs(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for run in 0..3 {
        let alpha: f64 = rng.gen_range(0.0..=1.0);
        let b = BoundaryOperator::new(alpha, 1.0 - alpha).map_err(|e| e.to_string())?;
        let h0 = rng.gen_range(0.5..2.5);
        let knots = (0..4).map(|i| [i as f64 * h0, rng.gen_range(-0.5..1.5)]).chain([[4.0 * h0, 1.0]]).collect();
        let m = GrowthProfile::piecewise_linear(knots).map_err(|e| e.to_string())?;
        let amp = rng.gen_range(0.1..1.5);
        let u0 = InitialProfile::sampled(h0, 64, &b, |x| amp * (FRAC_PI_2 * x / h0).cos()).map_err(|e| e.to_string())?;
        let spec = ProblemSpec::new(rng.gen_range(0.3..2.0), rng.gen_range(0.1..5.0), b, m, u0).map_err(|e| e.to_string())?;
        let traj = simulate(&spec, 2.0, IntegratorOptions { n: 64, ..Default::default() }, &OutputSchedule::every(0.5))
            .map_err(|e| format!("run {run}: {e}"))?;
        if !traj.stats.density_bound_holds() {
            return Err(format!("run {run}: density bound violated ({:?})", traj.stats));
        }
    }
    Ok(format!("3 runs, seed {seed}"))
}

pub(crate) fn run(seed: u64) -> Result<Report, (Report, CliError)> {
    let checks: [(&str, Check); 5] = [
        ("eigenvalue closed forms", closed_form_eigenvalues()),
        ("critical length", critical_length_closed_form()),
        ("standing semi-wave slope", standing_wave_slope()),
        ("stationary barriers", stationary_barriers()),
        ("randomized solution bounds", random_runs(seed)),
    ];
    let mut report = Report::default();
    let mut failed = 0;
    for (name, result) in checks {
        let line = match result {
            Ok(detail) => format!("ok   {name}: {detail}\n"),
            Err(detail) => {
                failed += 1;
                format!("FAIL {name}: {detail}\n")
            }
        };
        report.stdout.push_str(&line);
    }
    if failed > 0 {
        Err((report, CliError::Failed(format!("{failed} self-test check(s) failed"))))
    } else {
        Ok(report)
    }
}
