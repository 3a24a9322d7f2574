//! Subcommand implementations. Each produces a [`Report`]; persistence and
//! the manifest are handled uniformly by [`execute`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use stefan_core::dichotomy::{classify, find_mu_star, speed_estimate, Outcome};
use stefan_core::eigen::{critical_diffusion, critical_length, principal_eigenvalue, EigenOptions};
use stefan_core::frontfix::{simulate, IntegratorOptions, OutputSchedule, Trajectory, TrajectorySample};
use stefan_core::model::{BoundaryOperator, GrowthProfile, InitialProfile, ProblemSpec, ProfileKind};
use stefan_core::semiwave::{find_k0, semiwave_auto, speed_bounds};
use stefan_core::stationary::{default_schedule, solve_halfline, solve_interval, tail_report, HalflineOptions};

use crate::args::*;
use crate::error::CliError;
use crate::output::{csv, fmt_f64, profile_csv, to_json, Manifest, OutputDir};
use crate::selftest;

/// Everything a run read from disk, after overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<GrowthProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specs: Option<Vec<ProblemSpec>>,
}

#[derive(Default)]
pub(crate) struct Report {
    pub stdout: String,
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn json<T: Serialize>(value: &T) -> Self {
        Report { stdout: to_json(value), files: Vec::new() }
    }

    pub fn file(mut self, name: impl Into<String>, contents: String) -> Self {
        self.files.push((name.into(), contents));
        self
    }
}

/// Output directory of `cmd`, if it writes one.
fn destination(cmd: &Command) -> Option<(&Path, bool)> {
    fn opt(o: &OutArgs) -> Option<(&Path, bool)> {
        o.out.as_deref().map(|p| (p, o.force))
    }
    match cmd {
        Command::Simulate(a) => Some((&a.out, a.force)),
        Command::Stationary(a) => Some((&a.out, a.force)),
        Command::Sweep(a) => Some((&a.out, a.force)),
        Command::Eigen(a) => opt(&a.out),
        Command::CriticalLength(a) => opt(&a.out),
        Command::CriticalDiffusion(a) => opt(&a.out),
        Command::Semiwave(a) => opt(&a.out),
        Command::Classify(a) => opt(&a.out),
        Command::MuStar(a) => opt(&a.out),
        Command::Speed(a) => opt(&a.out),
        Command::Selftest(_) | Command::Rerun(_) => None,
    }
}

/// Point `cmd` at a new output directory; commands that must write one
/// refuse `None`.
fn redirect(cmd: &mut Command, out: Option<PathBuf>, force: bool) -> Result<(), CliError> {
    let required = |slot: &mut PathBuf, flag: &mut bool| match &out {
        Some(p) => {
            *slot = p.clone();
            *flag = force;
            Ok(())
        }
        None => Err(CliError::Usage("this run writes an output directory: pass --out".into())),
    };
    let optional = |o: &mut OutArgs| {
        o.out = out.clone();
        o.force = force;
    };
    match cmd {
        Command::Simulate(a) => required(&mut a.out, &mut a.force)?,
        Command::Stationary(a) => required(&mut a.out, &mut a.force)?,
        Command::Sweep(a) => required(&mut a.out, &mut a.force)?,
        Command::Eigen(a) => optional(&mut a.out),
        Command::CriticalLength(a) => optional(&mut a.out),
        Command::CriticalDiffusion(a) => optional(&mut a.out),
        Command::Semiwave(a) => optional(&mut a.out),
        Command::Classify(a) => optional(&mut a.out),
        Command::MuStar(a) => optional(&mut a.out),
        Command::Speed(a) => optional(&mut a.out),
        Command::Selftest(_) => {}
        Command::Rerun(_) => return Err(CliError::Usage("a manifest cannot record a rerun".into())),
    }
    Ok(())
}

/// Run `cmd`, print its report and persist it (with a manifest) when it has
/// an output directory. `preloaded` replaces every file read.
pub fn execute(cmd: &Command, preloaded: Option<Inputs>, argv: Vec<String>) -> Result<(), CliError> {
    if let Command::Rerun(a) = cmd {
        return rerun(a, argv);
    }
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let dest = destination(cmd);
    if let Some((path, false)) = dest {
        if path.exists() {
            return Err(CliError::Usage(format!(
                "output directory {} already exists (pass --force to replace it)",
                path.display()
            )));
        }
    }
    let replay = preloaded.is_some();
    let mut inputs = preloaded.unwrap_or_default();
    let outcome = dispatch(cmd, &mut inputs, replay);
    let (report, failure) = match outcome {
        Ok(r) => (r, None),
        Err(Partial { report: Some(r), error }) => (r, Some(error)),
        Err(Partial { report: None, error }) => return Err(error),
    };
    emit(&report.stdout)?;
    if let Some((path, force)) = dest {
        let dir = OutputDir::create(path, force)?;
        for (name, contents) in &report.files {
            dir.write(name, contents)?;
        }
        let manifest = Manifest {
            tool: "stefan",
            version: env!("CARGO_PKG_VERSION"),
            argv,
            config: cmd,
            inputs: &inputs,
            started_unix,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
        };
        dir.write_json("manifest.json", &manifest)?;
        let written = dir.commit()?;
        log::info!("wrote {}", written.display());
    }
    failure.map_or(Ok(()), Err)
}

/// Write to stdout; a closed pipe (as in `| head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

/// Error that may still carry output worth persisting.
struct Partial {
    report: Option<Report>,
    error: CliError,
}

impl From<CliError> for Partial {
    fn from(error: CliError) -> Self {
        Partial { report: None, error }
    }
}

impl From<stefan_core::Error> for Partial {
    fn from(e: stefan_core::Error) -> Self {
        CliError::from(e).into()
    }
}

fn dispatch(cmd: &Command, inputs: &mut Inputs, replay: bool) -> Result<Report, Partial> {
    Ok(match cmd {
        Command::Simulate(a) => run_simulate(a, inputs, replay)?,
        Command::Eigen(a) => run_eigen(a, inputs, replay)?,
        Command::CriticalLength(a) => run_critical_length(a, inputs, replay)?,
        Command::CriticalDiffusion(a) => run_critical_diffusion(a, inputs, replay)?,
        Command::Stationary(a) => run_stationary(a, inputs, replay)?,
        Command::Semiwave(a) => run_semiwave(a)?,
        Command::Classify(a) => run_classify(a, inputs, replay)?,
        Command::MuStar(a) => run_mu_star(a, inputs, replay)?,
        Command::Speed(a) => run_speed(a, inputs, replay)?,
        Command::Sweep(a) => return run_sweep(a, inputs, replay),
        Command::Selftest(a) => return selftest::run(a.seed).map_err(|(r, e)| Partial { report: Some(r), error: e }),
        Command::Rerun(_) => unreachable!("handled by execute"),
    })
}

fn rerun(args: &RerunArgs, argv: Vec<String>) -> Result<(), CliError> {
    #[derive(Deserialize)]
    struct Recorded {
        config: Command,
        #[serde(default)]
        inputs: Inputs,
    }
    let text = read_input(&args.manifest)?;
    let recorded: Recorded = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", args.manifest.display())))?;
    let mut cmd = recorded.config;
    redirect(&mut cmd, args.out.clone(), args.force)?;
    execute(&cmd, Some(recorded.inputs), argv)
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Usage(format!("{}: file not found", path.display())),
        _ => CliError::Usage(format!("{}: {e}", path.display())),
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Load the problem, apply overrides and validate it, unless a replay
/// already supplied the resolved problem.
fn resolve_spec(args: &SpecArgs, inputs: &mut Inputs, replay: bool) -> Result<ProblemSpec, CliError> {
    if replay {
        return inputs.spec.clone().ok_or_else(|| CliError::Usage("manifest does not record a problem".into()));
    }
    let mut spec: ProblemSpec = parse_json(&args.spec)?;
    if let Some(d) = args.d {
        spec = spec.with_d(d)?;
    }
    if let Some(mu) = args.mu {
        spec = spec.with_mu(mu)?;
    }
    if let Some(h0) = args.h0 {
        spec = spec.with_u0(InitialProfile::new(h0, spec.u0().samples.clone())?)?;
    }
    if args.alpha.is_some() || args.beta.is_some() {
        let b = spec.boundary();
        let boundary = BoundaryOperator::new(args.alpha.unwrap_or(b.alpha()), args.beta.unwrap_or(b.beta()))?;
        spec = ProblemSpec::new(spec.d(), spec.mu(), boundary, spec.m().clone(), spec.u0().clone())?;
    }
    spec.ensure_valid()?;
    inputs.spec = Some(spec.clone());
    Ok(spec)
}

fn resolve_profile(args: &ProfileArgs, inputs: &mut Inputs, replay: bool) -> Result<(GrowthProfile, BoundaryOperator), CliError> {
    let boundary = BoundaryOperator::new(args.alpha, args.beta)?;
    let m = match (replay, &args.m_file, args.m_const) {
        (true, _, _) => inputs.m.clone().ok_or_else(|| CliError::Usage("manifest does not record a growth profile".into()))?,
        (false, Some(path), _) => parse_json(path)?,
        (false, None, Some(c)) => GrowthProfile::constant(c),
        (false, None, None) => return Err(CliError::Usage("pass --m-file or --m-const".into())),
    };
    inputs.m = Some(m.clone());
    Ok((m, boundary))
}

const SAMPLE_HEADER: [&str; 6] = ["t", "h", "hprime", "max_u", "mass", "mass_residual"];

fn samples_csv(samples: &[TrajectorySample]) -> String {
    csv(&SAMPLE_HEADER, samples.iter().map(|s| vec![s.t, s.h, s.hprime, s.max_u, s.mass, s.mass_residual]))
}

fn run_simulate(a: &SimulateArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let spec = resolve_spec(&a.spec, inputs, replay)?;
    let times = a.snapshots.clone().unwrap_or_else(|| vec![0.0, a.t_end]);
    let schedule = OutputSchedule::every(a.sample_interval).with_snapshots(times);
    let opts = IntegratorOptions { n: a.n, dt_max: a.dt_max, ..IntegratorOptions::default() };
    let traj = simulate(&spec, a.t_end, opts, &schedule)?;
    let last = traj.last();
    let summary = json!({
        "t_end": last.t,
        "h_end": last.h,
        "hprime_end": last.hprime,
        "max_u_end": last.max_u,
        "steps": traj.stats.steps,
        "rejections": traj.stats.rejections,
    });
    let mut report = Report::json(&summary)
        .file("trajectory.csv", samples_csv(&traj.samples))
        .file("summary.json", to_json(&summary));
    for snap in &traj.snapshots {
        report = report.file(format!("profile_t{}.csv", snap.t), csv(&["x", "u"], snap.x_nodes().into_iter().zip(&snap.w).map(|(x, w)| vec![x, *w])));
    }
    Ok(report)
}

fn eigen_options(grid_n: usize) -> EigenOptions {
    EigenOptions { grid_n, ..EigenOptions::default() }
}

fn run_eigen(a: &EigenArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let (m, b) = resolve_profile(&a.profile, inputs, replay)?;
    let r = principal_eigenvalue(a.ell, a.d, &m, &b, a.grid_n)?;
    let summary = json!({ "lambda1": r.lambda1, "ell": r.ell, "grid_n": r.grid_n, "residual": r.residual });
    Ok(Report::json(&summary)
        .file("eigen.json", to_json(&summary))
        .file("eigenfunction.csv", profile_csv("phi", r.ell, &r.phi)))
}

fn run_critical_length(a: &CriticalLengthArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let (m, b) = resolve_profile(&a.profile, inputs, replay)?;
    let opts = EigenOptions { ell_max: a.ell_max, ..eigen_options(a.grid_n) };
    let h_star = critical_length(a.d, &m, &b, &opts)?;
    let summary = json!({ "h_star": h_star, "d": a.d, "grid_n": opts.nodes_for(h_star) });
    Ok(Report::json(&summary).file("critical_length.json", to_json(&summary)))
}

fn run_critical_diffusion(a: &CriticalDiffusionArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let (m, b) = resolve_profile(&a.profile, inputs, replay)?;
    let opts = eigen_options(a.grid_n);
    let d_star = critical_diffusion(a.h0, &m, &b, &opts)?;
    let summary = json!({ "d_star": d_star, "h0": a.h0, "grid_n": opts.nodes_for(a.h0) });
    Ok(Report::json(&summary).file("critical_diffusion.json", to_json(&summary)))
}

fn tail_gamma(m: &GrowthProfile) -> f64 {
    match m.kind() {
        ProfileKind::TailPrescribed { gamma, .. } | ProfileKind::AlgebraicFloor { gamma, .. } => *gamma,
        _ => 0.0,
    }
}

fn run_stationary(a: &StationaryArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let spec = resolve_spec(&a.spec, inputs, replay)?;
    let (d, m, b) = (spec.d(), spec.m(), spec.boundary());
    let (sol, default_window) = match a.ell {
        Some(ell) => {
            let nodes = a.grid_n.unwrap_or_else(|| EigenOptions::default().nodes_for(ell));
            (solve_interval(ell, d, m, b, nodes)?, None)
        }
        None => {
            let schedule = default_schedule(d, m, b, a.truncations)?;
            let opts = HalflineOptions::default();
            let window = opts.window.unwrap_or(0.5 * schedule[0]);
            (solve_halfline(d, m, b, &schedule, &opts)?, Some((0.75 * window, window)))
        }
    };
    let window = match &a.tail_window {
        Some(w) => Some((w[0], w[1])),
        None => default_window,
    };
    let tail = window.map(|w| tail_report(&sol, tail_gamma(m), w)).transpose()?;
    let summary = json!({
        "ell_or_L": sol.extent,
        "residual": sol.residual,
        "min_u_interior": sol.min_interior(),
        "tail_liminf": tail.map(|t| t.0),
        "tail_limsup": tail.map(|t| t.1),
        "tail_window": window,
        "domain": sol.domain,
        "history": sol.history,
    });
    Ok(Report::json(&summary)
        .file("solution.csv", profile_csv("u", sol.extent, &sol.values))
        .file("summary.json", to_json(&summary)))
}

fn run_semiwave(a: &SemiwaveArgs) -> Result<Report, CliError> {
    if let Some(k) = a.k {
        let r = semiwave_auto(k, a.c, a.d)?;
        let table = profile_csv("w", r.l_trunc, &r.profile);
        let summary = json!({ "k": k, "slope0": r.slope0, "L_trunc": r.l_trunc, "residual": r.residual });
        return Ok(Report { stdout: table.clone(), files: Vec::new() }
            .file("profile.csv", table)
            .file("semiwave.json", to_json(&summary)));
    }
    let mu = a.mu.ok_or_else(|| CliError::Usage("pass --mu or --k".into()))?;
    let k0 = find_k0(mu, a.c, a.d)?;
    let r = semiwave_auto(k0, a.c, a.d)?;
    let summary = json!({ "k0": k0, "slope0": r.slope0, "L_trunc": r.l_trunc, "residual": r.residual });
    Ok(Report::json(&summary)
        .file("semiwave.json", to_json(&summary))
        .file("profile.csv", profile_csv("w", r.l_trunc, &r.profile)))
}

/// Outcome without its sample list.
fn outcome_summary(o: &Outcome) -> serde_json::Value {
    json!({
        "verdict": o.verdict,
        "t_decided": o.t_decided,
        "h_end": o.h_end,
        "max_u_end": o.max_u_end,
        "h_star": o.h_star,
        "margin": o.margin,
        "lambda_end": o.lambda_end,
    })
}

fn run_classify(a: &ClassifyArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let spec = resolve_spec(&a.spec, inputs, replay)?;
    let out = classify(&spec, a.t_max, a.n)?;
    let summary = outcome_summary(&out);
    Ok(Report::json(&summary).file("outcome.json", to_json(&summary)).file("samples.csv", samples_csv(&out.samples)))
}

fn run_mu_star(a: &MuStarArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let spec = resolve_spec(&a.spec, inputs, replay)?;
    let search = find_mu_star(&spec, a.t_max, (a.mu_lo, a.mu_hi), a.tol_mu, a.n)?;
    Ok(Report::json(&search).file("mu_star.json", to_json(&search)))
}

/// Far-field levels `(m1, m2)` read off the profile, when it has them.
fn far_field_levels(m: &GrowthProfile) -> Option<(f64, f64)> {
    match m.kind() {
        ProfileKind::TailPrescribed { gamma, m1, m2, .. } if *gamma == 0.0 => Some((*m1, *m2)),
        ProfileKind::Constant { c } if *c > 0.0 => Some((*c, *c)),
        _ => None,
    }
}

fn run_speed(a: &SpeedArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, CliError> {
    let spec = resolve_spec(&a.spec, inputs, replay)?;
    let levels = match &a.levels {
        Some(v) => Some((v[0], v[1])),
        None => far_field_levels(spec.m()),
    };
    let bounds = levels.map(|(m1, m2)| speed_bounds(spec.mu(), m1, m2, spec.d())).transpose()?;
    let opts = IntegratorOptions { n: a.n, ..IntegratorOptions::default() };
    let traj: Trajectory = simulate(&spec, a.t_end, opts, &OutputSchedule::every(0.1))?;
    let est = speed_estimate(&traj, a.fraction, bounds, a.delta)?;
    let summary = json!({
        "slope": est.slope,
        "slope_quarter": est.slope_quarter,
        "t_from": est.t_from,
        "t_to": est.t_to,
        "levels": levels,
        "k_bounds": bounds,
        "band": est.band,
        "in_band": est.in_band,
        "h_end": traj.last().h,
    });
    Ok(Report::json(&summary).file("speed.json", to_json(&summary)).file("trajectory.csv", samples_csv(&traj.samples)))
}

fn run_sweep(a: &SweepArgs, inputs: &mut Inputs, replay: bool) -> Result<Report, Partial> {
    let specs: Vec<ProblemSpec> = if replay {
        inputs.specs.clone().ok_or_else(|| CliError::Usage("manifest does not record a sweep".into()))?
    } else {
        parse_json(&a.specs)?
    };
    for (i, s) in specs.iter().enumerate() {
        s.ensure_valid().map_err(|e| CliError::Usage(format!("run {i}: {e}")))?;
    }
    inputs.specs = Some(specs.clone());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Failed(e.to_string()))?;
    // Collected in input order, so the table does not depend on scheduling.
    let results: Vec<_> = pool.install(|| specs.par_iter().map(|s| classify(s, a.t_max, a.n)).collect());

    let mut table = String::from("run_id,verdict,t_decided,h_end,max_u_end,mu,d,h0\n");
    let mut report = Report::default();
    let mut failed = 0;
    for (id, (spec, result)) in specs.iter().zip(&results).enumerate() {
        let dir = format!("run_{id:04}");
        report = report.file(format!("{dir}/spec.json"), to_json(spec));
        let (verdict, numbers) = match result {
            Ok(o) => {
                report = report
                    .file(format!("{dir}/outcome.json"), to_json(&outcome_summary(o)))
                    .file(format!("{dir}/samples.csv"), samples_csv(&o.samples));
                (o.verdict.to_string(), [o.t_decided, o.h_end, o.max_u_end])
            }
            Err(e) => {
                failed += 1;
                log::warn!("run {id} failed: {e}");
                report = report.file(format!("{dir}/error.txt"), format!("{e}\n"));
                ("error".to_string(), [f64::NAN; 3])
            }
        };
        let cells: Vec<String> = numbers.into_iter().chain([spec.mu(), spec.d(), spec.h0()]).map(fmt_f64).collect();
        table.push_str(&format!("{id},{verdict},{}\n", cells.join(",")));
    }
    report.stdout = table.clone();
    report = report.file("sweep.csv", table);
    if failed > 0 {
        let error = CliError::Failed(format!("{failed} of {} runs failed", specs.len()));
        return Err(Partial { report: Some(report), error });
    }
    Ok(report)
}
