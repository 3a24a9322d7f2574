use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stefan_core::model::{BoundaryOperator, GrowthProfile, InitialProfile, ProblemSpec};

fn stefan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stefan")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn spec(h0: f64, mu: f64) -> ProblemSpec {
    let b = BoundaryOperator::neumann();
    let u0 = InitialProfile::sampled(h0, 128, &b, |x| 0.5 * (FRAC_PI_2 * x / h0).cos()).unwrap();
    ProblemSpec::new(1.0, mu, b, GrowthProfile::constant(1.0), u0).unwrap()
}

fn write_spec(dir: &Path, name: &str, s: &ProblemSpec) {
    fs::write(dir.join(name), serde_json::to_string(s).unwrap()).unwrap();
}

#[test]
fn eigen_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stefan(&["eigen", "--ell", "1.5707963", "--d", "1", "--alpha", "0", "--beta", "1", "--m-const", "1"], tmp.path());
    let v = json_stdout(&out);
    assert!(v["lambda1"].as_f64().unwrap().abs() < 1e-6, "{v}");
    assert_eq!(v["grid_n"], 256);
    assert!(v["residual"].is_number());
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stefan(&["classify", "--spec", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
    assert_eq!(stefan(&["eigen", "--bogus"], tmp.path()).status.code(), Some(64));
    assert_eq!(stefan(&["frobnicate"], tmp.path()).status.code(), Some(64));
    assert_eq!(stefan(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn domain_and_numerical_failures_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // No critical length when m < 0 everywhere.
    let out = stefan(&["critical-length", "--d", "1", "--m-const", "-1"], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    // A single truncation cannot pass the Cauchy test.
    write_spec(tmp.path(), "spec.json", &spec(2.0, 1.0));
    let out = stefan(&["stationary", "--spec", "spec.json", "--halfline", "--truncations", "1", "--out", "st"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("st").exists());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stefan(&["selftest"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_spec(dir, "spec.json", &spec(2.0, 1.0));
    let args = ["simulate", "--spec", "spec.json", "--t-end", "1", "--n", "80", "--snapshots", "0,0.5,1"];
    for out in ["a", "b"] {
        let mut full = args.to_vec();
        full.extend(["--out", out]);
        let o = stefan(&full, dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["trajectory.csv", "profile_t0.csv", "profile_t0.5.csv", "profile_t1.csv", "summary.json"] {
        assert_eq!(fs::read(dir.join("a").join(file)).unwrap(), fs::read(dir.join("b").join(file)).unwrap(), "{file}");
    }
    let traj = fs::read_to_string(dir.join("a/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,h,hprime,max_u,mass,mass_residual\n"));
    assert_eq!(traj.lines().count(), 12);
    let profile = fs::read_to_string(dir.join("a/profile_t1.csv")).unwrap();
    assert!(profile.starts_with("x,u\n"));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config"]["command"], "simulate");
    assert!(manifest["elapsed_seconds"].as_f64().unwrap() >= 0.0);

    // Replays use the embedded problem, not the file on disk.
    fs::remove_file(dir.join("spec.json")).unwrap();
    let o = stefan(&["rerun", "--manifest", "a/manifest.json", "--out", "c"], dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(dir.join("a/trajectory.csv")).unwrap(), fs::read(dir.join("c/trajectory.csv")).unwrap());
}

#[test]
fn existing_output_requires_force() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("taken")).unwrap();
    fs::write(dir.join("taken/keep.txt"), "x").unwrap();
    let args = ["eigen", "--ell", "2", "--d", "1", "--m-const", "1", "--out", "taken"];
    assert_eq!(stefan(&args, dir).status.code(), Some(64));
    assert!(dir.join("taken/keep.txt").exists());
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(stefan(&forced, dir).status.success());
    assert!(!dir.join("taken/keep.txt").exists());
    assert!(dir.join("taken/eigenfunction.csv").exists());
    let leftovers: Vec<_> = fs::read_dir(dir).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().starts_with('.')).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn sweep_rows_independent_of_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let specs = vec![spec(2.0, 1.0), spec(0.5, 1e-4), spec(0.5, 1e3)];
    fs::write(dir.join("specs.json"), serde_json::to_string(&specs).unwrap()).unwrap();
    for (jobs, out) in [("1", "one"), ("3", "three")] {
        let o = stefan(&["sweep", "--specs", "specs.json", "--t-max", "30", "--n", "100", "--jobs", jobs, "--out", out], dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let table = fs::read_to_string(dir.join("one/sweep.csv")).unwrap();
    assert_eq!(table, fs::read_to_string(dir.join("three/sweep.csv")).unwrap());
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "run_id,verdict,t_decided,h_end,max_u_end,mu,d,h0");
    assert!(rows[1].starts_with("0,spreading,"));
    assert!(rows[2].starts_with("1,vanishing,"));
    assert!(rows[3].starts_with("2,spreading,"));
    assert!(dir.join("one/run_0001/samples.csv").exists());
}

#[test]
fn stationary_and_semiwave_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_spec(dir, "spec.json", &spec(2.0, 1.0));
    let v = json_stdout(&stefan(&["stationary", "--spec", "spec.json", "--halfline", "--out", "hl"], dir));
    assert!((v["tail_liminf"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(v["min_u_interior"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(dir.join("hl/solution.csv")).unwrap().starts_with("x,u\n"));

    let v = json_stdout(&stefan(&["semiwave", "--mu", "1", "--c", "1", "--d", "1"], dir));
    assert!((v["k0"].as_f64().unwrap() - 0.36438).abs() < 1e-4, "{v}");
    let out = stefan(&["semiwave", "--k", "0", "--c", "1", "--d", "1"], dir);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("x,w\n"));
}

#[test]
fn overrides_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    write_spec(tmp.path(), "spec.json", &spec(2.0, 1.0));
    let out = stefan(&["classify", "--spec", "spec.json", "--mu", "-1"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let v = json_stdout(&stefan(&["classify", "--spec", "spec.json", "--h0", "0.5", "--mu", "1e-4", "--t-max", "30", "--n", "100"], tmp.path()));
    assert_eq!(v["verdict"], "vanishing");
}
