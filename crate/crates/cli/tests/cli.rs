use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn specrkhs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrkhs"))
        .current_dir(dir)
        .args(args)
        .env_remove("SPECRKHS_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = specrkhs(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn manifest(dir: &Path, out: &str) -> Value {
    serde_json::from_str(&read(dir, &format!("{out}/manifest.json"))).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

const IDENTITY: &[&str] = &["--system", "identity", "--kernel", "gaussian-rbf:d=2,sigma=1", "--n", "20"];

#[test]
fn identity_eigenvalues_are_one_and_verified() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &[&["eig"], IDENTITY, &["--eps", "1e-6"]].concat());
    let r = rows(&read(dir.path(), "out/eig.csv"));
    assert_eq!(r.len(), 20);
    for row in r {
        let re: f64 = row[0].parse().unwrap();
        let im: f64 = row[1].parse().unwrap();
        assert!((re - 1.0).abs() < 1e-9 && im.abs() < 1e-9, "{row:?}");
        assert_eq!(row[3], "true");
    }
    let m = manifest(dir.path(), "out");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["results"]["eig"]["verified"], 20);
    assert!(m["timings"]["total"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identity_pseudospectrum_is_a_disk_around_one() {
    let dir = tempfile::tempdir().unwrap();
    for (eps, out) in [("0.5", "a"), ("1.2", "b")] {
        ok(dir.path(), &[&["pseudospec"], IDENTITY, &["--grid", "lattice:2", "--eps", eps, "--out-dir", out, "--svg"]].concat());
    }
    let small = rows(&read(dir.path(), "a/pseudospec.csv"));
    let flagged: Vec<_> = small.iter().filter(|r| r[3] == "true").collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!((flagged[0][0].as_str(), flagged[0][1].as_str()), ("1", "0"));
    // tau(z) = |1 - z| for the identity
    for r in rows(&read(dir.path(), "b/pseudospec.csv")) {
        let (x, y, tau): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        let d = ((1.0 - x).powi(2) + y * y).sqrt();
        assert!((tau - d).abs() < 1e-6, "{r:?}");
        assert_eq!(r[3] == "true", d < 1.2);
    }
    let svg = read(dir.path(), "a/pseudospec.svg");
    assert_eq!(svg.matches("<rect").count(), small.len());
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["eig", "--system", "duffing", "--n", "90", "--kernel", "matern:d=2,n=3,sigma=2", "--seed", "7"];
    ok(dir.path(), &[&base[..], &["--out-dir", "a", "--threads", "1"]].concat());
    ok(dir.path(), &[&base[..], &["--out-dir", "b", "--threads", "3"]].concat());
    assert_eq!(read(dir.path(), "a/eig.csv"), read(dir.path(), "b/eig.csv"));
    assert_eq!(manifest(dir.path(), "a")["threads"], 1);
    assert_eq!(manifest(dir.path(), "b")["threads"], 3);
}

#[test]
fn gram_artifact_reproduces_fused_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = ["--system", "gauss-map", "--n", "41"];
    ok(dir.path(), &[&["gram"], &data[..], &["--out-dir", "g"]].concat());
    ok(dir.path(), &[&["eig"], &data[..], &["--out-dir", "fused"]].concat());
    ok(dir.path(), &["eig", "--gram", "g/gram.bin", "--out-dir", "loaded"]);
    assert_eq!(read(dir.path(), "fused/eig.csv"), read(dir.path(), "loaded/eig.csv"));
    // snapshots written by `gram` feed back through --data
    ok(dir.path(), &["eig", "--data", "g/snapshots.csv", "--kernel", "h1:a=-1,b=0", "--out-dir", "csv"]);
    assert_eq!(read(dir.path(), "fused/eig.csv"), read(dir.path(), "csv/eig.csv"));
}

#[test]
fn usage_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["eig", "--system", "nope", "--error-json"],
        vec!["eig", "--system", "gauss-map", "--kernel", "matern:d=2,q=1", "--error-json"],
        vec!["pseudospec", "--system", "gauss-map", "--grid", "1:0:0.1", "--error-json"],
        vec!["eig", "--gram", "missing.bin", "--error-json"],
        vec!["eig", "--bogus", "--error-json"],
        vec!["measure", "--system", "gauss-map", "--type", "sideways", "--error-json"],
    ] {
        let out = specrkhs(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("{args:?}: json on stderr"));
        assert_eq!(err["error"]["kind"], "usage");
        assert_eq!(err["error"]["exit_code"], 2);
    }
}

#[test]
fn numerical_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = specrkhs(
        dir.path(),
        &["forecast", "--system", "gauss-map", "--n", "41", "--x0=-0.5", "--eps", "1e-30", "--error-json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "numerical");
    assert_eq!(manifest(dir.path(), "out")["status"], "error");
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "system = identity\nkernel = gaussian-rbf:d=2,sigma=1\nn = 12\neps = 1e-6\nout_dir = cfg\n").unwrap();
    ok(dir.path(), &["eig", "--config", "run.cfg", "--eps", "0.25"]);
    let m = manifest(dir.path(), "cfg");
    assert_eq!(m["config"]["command"]["Eig"]["eps"], 0.25);
    assert_eq!(m["config"]["command"]["Eig"]["data"]["n"], 12);
    assert_eq!(rows(&read(dir.path(), "cfg/eig.csv")).len(), 12);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_specrkhs"))
        .current_dir(dir.path())
        .args([&["eig"], IDENTITY].concat())
        .env("SPECRKHS_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(dir.path(), "out")["threads"], 2);
}

#[test]
fn forecast_writes_bounds_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["forecast", "--system", "duffing", "--n", "300", "--kernel", "matern:d=2,n=3,sigma=1", "--x0", "0.3;0.2",
          "--observable", "kernel:0;0", "--steps", "12", "--eps", "0.3", "--norm-kstar", "1"],
    );
    let r = rows(&read(dir.path(), "out/forecast.csv"));
    assert_eq!(r.len(), 13);
    let bounds: Vec<f64> = r.iter().map(|row| row[2].parse().unwrap()).collect();
    assert!(bounds.iter().all(|b| b.is_finite() && *b >= 0.0));
    assert!(bounds.windows(2).all(|w| w[1] >= w[0]));
    let meta: Value = serde_json::from_str(&read(dir.path(), "out/forecast.json")).unwrap();
    assert_eq!(meta["certified"], true);
    assert!(meta["modes"].as_u64().unwrap() > 0);
}

#[test]
fn koopman_pseudospectrum_and_normality() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["pseudospec-koop", "--system", "gauss-map", "--n", "41", "--n2", "20", "--grid", "-1:1:0.5,-1:1:0.5", "--out-dir", "k"]);
    let r = rows(&read(dir.path(), "k/pseudospec_koop.csv"));
    assert_eq!(r.len(), 25);
    assert!(r.iter().all(|row| row[2].parse::<f64>().unwrap() >= 0.0));
    ok(dir.path(), &["check-normality", "--system", "mobius", "--n", "60", "--out-dir", "m"]);
    let n: Value = serde_json::from_str(&read(dir.path(), "m/normality.json")).unwrap();
    assert_eq!(n["unitary"], true);
    assert!(n["max_r_minus_g"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn unitary_measure_on_mobius_data() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["measure", "--system", "mobius", "--n", "80", "--type", "unitary", "--order", "2", "--eps", "0.1", "--points=-pi:pi:9"]);
    let r = rows(&read(dir.path(), "out/measure.csv"));
    assert_eq!(r.len(), 9);
    // smoothed density of a probability measure is nonnegative for m = 2 up to round-off
    assert!(r.iter().all(|row| row[1].parse::<f64>().unwrap() > -1e-8));
}

#[test]
fn random_walk_demo_tracks_the_exact_density() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["demo", "randomwalk", "--eps", "0.05", "--order", "6"]);
    let r = rows(&read(dir.path(), "out/measure.csv"));
    let mut worst = 0.0f64;
    for row in &r {
        let (x, v, exact): (f64, f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap(), row[2].parse().unwrap());
        if (-0.25..=0.9).contains(&x) {
            worst = worst.max((v - exact).abs());
        }
    }
    assert!(worst < 1e-2, "max deviation {worst}");
}
