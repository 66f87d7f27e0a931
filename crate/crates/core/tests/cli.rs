//! End-to-end runs of the `ratchet` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[model]
mu = 1.5
lambda = 1.0
r = 0.1
ell = 1.5
c_bar = 1.0
c_floor = 0.0

[claims]
kind = "exponential"
params = { mean = 1.0 }

[grid]
n_x = 800
fft = true

[ladder]
n = 16

[simulation]
paths = 4000
seed = 3

[verify]
points = [[0.0, 0.0], [2.0, 0.5]]
constant_rates = [0.5]
"#;

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn ratchet(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratchet"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("spawn ratchet")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn boundary_writes_csv() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    let run = ratchet(&config, &out, &["boundary"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(header(&out.join("boundary.csv")), "x,g,g_prime,residual");
    assert_eq!(fs::read_to_string(out.join("boundary.csv")).unwrap().lines().count(), 802);
}

#[test]
fn solve_uses_the_cache_on_the_second_run() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    let first = ratchet(&config, &out, &["solve"]);
    assert!(first.status.success());
    assert!(!String::from_utf8_lossy(&first.stderr).contains("cache hit"));
    let surface = fs::read(out.join("surface.csv")).unwrap();
    let diagnostics = fs::read(out.join("diagnostics.json")).unwrap();

    let second = ratchet(&config, &out, &["solve"]);
    assert!(second.status.success());
    assert!(String::from_utf8_lossy(&second.stderr).contains("cache hit"));
    assert_eq!(fs::read(out.join("surface.csv")).unwrap(), surface);
    assert_eq!(fs::read(out.join("diagnostics.json")).unwrap(), diagnostics);

    let forced = ratchet(&config, &out, &["--force", "solve"]);
    assert!(forced.status.success());
    assert!(!String::from_utf8_lossy(&forced.stderr).contains("cache hit"));
    assert_eq!(fs::read(out.join("surface.csv")).unwrap(), surface);
    assert_eq!(header(&out.join("surface.csv")), "c,x,v,v_x,switch");
    let caches: Vec<_> = fs::read_dir(out.join("cache")).unwrap().collect();
    assert_eq!(caches.len(), 1);
}

#[test]
fn inspection_commands_write_their_tables() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    assert!(ratchet(&config, &out, &["boundary-curve"]).status.success());
    assert!(ratchet(&config, &out, &["rate-map"]).status.success());
    assert_eq!(header(&out.join("boundary_curve.csv")), "c,x_star,v_x_at_0");
    assert_eq!(fs::read_to_string(out.join("boundary_curve.csv")).unwrap().lines().count(), 18);
    assert_eq!(header(&out.join("rate_map.csv")), "c,x,max_rate");
}

#[test]
fn simulate_reports_estimate_and_paths() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    let run = ratchet(&config, &out, &["simulate", "--x0", "1", "--c0", "0.5", "--per-path", "10"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("simulate.json")).unwrap()).unwrap();
    let mean = json["mean"].as_f64().unwrap();
    let se = json["std_error"].as_f64().unwrap();
    let value = json["value"].as_f64().unwrap();
    assert!((mean - value).abs() < 4.0 * se + 0.1, "{json}");
    assert_eq!(json["paths"].as_u64(), Some(4000));
    assert_eq!(fs::read_to_string(out.join("paths.csv")).unwrap().lines().count(), 11);

    let constant = ratchet(&config, &out, &["simulate", "--strategy", "constant:0.25", "--paths", "500"]);
    assert!(constant.status.success());
    let bad = ratchet(&config, &out, &["simulate", "--strategy", "constant:5"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error[ValidationError]"));
}

#[test]
fn verify_writes_a_passing_certificate() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    let run = ratchet(&config, &out, &["verify"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
    let names: Vec<&str> = json["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for expected in ["boundary.residual", "obstacle", "switch_mask.up_closed", "refinement.free_boundary", "mc.ratchet(0,0)"] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
}

#[test]
fn sweep_writes_one_row_per_value() {
    let (dir, config) = workspace(CONFIG);
    let out = dir.path().join("out");
    let run = ratchet(&config, &out, &["sweep", "--param", "model.ell", "--values", "1.2,1.5,2.0"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# model.ell");
    assert_eq!(lines.len(), 5);
    // A costlier injection lowers the value at zero surplus.
    let v: Vec<f64> = lines[2..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let (dir, config) = workspace(&CONFIG.replace("ell = 1.5", "ell = 0.9"));
    let out = dir.path().join("out");
    let run = ratchet(&config, &out, &["solve"]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("error[ValidationError]") && stderr.contains("ell"), "{stderr}");

    let (dir, config) = workspace(&CONFIG.replace("[ladder]", "[ladder]\nbogus = 1"));
    let run = ratchet(&config, &dir.path().join("out"), &["solve"]);
    assert_eq!(run.status.code(), Some(2));

    let run = ratchet(Path::new("/nonexistent/run.toml"), &dir.path().join("out"), &["solve"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (dir, config) = workspace(CONFIG);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        assert!(ratchet(&config, &out, &["solve"]).status.success());
        assert!(ratchet(&config, &out, &["simulate", "--paths", "2000"]).status.success());
        let cache = fs::read_dir(out.join("cache")).unwrap().next().unwrap().unwrap().path();
        let mut files: Vec<Vec<u8>> = ["surface.csv", "diagnostics.json", "simulate.json"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        files.push(fs::read(cache).unwrap());
        outputs.push(files);
    }
    assert!(outputs[0] == outputs[1]);
}
