use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
num_users = 60
sim_duration_s = 3000.0
[analytics]
samples = 5000
[sweep]
user_counts = [100000, 400000]
instances = [1, 2]
window_s = 5.0
"#;

fn vmme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmme"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_trace_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = |name: &str, seed: &str| {
        let o = dir.path().join(name);
        let r = vmme(&["--config", &cfg, "--seed", seed, "--out", o.to_str().unwrap(), "generate-trace"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read(o.join("trace.csv")).unwrap()
    };
    let a = out("a", "7");
    assert_eq!(a, out("b", "7"));
    assert_ne!(a, out("c", "8"));
    assert!(a.starts_with(b"time_s,ue_id,procedure,message,procedure_id\n"));
}

#[test]
fn simulate_single_message() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("one.csv");
    std::fs::write(&trace, "time_s,ue_id,procedure,message,procedure_id\n5.000000000,0,SR,1,0\n").unwrap();
    let r = vmme(&["--out", dir.path().to_str().unwrap(), "simulate", "--trace", trace.to_str().unwrap()]);
    assert!(r.status.success());
    let delays = std::fs::read_to_string(dir.path().join("delays.csv")).unwrap();
    let overall: Vec<&str> = delays.lines().last().unwrap().split(',').collect();
    assert_eq!(overall[0], "overall");
    assert_eq!(overall[1], "1");
    let mean: f64 = overall[2].parse().unwrap();
    let max: f64 = overall[5].parse().unwrap();
    let want = 1.0 / 120_000.0 + 1.0 / 100_000.0 + 1.45e6 / 11.38e9 + 1.0 / 5e6;
    assert!((mean - want).abs() < 1e-9 && mean == max);
    let util = std::fs::read_to_string(dir.path().join("utilization.csv")).unwrap();
    assert!(util.starts_with("station,served,busy_s,utilization\nbalancer,1,"));
}

#[test]
fn simulate_empty_trace_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("empty.csv");
    std::fs::write(&trace, "time_s,ue_id,procedure,message,procedure_id\n").unwrap();
    let r = vmme(&["--out", dir.path().to_str().unwrap(), "simulate", "--trace", trace.to_str().unwrap()]);
    assert!(r.status.success());
    let delays = std::fs::read_to_string(dir.path().join("delays.csv")).unwrap();
    assert!(delays.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn malformed_trace_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.csv");
    std::fs::write(
        &trace,
        "time_s,ue_id,procedure,message,procedure_id\n1.0,0,SR,1,0\n1.5,0,XX,1,1\n",
    )
    .unwrap();
    let r = vmme(&["--out", dir.path().to_str().unwrap(), "simulate", "--trace", trace.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let r = vmme(&["--out", dir.path().to_str().unwrap(), "simulate", "--trace", missing.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));

    let cfg = write_config(dir.path(), "[qnet]\ndb_probability = 1.5\n");
    let r = vmme(&["--config", &cfg, "generate-trace"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("qnet.db_probability"));

    // Output path below a regular file cannot be created.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let small = write_config(dir.path(), SMALL);
    let r = vmme(&["--config", &small, "--out", blocker.join("sub").to_str().unwrap(), "generate-trace"]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn advise_prints_instances() {
    let r = vmme(&["advise", "1173900"]);
    assert!(r.status.success());
    assert_eq!(String::from_utf8_lossy(&r.stdout), "advisor(1173900) = 3\n");
    let r = vmme(&["advise", "773210"]);
    assert_eq!(String::from_utf8_lossy(&r.stdout), "advisor(773210) = 2\n");
}

#[test]
fn predict_rates_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let r = vmme(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "predict-rates", "--empirical"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("rmse: sr "));
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let mut lines = rates.lines();
    assert_eq!(lines.next(), Some("T_I_s,lambda_sr,lambda_srr,lambda_hr"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][1] < w[0][1]);
        assert!(w[1][3] > w[0][3]);
    }
    assert!(rows.iter().all(|r| r[1] == r[2]));
    assert!(dir.path().join("rates_empirical.csv").exists());
}

#[test]
fn capacity_sweep_budget_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let r = vmme(&["--config", &cfg, "--budget-ms", "1e12", "--out", dir.path().to_str().unwrap(), "capacity-sweep"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.contains("m=1: capacity 400000 users"), "{stdout}");
    assert!(stdout.contains("m=2: capacity 400000 users"), "{stdout}");
    assert!(stdout.contains("advisor(1173900) = 3"));
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 5);
}
