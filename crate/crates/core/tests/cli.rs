use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcut")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn cluster_writes_report_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = pcut(&[
        "cluster", "--gen", "fig2", "--n", "1000", "--k-classes", "2", "--delta", "0.05", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&out, "report.json")).unwrap();
    assert_eq!(report["n"], 1000);
    assert_eq!(report["candidates"].as_array().unwrap().len(), 6 * 13 * 7);
    assert!(report["selected"].is_u64());
    let partition = read(&out, "partition.csv");
    assert_eq!(partition.lines().count(), 1001);
    assert!(read(&out, "summary.csv").starts_with("lambda,k,sigma,cut0,min_cluster,feasible\n"));
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = pcut(&["cluster", "--input", "missing.csv"]);
    assert_eq!(code(&o), 1);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert_eq!(stderr.trim().lines().count(), 1);
    assert!(stderr.contains("missing.csv"));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(code(&pcut(&["cluster", "--no-such-flag"])), 1);
    assert_eq!(code(&pcut(&["cluster", "--gen", "fig9"])), 1);
    assert_eq!(code(&pcut(&["cluster", "--gen", "fig2", "--lambdas", "0,1.5"])), 1);
    assert_eq!(code(&pcut(&["--help"])), 0);
}

#[test]
fn infeasible_delta_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("blobs.csv");
    let mut text = String::new();
    for i in 0..12 {
        text.push_str(&format!("{},{}\n", (i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1));
    }
    for i in 0..8 {
        text.push_str(&format!("{},{}\n", 100.0 + (i % 4) as f64 * 0.1, (i / 4) as f64 * 0.1));
    }
    fs::write(&input, text).unwrap();
    let o = pcut(&[
        "cluster", "--input", input.to_str().unwrap(), "--k-classes", "2", "--ks", "3", "--binary", "--delta", "0.45",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    // The report is still written, with nothing selected.
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert!(report["selected"].is_null());
}

#[test]
fn identical_runs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = pcut(&[
            "cluster", "--gen", "moons", "--n", "300", "--seed", "3", "--ks", "10,30", "--lambdas", "0.5,1", "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["report.json", "partition.csv", "summary.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn sweep_delta_writes_flat_spots() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcut(&[
        "sweep-delta", "--gen", "fig5", "--n", "1100", "--binary", "--deltas",
        "0.3,0.25,0.2,0.15,0.1,0.05", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = read(dir.path(), "sweep.csv");
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "delta,cut0,selected");
    assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 7);
    assert!(lines.iter().any(|l| l.starts_with("# flat_spot,")), "{sweep}");
}

#[test]
fn sweep_rejects_ascending_deltas() {
    let o = pcut(&["sweep-delta", "--gen", "fig5", "--n", "100", "--deltas", "0.05,0.1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn ssl_with_random_and_file_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = pcut(&["ssl", "--gen", "fig2", "--n", "400", "--num-labeled", "20", "--ks", "10,30", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(dir.path(), "partition.csv").lines().count(), 401);

    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "id,class\n0,0\n1,0\n399,1\n398,1\n").unwrap();
    let o = pcut(&[
        "ssl", "--gen", "fig2", "--n", "400", "--labels", labels.to_str().unwrap(), "--ks", "10", "--binary", "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&pcut(&["ssl", "--gen", "fig2", "--n", "400", "--labels", "nope.csv"])), 1);
}

#[test]
fn rank_curve_validate_and_gen() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    assert_eq!(code(&pcut(&["gen", "--gen", "fig2", "--n", "500", "--seed", "1", "--out", out])), 0);
    let data = dir.path().join("data.csv");
    assert_eq!(read(dir.path(), "data.csv").lines().count(), 500);

    let o = pcut(&["rank", "--input", data.to_str().unwrap(), "--has-labels", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rank = read(dir.path(), "rank.csv");
    assert!(rank.starts_with("id,eta,rank\n"));
    assert_eq!(rank.lines().count(), 501);

    let o = pcut(&["curve", "--input", data.to_str().unwrap(), "--has-labels", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = read(dir.path(), "curve.csv");
    assert!(curve.starts_with("t,value\n"));
    assert_eq!(curve.lines().count(), 112);

    let o = pcut(&["validate", "--lambda", "1", "--ns", "500,1000", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read(dir.path(), "validate.csv");
    assert!(v.starts_with("n,empirical,predicted,rel_error\n"));
    assert_eq!(v.lines().count(), 3);

    let o = pcut(&[
        "cluster", "--input", data.to_str().unwrap(), "--has-labels", "--ks", "20", "--binary", "--threads", "1", "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("error rate"));
}
