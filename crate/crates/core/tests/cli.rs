use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splineflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Coefficient rows `(a, b, c, d)` for dimension 0 of trajectory 0, in
/// segment order.
fn x_rows(coeffs: &str) -> Vec<[f64; 4]> {
    data_rows(coeffs)
        .into_iter()
        .filter(|r| r[0] == "0" && r[3] == "0")
        .map(|r| [4, 5, 6, 7].map(|i| r[i].parse().unwrap()))
        .collect()
}

#[test]
fn gen_uniform_writes_four_rows() {
    let dir = TempDir::new().unwrap();
    let text = ok(
        dir.path(),
        &[
            "gen", "--field", "uniform", "--M", "1", "--S", "4", "--dt", "1",
        ],
    );
    assert!(text.starts_with("#splineflow-flow v1 M=1 S=4 dims=2 dt=1\n#config {"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 4);
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row, &["0", &j.to_string(), &j.to_string(), "0", "0"]);
    }
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    // The output path is part of the embedded config, so both runs use it.
    let csv = [
        "gen", "--field", "vortex", "--M", "100", "--S", "13", "--seed", "7", "--jitter", "0.2",
        "-o", "f.csv",
    ];
    ok(dir.path(), &csv);
    let first = fs::read(dir.path().join("f.csv")).unwrap();
    ok(dir.path(), &csv);
    assert_eq!(first, fs::read(dir.path().join("f.csv")).unwrap());
    let other_seed = ok(
        dir.path(),
        &[
            "gen", "--field", "vortex", "--M", "100", "--S", "13", "--seed", "8", "--jitter", "0.2",
        ],
    );
    let stdout_seed7 = ok(
        dir.path(),
        &[
            "gen", "--field", "vortex", "--M", "100", "--S", "13", "--seed", "7", "--jitter", "0.2",
        ],
    );
    assert_ne!(data_rows(&other_seed), data_rows(&stdout_seed7));

    let bin = [
        "--format", "bin", "gen", "--field", "vortex", "--M", "100", "--S", "13", "--seed", "7",
        "-o", "f.bin",
    ];
    ok(dir.path(), &bin);
    let first = fs::read(dir.path().join("f.bin")).unwrap();
    assert_eq!(&first[..4], b"SFLW");
    ok(dir.path(), &bin);
    assert_eq!(first, fs::read(dir.path().join("f.bin")).unwrap());
}

#[test]
fn strict_rejects_bad_sample_count() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["gen", "--S", "6", "--strict"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shape error"));
    // Relaxed mode truncates instead.
    ok(dir.path(), &["gen", "--S", "6", "--relaxed"]);
}

#[test]
fn fit_matches_kernel_examples() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "gen", "--field", "uniform", "--M", "1", "--S", "4", "--dt", "1", "-o", "f.csv",
        ],
    );
    let raw = ok(dir.path(), &["--raw", "fit", "-i", "f.csv"]);
    assert_eq!(x_rows(&raw)[0], [-2.0, 0.0, 3.0, 0.0]);
    let blended = ok(dir.path(), &["fit", "-i", "f.csv"]);
    assert_eq!(x_rows(&blended)[0], [-1.0, 0.0, 2.0, 0.0]);
    let literal = ok(
        dir.path(),
        &[
            "--convention",
            "paper-literal",
            "--raw",
            "fit",
            "-i",
            "f.csv",
        ],
    );
    assert!(literal
        .lines()
        .next()
        .unwrap()
        .contains("conv=paper-literal"));
    assert_eq!(x_rows(&literal)[0], [-8.0, 3.0, 6.0, 0.0]);
}

#[test]
fn parse_and_math_errors_have_distinct_codes() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--M", "2", "-o", "f.csv"]);
    let text = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        text.replacen("#splineflow-flow", "#splineflow-flw", 1),
    )
    .unwrap();
    let out = run(dir.path(), &["fit", "-i", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let mut lines: Vec<&str> = text.lines().collect();
    let broken = lines[4].replacen(',', ",x", 2);
    lines[4] = &broken;
    fs::write(dir.path().join("row.csv"), lines.join("\n")).unwrap();
    let out = run(dir.path(), &["fit", "-i", "row.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));

    let out = run(dir.path(), &["--alpha", "0.7", "fit", "-i", "f.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["eval", "-i", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(
        dir.path(),
        &["pipeline", "--M", "10", "--p", "4", "--strict"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_point_counts() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "gen", "--field", "hill", "--M", "3", "--N", "2", "-o", "f.csv",
        ],
    );
    ok(dir.path(), &["fit", "-i", "f.csv", "-o", "c.csv"]);
    let snap = ok(
        dir.path(),
        &["eval", "-i", "c.csv", "--V", "10", "--p", "2"],
    );
    assert!(snap.starts_with("#splineflow-snap v1 M=3 points=61 dims=2 V=10\n"));
    let rows = data_rows(&snap);
    assert_eq!(rows.len(), 3 * 61);

    // V = 1 keeps only the segment endpoints, each equal to a + b + c + d.
    let coarse = ok(dir.path(), &["eval", "-i", "c.csv", "--V", "1"]);
    let rows = data_rows(&coarse);
    assert_eq!(rows.len(), 3 * 7);
    let coeffs = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let segs = x_rows(&coeffs);
    assert_eq!(segs.len(), 6);
    for (j, s) in segs.iter().enumerate() {
        let x: f64 = rows[j + 1][2].parse().unwrap();
        assert_eq!(x, s[0] + s[1] + s[2] + s[3]);
    }
}

#[test]
fn incomplete_coefficients_rejected() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--M", "2", "--N", "2", "-o", "f.csv"]);
    ok(dir.path(), &["fit", "-i", "f.csv", "-o", "c.csv"]);
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with("1,1,2,0,"))
        .collect();
    fs::write(dir.path().join("c2.csv"), kept.join("\n")).unwrap();
    let out = run(dir.path(), &["eval", "-i", "c2.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incomplete input"));
}

#[test]
fn constant_flow_snapshot_rows_identical() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("#splineflow-flow v1 M=2 S=7 dims=3 dt=none\n");
    for i in 0..2 {
        for j in 0..7 {
            text.push_str(&format!("{i},{j},1.5,-2.25,0.75\n"));
        }
    }
    fs::write(dir.path().join("c.csv"), text).unwrap();
    let snap = ok(dir.path(), &["pipeline", "-i", "c.csv", "--V", "4"]);
    let rows = data_rows(&snap);
    assert_eq!(rows.len(), 2 * 25);
    assert!(rows.iter().all(|r| r[2..] == ["1.5", "-2.25", "0.75"]));
}

#[test]
fn binary_files_round_trip_through_commands() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "gen", "--field", "vortex", "--M", "4", "--N", "3", "--jitter", "0.1", "-o", "f.csv",
        ],
    );
    ok(dir.path(), &["fit", "-i", "f.csv", "-o", "c.csv"]);
    ok(
        dir.path(),
        &["--format", "bin", "fit", "-i", "f.csv", "-o", "c.bin"],
    );
    let a = ok(dir.path(), &["eval", "-i", "c.csv"]);
    let b = ok(dir.path(), &["eval", "-i", "c.bin"]);
    assert_eq!(data_rows(&a), data_rows(&b));
}

#[test]
fn config_file_and_header() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "M = 3\nN = 2\nfield = \"hill\"\nseed = 4\njitter = 0.3\n",
    )
    .unwrap();
    let text = ok(dir.path(), &["--config", "run.toml", "gen"]);
    assert!(text.starts_with("#splineflow-flow v1 M=3 S=7 dims=2"));
    assert!(text.contains("\"field\":\"hill\""));
    // Flags override the file.
    let text = ok(dir.path(), &["--config", "run.toml", "gen", "--M", "5"]);
    assert_eq!(data_rows(&text).len(), 5 * 7);
    fs::write(dir.path().join("bad.toml"), "M = 3\nwhat = 1\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "gen"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn calculators() {
    let dir = TempDir::new().unwrap();
    let text = ok(
        dir.path(),
        &["cfl", "--space-step", "0.5", "--speed", "50", "--csv"],
    );
    assert!(text.contains("max_time_step,0.01,"));
    let text = ok(
        dir.path(),
        &["cfl", "--time-step", "0.1", "--speed", "50", "--csv"],
    );
    assert!(text.contains("min_space_step,5,"));
    let text = ok(
        dir.path(),
        &[
            "equiv", "--L", "300", "--N", "100", "--V", "10", "--speed", "30",
        ],
    );
    assert!(text.starts_with("Heuristic equivalence"));
    let out = run(dir.path(), &["cfl", "--space-step", "1", "--speed", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_outputs_are_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = [
        "compare",
        "--field",
        "uniform",
        "--M",
        "3",
        "--N",
        "3",
        "--speed",
        "2",
        "--dt",
        "0.5",
        "--out-dir",
        "one",
    ];
    let report = ok(dir.path(), &args);
    let read = |f: &str| fs::read(dir.path().join("one").join(f)).unwrap();
    let first = [read("metrics.csv"), read("polylines.csv")];
    ok(dir.path(), &args);
    assert_eq!(first, [read("metrics.csv"), read("polylines.csv")]);
    let metrics = fs::read_to_string(dir.path().join("one/metrics.csv")).unwrap();
    let rms: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("rms_over_chord,"))
        .and_then(|v| v.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(rms <= 0.1, "uniform rms/chord {rms}");
    assert!(report.contains("rms_over_chord"));
    let poly = fs::read_to_string(dir.path().join("one/polylines.csv")).unwrap();
    assert!(poly.contains("\nseries,traj_id,sample_idx,x,y,z\n"));
    assert!(poly.contains("\ntruth,0,0,") && poly.contains("\nspline,2,90,"));
}

#[test]
fn bench_report_columns() {
    let dir = TempDir::new().unwrap();
    let text = ok(
        dir.path(),
        &[
            "bench",
            "--M-list",
            "8,16",
            "--p-list",
            "1,2",
            "--N",
            "3",
            "--V",
            "4",
            "--repeats",
            "1",
            "--stage",
            "pipeline",
        ],
    );
    let rows = data_rows(&text);
    assert_eq!(
        rows[0].join(","),
        "p,M,N,V,stage,time_execution_s,time_cpu_s,time_overhead_s,speedup,flops_instrumented,flops_exact"
    );
    assert_eq!(rows.len(), 5);
    for r in &rows[1..] {
        assert_eq!(r[4], "pipeline");
        assert_eq!(r[9], r[10], "instrumented flops differ from the exact form");
    }
    assert_eq!(rows[1][8], "1.0000");
}
