use std::path::Path;
use std::process::{Command, Output};

fn llweak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llweak"))
        .args(args)
        .env_remove("LLWEAK_THREADS")
        .output()
        .expect("spawn llweak")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

#[test]
fn moments_smoke() {
    let o = llweak(&["moments", "--t-end", "0.25", "--samples", "64", "--threads", "2"]);
    assert_ok(&o);
    let r = rows(&stdout(&o));
    assert_eq!(
        r[0],
        [
            "t",
            "exact_mean_1",
            "exact_mean_2",
            "exact_var_1_1",
            "exact_var_1_2",
            "exact_var_2_1",
            "exact_var_2_2",
            "estimate_mean_1",
            "estimate_mean_2",
            "estimate_var_1_1",
            "estimate_var_1_2",
            "estimate_var_2_1",
            "estimate_var_2_2"
        ]
    );
    // 16 steps of 1/64 plus the initial node
    assert_eq!(r.len(), 1 + 17);
    assert!(r[1..]
        .iter()
        .flatten()
        .all(|v| v.parse::<f64>().unwrap().is_finite()));
}

#[test]
fn moments_with_one_sample_is_finite() {
    let o = llweak(&["moments", "--t-end", "0.5", "--samples", "1"]);
    assert_ok(&o);
    let r = rows(&stdout(&o));
    assert!(r[1..]
        .iter()
        .flatten()
        .all(|v| v.parse::<f64>().unwrap().is_finite()));
}

#[test]
fn propagated_moments_match_exact_columns() {
    let o = llweak(&["moments", "--propagate", "--t-end", "1"]);
    assert_ok(&o);
    for row in &rows(&stdout(&o))[1..] {
        let v: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        for i in 0..6 {
            assert!((v[1 + i] - v[7 + i]).abs() <= 1e-8 * (1.0 + v[1 + i].abs()));
        }
    }
}

#[test]
fn error_table_smoke() {
    let o = llweak(&["error-table", "--t-end", "0.5", "--samples", "16,32"]);
    assert_ok(&o);
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["section", "statistic", "samples", "value"]);
    let sections: Vec<&str> = r[1..].iter().map(|row| row[0].as_str()).collect();
    for s in ["scheme_error", "exact_error", "arctan_relative"] {
        assert!(sections.contains(&s), "missing section {s}");
    }
}

#[test]
fn convergence_single_delta_two_batches() {
    let o = llweak(&[
        "convergence",
        "--problem",
        "example2",
        "--scheme",
        "llweak,euler",
        "--delta",
        "0.5",
        "--t-end",
        "1",
        "--samples",
        "10",
        "--batches",
        "2",
    ]);
    assert_ok(&o);
    let r = rows(&stdout(&o));
    assert_eq!(
        r[0],
        [
            "scheme",
            "delta",
            "error",
            "half_width",
            "std_error",
            "batches",
            "batch_size",
            "overflow_count"
        ]
    );
    assert_eq!(r.len(), 3);
    assert_eq!(r[1][0], "llweak");
    assert_eq!(r[2][0], "euler");
    assert!(r[1][2].parse::<f64>().unwrap().is_finite());
}

#[test]
fn simulate_smoke() {
    let o = llweak(&[
        "simulate",
        "--problem",
        "gbm",
        "--delta",
        "0.25",
        "--samples",
        "3",
    ]);
    assert_ok(&o);
    let r = rows(&stdout(&o));
    assert_eq!(r[0], ["path", "step", "t", "x_1"]);
    assert_eq!(r.len(), 1 + 3 * 5);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("table.csv");
    std::fs::write(
        &cfg,
        r#"{"problem": "gbm", "delta": 0.5, "t_end": 2.0, "samples": 8, "seed": 9}"#,
    )
    .unwrap();
    let o = llweak(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--t-end",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ok(&o);
    assert!(stdout(&o).is_empty());
    let r = rows(&std::fs::read_to_string(&out).unwrap());
    // 8 paths of 2 steps: the flag's t_end won over the file's
    assert_eq!(r.len(), 1 + 8 * 3);
}

#[test]
fn runs_are_reproducible_and_seeded() {
    let args = [
        "convergence",
        "--problem",
        "gbm",
        "--delta",
        "0.25",
        "--samples",
        "50",
        "--batches",
        "3",
    ];
    let a = llweak(&[&args[..], &["--seed", "4"]].concat());
    let b = llweak(&[&args[..], &["--seed", "4", "--threads", "3"]].concat());
    let c = llweak(&[&args[..], &["--seed", "5"]].concat());
    assert_ok(&a);
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn emit_plots_writes_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = llweak(&[
        "moments",
        "--t-end",
        "0.25",
        "--samples",
        "32",
        "--out",
        out.to_str().unwrap(),
        "--emit-plots",
    ]);
    assert_ok(&o);
    let svgs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    assert!(!svgs.is_empty());
    for p in &svgs {
        assert!(std::fs::read_to_string(p).unwrap().starts_with("<svg"));
        assert!(stderr(&o).contains(&*p.file_name().unwrap().to_string_lossy()));
    }
    assert!(Path::new(&dir.path().join("m-mean1.svg")).exists());
}

fn expect_failure(o: &Output, code: i32, category: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    assert!(
        stderr(o).starts_with(&format!("error[{category}]")),
        "stderr: {}",
        stderr(o)
    );
}

#[test]
fn config_errors_exit_with_code_2() {
    expect_failure(&llweak(&["moments", "--problem", "nope"]), 2, "config");
    expect_failure(&llweak(&["moments", "--delta", "0"]), 2, "config");
    expect_failure(&llweak(&["moments", "--emit-plots"]), 2, "config");
    expect_failure(
        &llweak(&[
            "convergence",
            "--problem",
            "gbm",
            "--batches",
            "1",
            "--samples",
            "4",
        ]),
        2,
        "config",
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"problem": "gbm", "colour": 3}"#).unwrap();
    expect_failure(
        &llweak(&["moments", "--config", bad.to_str().unwrap()]),
        2,
        "config",
    );
}

#[test]
fn io_errors_exit_with_code_3() {
    expect_failure(
        &llweak(&["moments", "--config", "/nonexistent/run.json"]),
        3,
        "io",
    );
    expect_failure(
        &llweak(&[
            "simulate",
            "--problem",
            "gbm",
            "--samples",
            "1",
            "--out",
            "/nonexistent/dir/x.csv",
        ]),
        3,
        "io",
    );
}

#[test]
fn unsupported_requests_exit_with_code_5() {
    expect_failure(
        &llweak(&["moments", "--problem", "example2", "--t-end", "1"]),
        5,
        "unsupported",
    );
    expect_failure(
        &llweak(&[
            "simulate",
            "--problem",
            "example2",
            "--scheme",
            "exact",
            "--t-end",
            "1",
        ]),
        5,
        "unsupported",
    );
}

#[test]
fn threads_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_llweak"))
            .args(["simulate", "--problem", "gbm", "--samples", "5", "--delta", "0.5"])
            .env("LLWEAK_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_ok(&one);
    assert_eq!(stdout(&one), stdout(&run("4")));
    expect_failure(&run("zero"), 2, "config");
}
