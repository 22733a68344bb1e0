//! End-to-end tests of the command-line interface: CSV emission, exit
//! status contract, config-file handling, determinism across runs, and the
//! verify/norms subcommands.

use std::io::BufWriter;
use std::path::PathBuf;
use std::process::{Command, Output};

use parafem::problems::by_name;
use parafem::stepping::run_problem;
use parafem::study::ConvergenceReport;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parafem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn parafem")
}

fn temp_path(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("parafem-cli-{}-{tag}", std::process::id()))
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn study_prints_a_table_and_writes_parseable_csv() {
    let csv = temp_path("table.csv");
    let out = run(&[
        "study",
        "--problem",
        "smooth1d",
        "--levels",
        "3",
        "--base-steps",
        "16",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let text = stdout_of(&out);
    assert!(text.contains("level"), "missing table header: {text}");
    assert!(text.contains("e_W"), "missing error column: {text}");
    assert!(text.contains("rate"), "missing rate footer: {text}");

    let written = std::fs::read_to_string(&csv).expect("CSV file");
    let rows = ConvergenceReport::parse_csv(&written).expect("parse CSV");
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.level, k);
        assert!(row.e_w > 0.0);
    }
    let _ = std::fs::remove_file(&csv);
}

#[test]
fn identical_invocations_write_identical_csv() {
    let a = temp_path("det-a.csv");
    let b = temp_path("det-b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "study",
            "--problem",
            "smooth2d",
            "--levels",
            "2",
            "--fixed-steps",
            "8",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }
    let bytes_a = std::fs::read(&a).expect("first CSV");
    let bytes_b = std::fs::read(&b).expect("second CSV");
    assert_eq!(bytes_a, bytes_b, "repeated runs disagree byte for byte");
    let _ = std::fs::remove_file(&a);
    let _ = std::fs::remove_file(&b);
}

#[test]
fn rate_assertions_drive_the_exit_status() {
    // A coupled study of the smooth problem converges at first order, so
    // the rate gate passes.
    let ok = run(&[
        "study",
        "--problem",
        "smooth1d",
        "--levels",
        "3",
        "--assert-rates",
    ]);
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr_of(&ok));
    assert!(stdout_of(&ok).contains("rates within expectations"));

    // Refining the mesh while keeping two huge time steps stalls the error
    // at the temporal floor, so the fitted rate collapses and the gate
    // exits with the dedicated status 2.
    let stalled = run(&[
        "study",
        "--problem",
        "smooth1d",
        "--levels",
        "4",
        "--fixed-steps",
        "2",
        "--assert-rates",
    ]);
    assert_eq!(stalled.status.code(), Some(2));
    assert!(stderr_of(&stalled).contains("rate assertion failed"));
}

#[test]
fn bad_inputs_exit_with_status_one() {
    let unknown = run(&["study", "--problem", "nosuch", "--levels", "2"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(stderr_of(&unknown).contains("unknown problem"));

    let conflict = run(&[
        "study",
        "--problem",
        "smooth1d",
        "--fixed-steps",
        "4",
        "--tol-time",
        "1e-3",
    ]);
    assert_eq!(conflict.status.code(), Some(1));

    let missing = run(&["study", "--levels", "2"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr_of(&missing).contains("no problem"));

    let gone = run(&["norms", "--traj", "/nonexistent/trajectory.txt"]);
    assert_eq!(gone.status.code(), Some(1));
}

#[test]
fn config_files_feed_the_study_and_flags_override_them() {
    let cfg = temp_path("study.cfg");
    let csv = temp_path("cfg-out.csv");
    std::fs::write(
        &cfg,
        "# smooth study configuration\nproblem = smooth1d\nlevels = 2\nfixed_steps = 8\n",
    )
    .expect("write config");

    let out = run(&[
        "study",
        "--config",
        cfg.to_str().unwrap(),
        "--levels",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let rows =
        ConvergenceReport::parse_csv(&std::fs::read_to_string(&csv).expect("CSV")).expect("parse");
    assert_eq!(rows.len(), 3, "--levels must override the config file");
    let tau0 = rows[0].tau;
    assert!((tau0 - rows[1].tau).abs() < 1e-15, "fixed steps keep tau");

    let bad = temp_path("bad.cfg");
    std::fs::write(&bad, "problem = smooth1d\nwibble = 3\n").expect("write config");
    let rejected = run(&["study", "--config", bad.to_str().unwrap()]);
    assert_eq!(rejected.status.code(), Some(1));
    assert!(stderr_of(&rejected).contains("config line 2"));

    let _ = std::fs::remove_file(&cfg);
    let _ = std::fs::remove_file(&csv);
    let _ = std::fs::remove_file(&bad);
}

#[test]
fn verify_prints_one_line_per_check() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let pass_lines = text.lines().filter(|l| l.starts_with("PASS")).count();
    assert_eq!(pass_lines, 7, "unexpected verify output: {text}");
    assert!(text.contains("all 7 checks passed"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn norms_reports_the_stored_trajectory() {
    let problem = by_name("smooth1d").expect("problem");
    let mesh = problem.base_mesh(2).expect("mesh");
    let traj = run_problem(&problem, &mesh, 4, 1e-10).expect("stepping");

    let path = temp_path("traj.txt");
    let file = std::fs::File::create(&path).expect("create trajectory file");
    let mut writer = BufWriter::new(file);
    traj.write_text(&mut writer).expect("serialize trajectory");
    drop(writer);

    let out = run(&["norms", "--traj", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("mesh: dim 1"), "unexpected output: {text}");
    assert!(text.contains("steps: 4"));
    assert!(text.contains("final L2 norm"));
    assert!(text.contains("final H1 norm"));
    assert!(text.contains("discrete energy norm"));
    let _ = std::fs::remove_file(&path);
}

#[test]
fn help_and_version_exit_cleanly() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout_of(&help).contains("study"));

    let version = run(&["--version"]);
    assert_eq!(version.status.code(), Some(0));
}
