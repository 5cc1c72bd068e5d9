//! End-to-end tests of the installed binary: exit codes, output contracts,
//! determinism, and config handling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lonflow::testing::flow12_lon;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lonflow"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Data rows of a CSV produced by this tool: comment lines stripped, header
/// first.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_toy4(dir: &Path) -> PathBuf {
    let p = dir.join("toy4.dat");
    std::fs::write(
        &p,
        "4\n\n0 2 3 1\n2 0 1 4\n3 1 0 2\n1 4 2 0\n\n0 5 1 3\n5 0 2 1\n1 2 0 4\n3 1 4 0\n",
    )
    .unwrap();
    p
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["metrics", "--help"]] {
        let out = run_in(dir.path(), args);
        assert_eq!(code(&out), 0, "{args:?}");
    }
}

#[test]
fn missing_required_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["extract-lon", "--k-mode", "low", "--out", "x.lon"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--instance"));

    let out = run_in(dir.path(), &["no-such-command"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_network_is_data_error_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.lon"), "not a network\n").unwrap();
    let out = run_in(dir.path(), &["metrics", "broken.lon"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("broken.lon"), "{}", stderr(&out));

    let out = run_in(dir.path(), &["metrics", "absent.lon"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.lon"));
}

#[test]
fn single_assignment_instance_yields_single_node_network() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.dat"), "1\n\n7\n\n3\n").unwrap();
    let out = run_in(
        dir.path(),
        &["extract-lon", "--instance", "one.dat", "--k-mode", "low", "--runs", "1", "--out", "one.lon"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("one.lon")).unwrap();
    assert!(text.contains("nodes 1\n0 21\nedges 0"), "{text}");
}

#[test]
fn extraction_bytes_ignore_thread_count_and_repetition() {
    let dir = tempfile::tempdir().unwrap();
    write_toy4(dir.path());
    let common = [
        "extract-lon", "--instance", "toy4.dat", "--k-mode", "high", "--runs", "20", "--seed", "5",
    ];
    for (out_file, jobs) in [("a.lon", "1"), ("b.lon", "4"), ("c.lon", "2")] {
        let mut args: Vec<&str> = common.to_vec();
        args.extend(["--jobs", jobs, "--out", out_file]);
        assert_eq!(code(&run_in(dir.path(), &args)), 0);
    }
    let a = std::fs::read(dir.path().join("a.lon")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.lon")).unwrap());
    assert_eq!(a, std::fs::read(dir.path().join("c.lon")).unwrap());
}

#[test]
fn metrics_on_empty_directory_writes_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("lons")).unwrap();
    let out = run_in(dir.path(), &["metrics", "lons", "--out", "m.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read(dir.path().join("m.csv")).unwrap(), b"");
}

#[test]
fn tiny_instance_perf_gap_is_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("two.dat"), "2\n\n0 1\n1 0\n\n0 2\n2 0\n").unwrap();
    std::fs::write(dir.path().join("best.txt"), "two 4\n").unwrap();
    for algo in ["ils", "rots"] {
        let out = run_in(
            dir.path(),
            &[
                "run-perf", "--instance", "two.dat", "--algorithm", algo, "--runs", "8",
                "--seed", "3", "--best-known", "best.txt",
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let rows = csv_rows(&stdout(&out));
        assert_eq!(rows[0], ["instance", "algorithm", "runs", "seed", "gap"]);
        assert_eq!(rows[1], ["two", algo, "8", "3", "1"]);
    }
}

#[test]
fn perf_without_best_known_entry_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write_toy4(dir.path());
    std::fs::write(dir.path().join("best.txt"), "other 10\n").unwrap();
    let out = run_in(
        dir.path(),
        &["run-perf", "--instance", "toy4.dat", "--algorithm", "ils", "--best-known", "best.txt"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("toy4"), "{}", stderr(&out));
}

#[test]
fn config_file_fills_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    write_toy4(dir.path());
    std::fs::write(dir.path().join("run.conf"), "runs=7\nseed=9\n# comment\n").unwrap();

    let out = run_in(
        dir.path(),
        &[
            "--config", "run.conf", "extract-lon", "--instance", "toy4.dat", "--k-mode", "low",
            "--out", "from_conf.lon",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("from_conf.lon")).unwrap();
    assert!(text.contains("meta runs 7\n"), "{text}");
    assert!(text.contains("meta seed 9\n"), "{text}");

    let out = run_in(
        dir.path(),
        &[
            "--config", "run.conf", "extract-lon", "--instance", "toy4.dat", "--k-mode", "low",
            "--runs", "3", "--out", "override.lon",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("override.lon")).unwrap();
    assert!(text.contains("meta runs 3\n"), "{text}");
    assert!(text.contains("meta seed 9\n"), "{text}");

    std::fs::write(dir.path().join("bad.conf"), "iterations=5\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "--config", "bad.conf", "extract-lon", "--instance", "toy4.dat", "--k-mode", "low",
            "--out", "z.lon",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("iterations"), "{}", stderr(&out));
}

#[test]
fn fixture_metrics_csv_carries_hand_checked_values() {
    let dir = tempfile::tempdir().unwrap();
    flow12_lon().save(&dir.path().join("flow12.lon"), false).unwrap();
    let out = run_in(dir.path(), &["metrics", "flow12.lon"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = csv_rows(&stdout(&out));
    let header = &rows[0];
    let row = &rows[1];
    let field = |name: &str| {
        let k = header.iter().position(|h| h == name).expect(name);
        row[k].parse::<f64>().expect(name)
    };
    assert_eq!(row[0], "flow12");
    assert!((field("i1") - 1.0 / 64.0).abs() <= 1e-12);
    assert!((field("i2") - 1.0 / 192.0).abs() <= 1e-12);
    assert!((field("d2") - 1.0 / 384.0).abs() <= 1e-12);
    assert_eq!(field("n_sources"), 4.0);
    assert_eq!(field("n_sinks"), 4.0);
}

#[test]
fn projector_dump_rows_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    flow12_lon().save(&dir.path().join("flow12.lon"), false).unwrap();
    let out = run_in(
        dir.path(),
        &["metrics", "flow12.lon", "--gamma-dump", "gamma", "--out", "m.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dump = std::fs::read_to_string(dir.path().join("gamma/flow12_low.gamma.csv")).unwrap();
    let rows = csv_rows(&dump);
    assert_eq!(rows.len(), 12);
    for row in rows {
        let sum: f64 = row.iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-12, "row sums to {sum}");
    }
}

#[test]
fn viz_emits_dot_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    flow12_lon().save(&dir.path().join("flow12.lon"), false).unwrap();
    let out = run_in(
        dir.path(),
        &["viz", "flow12.lon", "--layout-json", "layout.json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dot = stdout(&out);
    assert!(dot.starts_with("// lonflow "), "{dot}");
    assert!(dot.contains("digraph flow {"));
    let layout = std::fs::read_to_string(dir.path().join("layout.json")).unwrap();
    assert!(layout.contains("\"units\""));

    let again = run_in(dir.path(), &["viz", "flow12.lon"]);
    assert_eq!(stdout(&again), dot);
}

#[test]
fn feature_export_and_correlation_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_toy4(dir.path());
    for (k_mode, out_file) in [("low", "lons/t_low.lon"), ("high", "lons/t_high.lon")] {
        std::fs::create_dir_all(dir.path().join("lons")).unwrap();
        let out = run_in(
            dir.path(),
            &[
                "extract-lon", "--instance", "toy4.dat", "--k-mode", k_mode, "--runs", "10",
                "--seed", "2", "--out", out_file,
            ],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    std::fs::write(
        dir.path().join("perf.csv"),
        "instance,algorithm,runs,seed,gap\ntoy4,ils,5,1,1\ntoy4,rots,5,1,1.25\n",
    )
    .unwrap();

    let out = run_in(
        dir.path(),
        &["export-features", "lons", "--perf", "perf.csv", "--out", "features.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let features = std::fs::read_to_string(dir.path().join("features.csv")).unwrap();
    let rows = csv_rows(&features);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "instance");
    assert!(rows[1].last().unwrap() == "1.25");

    let out = run_in(
        dir.path(),
        &["correlate", "--features", "features.csv", "--out", "report.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // one joined row per regime is not enough for a coefficient
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("baseline,low,rots_gap,ils_gap,1,NA,NA"), "{report}");
    assert!(report.contains("baseline,high,rots_gap,ils_gap,1,NA,NA"));
}
