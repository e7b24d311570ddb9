//! End-to-end tests spawning the `aoi` binary.

use std::process::{Command, Output};

fn aoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
        .args(args)
        .env_remove("AOI_SEED")
        .output()
        .expect("failed to spawn aoi")
}

fn stdout_of(args: &[&str]) -> String {
    let out = aoi(args);
    assert!(
        out.status.success(),
        "aoi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Value of a column in the first data row of a one-row CSV.
fn csv_field(csv: &str, column: &str) -> String {
    let mut lines = csv.lines();
    let headers: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = headers
        .iter()
        .position(|h| *h == column)
        .unwrap_or_else(|| panic!("no column {column} in {headers:?}"));
    row[idx].to_string()
}

#[test]
fn solve_exponential_small_cutoff() {
    let csv = stdout_of(&["solve", "--dist", "exp:rate=1", "--gamma", "0.01"]);
    let lambda: f64 = csv_field(&csv, "lambda_star").parse().unwrap();
    assert!(lambda > 1.0 && lambda <= 1.01, "{lambda}");
}

#[test]
fn solve_shifted_exponential_zero_wait() {
    let csv = stdout_of(&["solve", "--dist", "sexp:rate=1,c=1.5", "--gamma", "3"]);
    assert_eq!(csv_field(&csv, "zero_wait"), "true");
}

#[test]
fn solve_deterministic() {
    let csv = stdout_of(&["solve", "--dist", "det:c=1", "--gamma", "2"]);
    let lambda: f64 = csv_field(&csv, "lambda_star").parse().unwrap();
    assert!((lambda - 1.5).abs() < 1e-12);
}

#[test]
fn bad_token_exits_2() {
    let out = aoi(&["solve", "--dist", "exp:rate=0", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_gamma_exits_2() {
    let out = aoi(&["solve", "--dist", "exp:rate=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    // Cutoff below the support shift: valid syntax, impossible truncation.
    let out = aoi(&["solve", "--dist", "sexp:rate=1,c=1", "--gamma", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn c_sweep_gamma_bar_column_empties_at_sqrt2() {
    let csv = stdout_of(&[
        "sweep",
        "--dist",
        "exp:rate=1",
        "--c-sweep",
        "--c-min",
        "1.3",
        "--c-max",
        "1.5",
        "--c-points",
        "3",
        "--grid-points",
        "30",
    ]);
    let sqrt2 = std::f64::consts::SQRT_2;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let c: f64 = cells[0].parse().unwrap();
        let all_zw = cells[4] == "true";
        assert_eq!(all_zw, c >= sqrt2, "c = {c}");
        assert_eq!(cells[5].is_empty(), all_zw, "c = {c}: gamma_bar `{}`", cells[5]);
    }
}

#[test]
fn sweep_best_row_is_minimum() {
    let csv = stdout_of(&[
        "sweep",
        "--dist",
        "sexp:rate=1,c=0.5",
        "--grid-points",
        "30",
    ]);
    let mut best = None;
    let mut min_grid = f64::INFINITY;
    for line in csv.lines().skip(1) {
        if line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let lambda: f64 = cells[2].parse().unwrap();
        match cells[0] {
            "grid" => min_grid = min_grid.min(lambda),
            "best" => best = Some(lambda),
            other => panic!("unexpected row kind {other}"),
        }
    }
    assert!(best.unwrap() <= min_grid + 1e-12);
}

#[test]
fn compare_exponential_baseline_row() {
    let csv = stdout_of(&["compare", "--dist", "exp:rate=1"]);
    let row = csv
        .lines()
        .find(|l| l.starts_with("no cutoff & zero-wait"))
        .unwrap();
    let lambda: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((lambda - 2.0).abs() < 1e-9);
}

#[test]
fn compare_crossover_section_present_when_requested() {
    let csv = stdout_of(&[
        "compare",
        "--dist",
        "sexp:rate=1,c=0.5",
        "--crossover",
        "--c-min",
        "0.1",
        "--c-max",
        "0.5",
        "--c-points",
        "3",
    ]);
    assert!(csv.contains("\nc,optimal_cutoff_zero_wait,no_cutoff_optimal_wait\n"));
    let n_rows = csv
        .lines()
        .skip_while(|l| !l.starts_with("c,"))
        .skip(1)
        .count();
    assert_eq!(n_rows, 3);
}

#[test]
fn simulate_check_gap_within_three_stderr() {
    let csv = stdout_of(&[
        "simulate",
        "--dist",
        "exp:rate=1",
        "--gamma",
        "1",
        "--theta",
        "auto",
        "--epochs",
        "1000000",
        "--seed",
        "7",
        "--check",
    ]);
    let gap_se: f64 = csv_field(&csv, "gap_stderr_units").parse().unwrap();
    assert!(gap_se <= 3.0, "gap is {gap_se} stderr units");
}

#[test]
fn simulate_same_seed_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let out_path = dir.path().join(format!("report-{tag}.csv"));
        let traj_path = dir.path().join(format!("traj-{tag}.csv"));
        let out = aoi(&[
            "simulate",
            "--dist",
            "sexp:rate=1,c=0.5",
            "--gamma",
            "2",
            "--theta",
            "1.0",
            "--epochs",
            "200",
            "--seed",
            "7",
            "--trajectory",
            traj_path.to_str().unwrap(),
            "--output",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(&out_path).unwrap(),
            std::fs::read_to_string(&traj_path).unwrap(),
        )
    };
    let (report_a, traj_a) = run("a");
    let (report_b, traj_b) = run("b");
    assert_eq!(report_a, report_b);
    assert_eq!(traj_a, traj_b);
}

#[test]
fn trajectory_file_has_requested_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    stdout_of(&[
        "simulate",
        "--dist",
        "det:c=1",
        "--gamma",
        "2",
        "--epochs",
        "10",
        "--seed",
        "1",
        "--trajectory",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    // Header + initial point + two breakpoints per epoch.
    assert_eq!(text.lines().count(), 1 + 1 + 2 * 10);
    assert_eq!(text.lines().next().unwrap(), "time,age");
}

#[test]
fn json_and_csv_values_match_to_12_digits() {
    let args = ["solve", "--dist", "sexp:rate=1.3,c=0.4", "--gamma", "2.7"];
    let csv = stdout_of(&args);
    let mut jargs = args.to_vec();
    jargs.extend(["--format", "json"]);
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&jargs)).unwrap();
    for key in ["lambda_star", "theta", "residual"] {
        let c: f64 = csv_field(&csv, key).parse().unwrap();
        let j = json[key].as_f64().unwrap();
        let rel = (c - j).abs() / j.abs().max(1e-300);
        assert!(rel < 1e-12, "{key}: csv {c} vs json {j}");
        // Stronger: the rendered strings are identical.
        assert_eq!(csv_field(&csv, key), json[key].to_string());
    }
}

#[test]
fn config_file_equals_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(
        &path,
        "command=solve\ndist=sexp:rate=1,c=0.5\ngamma=2\n",
    )
    .unwrap();
    let from_file = stdout_of(&["solve", "--config", path.to_str().unwrap()]);
    let from_flags = stdout_of(&["solve", "--dist", "sexp:rate=1,c=0.5", "--gamma", "2"]);
    assert_eq!(from_file, from_flags);
    // A flag overrides the file.
    let overridden = stdout_of(&[
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--gamma",
        "3",
    ]);
    assert_ne!(overridden, from_file);
}

#[test]
fn aoi_seed_env_is_default_seed() {
    let args = [
        "simulate",
        "--dist",
        "exp:rate=1",
        "--gamma",
        "1",
        "--theta",
        "0.4",
        "--epochs",
        "5000",
    ];
    let with_env = Command::new(env!("CARGO_BIN_EXE_aoi"))
        .args(args)
        .env("AOI_SEED", "5")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    let mut flag_args = args.to_vec();
    flag_args.extend(["--seed", "5"]);
    let with_flag = stdout_of(&flag_args);
    assert_eq!(String::from_utf8(with_env.stdout).unwrap(), with_flag);
}
