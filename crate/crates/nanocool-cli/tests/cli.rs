//! End-to-end checks of the command-line interface, driven through the
//! compiled binary.

use std::f64::consts::PI;
use std::process::{Command, Output};

use approx::assert_relative_eq;
use nanocool::control::{lpf_min_occupation, lpf_optimal_s};

fn nanocool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanocool"))
        .args(args)
        .env_remove("NANOCOOL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn csv_rows(text: &str, header: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header), "header mismatch");
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn curve_rows_match_the_library_closed_forms() {
    let out = nanocool(&["curve", "--method", "lpf", "--eta", "0.8", "--gamma", "0.05:0.05:0.15"]);
    let text = stdout_of(&out);
    let rows = csv_rows(&text, "gamma_tilde,occupation,optimal_s,optimal_g,stderr");
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let gamma: f64 = row[0].parse().unwrap();
        let occupation: f64 = row[1].parse().unwrap();
        let s: f64 = row[2].parse().unwrap();
        assert_relative_eq!(occupation, lpf_min_occupation(gamma, 0.8).unwrap(), max_relative = 1e-12);
        assert_relative_eq!(s, lpf_optimal_s(gamma, 0.8).unwrap(), max_relative = 1e-12);
        assert!(row[3].is_empty(), "lpf has no gain column");
        assert!(row[4].is_empty(), "closed forms carry no stderr");
    }
}

#[test]
fn sweeps_flag_bad_points_and_keep_going() {
    let out = nanocool(&["curve", "--method", "lpf", "--eta", "1.0", "--gamma", "0:0.05:0.1"]);
    let text = stdout_of(&out);
    let rows = csv_rows(&text, "gamma_tilde,occupation,optimal_s,optimal_g,stderr");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1], "status=error:domain");
    for row in &rows[1..] {
        assert!(row[1].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn fixed_seed_summaries_are_byte_identical() {
    let args = [
        "simulate", "--method", "lpf", "--eta", "1.0", "--gamma", "0.1",
        "--time", "30", "--burn-in", "3", "--ntraj", "2", "--seed", "7",
    ];
    let first = nanocool(&args);
    let second = nanocool(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn environment_seed_matches_the_flag() {
    let flag_args = [
        "simulate", "--method", "lpf", "--eta", "1.0", "--gamma", "0.1",
        "--time", "30", "--burn-in", "3", "--ntraj", "2", "--seed", "7",
    ];
    let env_args = [
        "simulate", "--method", "lpf", "--eta", "1.0", "--gamma", "0.1",
        "--time", "30", "--burn-in", "3", "--ntraj", "2",
    ];
    let by_flag = nanocool(&flag_args);
    let by_env = Command::new(env!("CARGO_BIN_EXE_nanocool"))
        .args(env_args)
        .env("NANOCOOL_SEED", "7")
        .output()
        .expect("binary runs");
    assert!(by_env.status.success());
    assert_eq!(by_flag.stdout, by_env.stdout);
}

#[test]
fn unstable_band_pass_exits_with_the_instability_code() {
    let out = nanocool(&[
        "simulate", "--method", "cd-bandpass", "--eta", "1.0", "--gamma", "0.1",
        "--s", "0.5", "--g", "0.7", "--time", "5", "--burn-in", "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stability"), "stderr should cite the stability bound: {err}");
    assert!(err.contains("(s_tilde + 1/s_tilde)/4"), "stderr should name the ceiling: {err}");
}

#[test]
fn trajectory_simulation_rejects_the_infinite_gain_benchmark() {
    let out = nanocool(&["simulate", "--method", "lqg", "--eta", "1.0", "--gamma", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_grids_are_invalid_input() {
    let out = nanocool(&["curve", "--method", "lpf", "--eta", "1.0", "--gamma", "0.1:0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nanocool(&["curve", "--method", "lpf", "--eta", "1.0", "--gamma", "0.2:0.1:0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_method_is_invalid_input() {
    let out = nanocool(&["curve", "--method", "kalman", "--eta", "1.0", "--gamma", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn purity_table_lists_methods_in_the_requested_order() {
    let out = nanocool(&[
        "purity", "--methods", "lqg,lpf", "--eta", "0.9", "--gamma", "0.05:0.05:0.1",
    ]);
    let text = stdout_of(&out);
    let rows = csv_rows(&text, "method,eta,gamma_tilde,purity,stderr");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "lqg");
    assert_eq!(rows[2][0], "lpf");
    let lqg_purity: f64 = rows[0][3].parse().unwrap();
    assert_relative_eq!(lqg_purity, 0.9f64.sqrt(), max_relative = 1e-12);
    for row in &rows {
        assert_eq!(row[1], "0.9");
        assert!(row[4].is_empty());
    }
}

#[test]
fn calibration_reports_the_measurement_strength() {
    let omega = format!("{}", 2.0 * PI * 104.0e3);
    let out = nanocool(&[
        "calibrate", "--mass", "2.8e-18", "--omega", &omega,
        "--precision", "2.0e-14", "--eta", "0.34", "--skip-delayed",
    ]);
    let text = stdout_of(&out);
    let gamma_line = text
        .lines()
        .find(|l| l.starts_with("gamma_tilde: "))
        .expect("gamma_tilde line");
    let gamma: f64 = gamma_line["gamma_tilde: ".len()..].parse().unwrap();
    assert_relative_eq!(gamma, 0.32428197555778193, max_relative = 1e-10);
    assert!(text.contains("source: noise-floor"));
    assert!(text.contains("two-sided"));
    for method in ["lpf", "lqg", "cd-bandpass"] {
        assert!(
            text.contains(&format!("minimum occupation, {method}: ")),
            "missing occupation line for {method}"
        );
    }
}

#[test]
fn calibration_lists_every_missing_field_at_once() {
    let out = nanocool(&["calibrate", "--mass", "2.8e-18"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("omega"), "stderr: {err}");
    assert!(err.contains("eta"), "stderr: {err}");
}

#[test]
fn calibration_reads_parameter_files() {
    let dir = std::env::temp_dir().join(format!("nanocool-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("trap.toml");
    std::fs::write(
        &path,
        "# attogram trap\nmass = 1e-18\nomega = 487610.0\nprecision = 2.27e-14\neta = 0.24\n",
    )
    .unwrap();
    let out = nanocool(&["calibrate", "--params", path.to_str().unwrap(), "--skip-delayed"]);
    let text = stdout_of(&out);
    assert!(text.contains("gamma_tilde: "));
    assert!(text.contains("eta: 0.24"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dump_files_appear_with_the_advertised_layout() {
    let dir = std::env::temp_dir().join(format!("nanocool-cli-dump-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = nanocool(&[
        "simulate", "--method", "cd-delayed", "--eta", "1.0", "--gamma", "0.1",
        "--g", "0.09", "--time", "3", "--burn-in", "1", "--ntraj", "2", "--seed", "5",
        "--dump-dir", dir.to_str().unwrap(), "--dump-stride", "100",
    ]);
    stdout_of(&out);
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert!(names[0].starts_with("cd-delayed-"));
    let body = std::fs::read_to_string(dir.join(&names[0])).unwrap();
    assert!(body.starts_with("t,X,P,I\n"));
    assert!(body.lines().count() > 2);
    std::fs::remove_dir_all(&dir).unwrap();
}
