use std::path::Path;
use std::process::{Command, Output};

fn eqf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqf")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_writes_one_row_per_gyro_tick() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("log.csv");
    let o = eqf(&["simulate", "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len() - 1, 20 * 100 + 1);
    let width = lines[0].split(',').count();
    assert_eq!(width, 33);
    assert!(lines.iter().all(|l| l.split(',').count() == width));
    assert!(lines[1].starts_with("0.000000000,"));
    assert!(lines.last().unwrap().starts_with("20.000000000,"));
}

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario.seed = 5\nscenario.duration = 3\n");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(eqf(&["simulate", "--config", p(&cfg), "-o", p(&a)]).status.success());
    assert!(eqf(&["simulate", "--config", p(&cfg), "-o", p(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("log.csv");
    for (text, key) in [
        ("scenario.predict_rat = 100\n", "scenario.predict_rat"),
        ("filter.k_n = \"ten\"\n", "filter.k_n"),
        ("[montecarlo]\nrunz = 3\n", "montecarlo.runz"),
    ] {
        let cfg = write_config(dir.path(), text);
        let o = eqf(&["simulate", "--config", p(&cfg), "-o", p(&out)]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
}

#[test]
fn exported_sensors_replay_to_identical_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "scenario.seed = 11\nscenario.duration = 5\nscenario.measure_rate = 30\n");
    let (sim, log, rep) =
        (dir.path().join("sim.csv"), dir.path().join("sensors.log"), dir.path().join("rep.csv"));
    assert!(eqf(&["simulate", "--config", p(&cfg), "-o", p(&sim), "--export-sensors", p(&log)])
        .status
        .success());
    let o = eqf(&["replay", "--log", p(&log), "--config", p(&cfg), "-o", p(&rep)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&sim).unwrap(), std::fs::read_to_string(&rep).unwrap());
}

#[test]
fn replay_rejects_out_of_order_timestamps_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.log");
    std::fs::write(&log, "G,0.00,0,0,0\nG,0.01,0,0,0\nD,0.01,1,0,0,0,1,0\nG,0.005,0,0,0\n").unwrap();
    let o = eqf(&["replay", "--log", p(&log), "-o", p(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn gyro_only_replay_predicts_without_truth_columns() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("gyro.log");
    let mut text = String::from("# gyro only\n");
    for k in 0..=100 {
        text.push_str(&format!("G,{}.{:02},0.1,-0.2,0.3\n", k / 100, k % 100));
    }
    std::fs::write(&log, text).unwrap();
    let out = dir.path().join("o.csv");
    let o = eqf(&["replay", "--log", p(&log), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("prediction only"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(!csv.lines().next().unwrap().contains("err_Q"));
    // no corrections are ever applied
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0,0,0,0,0,0")));
}

#[test]
fn observability_ranks() {
    let o = eqf(&["observability"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("rank: 9 of 12"), "{out}");
    assert!(out.contains("angle to R^T (d1 x d2)"));

    let o = eqf(&["observability", "--expanded", "--seed", "3"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rank: 12 of 12"));

    let o = eqf(&["observability", "--d1", "1,0,0", "--d2", "-1,0,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("collinear"));
}

#[test]
fn montecarlo_is_deterministic_and_rejects_zero_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario.duration = 12\n");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(eqf(&["montecarlo", "--config", p(&cfg), "-n", "4", "-o", p(&a)]).status.success());
    assert!(eqf(&["montecarlo", "--config", p(&cfg), "-n", "4", "-o", p(&b), "--sequential"])
        .status
        .success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert!(text.contains("# success_rate,"));

    let o = eqf(&["montecarlo", "-n", "0", "-o", p(&a)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_output_is_csv() {
    let o = eqf(&["bench", "--steps", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["step", "samples", "median_us", "p99_us"]);
    for row in &rows[1..] {
        assert_eq!(row[1], "200");
        assert!(row[2].parse::<f64>().unwrap() > 0.0);
        assert!(row[3].parse::<f64>().unwrap() >= row[2].parse::<f64>().unwrap());
    }
}

#[test]
fn compare_ekf_emits_paired_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario.duration = 2\n");
    let out = dir.path().join("pair.csv");
    let o = eqf(&["compare-ekf", "--config", p(&cfg), "-o", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 202);
    assert!(csv.starts_with("t,eqf_err_Q,eqf_err_q,ekf_err_Q,ekf_err_q"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(eqf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(eqf(&["simulate"]).status.code(), Some(1));
    assert_eq!(eqf(&["--help"]).status.code(), Some(0));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario.measure_rate = 1\nfilter.damping_form = \"euler\"\n");
    let o = eqf(&["simulate", "--config", p(&cfg), "-o", p(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("positive definite"));
}
