//! CSV emitters. Floats use the shortest representation that reads back to
//! the same value; times are printed from integer nanoseconds.

use std::fmt::Write as _;

use eqf_core::sim::{LogRow, MonteCarloStats, RunLog, RunMetrics};

use crate::sensor_log::format_time;

const R_HAT: [&str; 9] =
    ["Rhat00", "Rhat01", "Rhat02", "Rhat10", "Rhat11", "Rhat12", "Rhat20", "Rhat21", "Rhat22"];
const R_TRUE: [&str; 9] = ["R00", "R01", "R02", "R10", "R11", "R12", "R20", "R21", "R22"];

pub fn run_log_header(with_truth: bool) -> String {
    let mut cols = vec!["t"];
    cols.extend(R_HAT);
    cols.extend(["what_x", "what_y", "what_z"]);
    if with_truth {
        cols.extend(R_TRUE);
        cols.extend(["w_x", "w_y", "w_z", "err_Q", "err_q"]);
    }
    cols.extend(["deltaQ_x", "deltaQ_y", "deltaQ_z", "deltaq_x", "deltaq_y", "deltaq_z"]);
    cols.join(",")
}

fn push_row(s: &mut String, row: &LogRow, with_truth: bool) {
    s.push_str(&format_time(row.t));
    let mut put = |v: f64| {
        // adding zero folds -0 into 0
        let _ = write!(s, ",{}", v + 0.0);
    };
    let r = row.estimate.rot.matrix();
    (0..9).for_each(|k| put(r[(k / 3, k % 3)]));
    row.estimate.omega.iter().for_each(|&v| put(v));
    if with_truth {
        let truth = row.truth.expect("truth present on every row");
        let r = truth.rot.matrix();
        (0..9).for_each(|k| put(r[(k / 3, k % 3)]));
        truth.omega.iter().for_each(|&v| put(v));
        let (a, w) = row.error.expect("error present with truth");
        put(a);
        put(w);
    }
    let (dq, dv) = row.correction.map(|c| (c.rot_vector(), c.vec)).unwrap_or_default();
    dq.iter().chain(dv.iter()).for_each(|&v| put(v));
    s.push('\n');
}

pub fn run_log_csv(log: &RunLog) -> String {
    let with_truth = log.has_truth();
    let mut s = run_log_header(with_truth);
    s.push('\n');
    for row in &log.rows {
        push_row(&mut s, row, with_truth);
    }
    s
}

pub fn montecarlo_csv(stats: &MonteCarloStats) -> String {
    let mut s = String::from(
        "run,success,convergence_time,attitude_error,rate_error,relative_rate_error,final_err_Q,final_err_q,failure\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &stats.runs {
        let m = r.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.index,
            r.success,
            opt(r.convergence_time),
            opt(m.map(|m| m.attitude_error)),
            opt(m.map(|m| m.rate_error)),
            opt(m.map(|m| m.relative_rate_error)),
            opt(r.final_error.map(|e| e.0)),
            opt(r.final_error.map(|e| e.1)),
            r.failure.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    let _ = writeln!(s, "# aggregate (means over successful runs only)");
    let _ = writeln!(s, "# n_runs,{}", stats.n_runs);
    let _ = writeln!(s, "# n_failures,{}", stats.n_failures);
    let _ = writeln!(s, "# success_rate,{}", stats.success_rate);
    let _ = writeln!(s, "# mean_attitude_error,{}", stats.mean_attitude_error);
    let _ = writeln!(s, "# mean_rate_error,{}", stats.mean_rate_error);
    let _ = writeln!(s, "# mean_relative_rate_error,{}", stats.mean_relative_rate_error);
    s
}

pub fn compare_csv(eqf: &RunLog, ekf: &RunLog) -> String {
    let mut s = String::from("t,eqf_err_Q,eqf_err_q,ekf_err_Q,ekf_err_q,eqf_trace,ekf_trace\n");
    for (a, b) in eqf.rows.iter().zip(&ekf.rows) {
        let (ea, eb) = (a.error.unwrap_or((f64::NAN, f64::NAN)), b.error.unwrap_or((f64::NAN, f64::NAN)));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            format_time(a.t),
            ea.0,
            ea.1,
            eb.0,
            eb.1,
            a.covariance_trace,
            b.covariance_trace
        );
    }
    s
}

/// Human-readable summary; Euler angles are ZYX (yaw-pitch-roll).
pub fn metrics_summary(label: &str, m: &RunMetrics, start: f64) -> String {
    let e = m.euler_error.map(f64::to_degrees);
    format!(
        "{label} (t > {start} s, {} samples): attitude error {:.4}, rate error {:.4} rad/s ({:.3} deg/s), relative rate error {:.2}%\n\
         {label} mean |Euler error| ZYX roll/pitch/yaw: {:.3} / {:.3} / {:.3} deg",
        m.samples,
        m.attitude_error,
        m.rate_error,
        m.rate_error.to_degrees(),
        100.0 * m.relative_rate_error,
        e.x,
        e.y,
        e.z
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_headers() {
        assert_eq!(
            run_log_header(true),
            "t,Rhat00,Rhat01,Rhat02,Rhat10,Rhat11,Rhat12,Rhat20,Rhat21,Rhat22,what_x,what_y,what_z,\
             R00,R01,R02,R10,R11,R12,R20,R21,R22,w_x,w_y,w_z,err_Q,err_q,\
             deltaQ_x,deltaQ_y,deltaQ_z,deltaq_x,deltaq_y,deltaq_z"
        );
        assert_eq!(
            run_log_header(false),
            "t,Rhat00,Rhat01,Rhat02,Rhat10,Rhat11,Rhat12,Rhat20,Rhat21,Rhat22,what_x,what_y,what_z,\
             deltaQ_x,deltaQ_y,deltaQ_z,deltaq_x,deltaq_y,deltaq_z"
        );
    }
}
