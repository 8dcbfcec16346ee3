use nalgebra::{Matrix3, Vector3};

use super::run::RunLog;

/// ZYX (yaw-pitch-roll) Euler angles of `r`, returned as `[roll, pitch, yaw]`.
pub fn euler_zyx(r: &Matrix3<f64>) -> Vector3<f64> {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    Vector3::new(roll, pitch, yaw)
}

/// Averages over the logged rows after a start time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub samples: usize,
    /// Mean `|Q~ - I|_F`.
    pub attitude_error: f64,
    /// Mean `|q~| = |omega_hat - omega|` (rad/s).
    pub rate_error: f64,
    /// Mean absolute roll, pitch and yaw of `R_hat^T R` (rad).
    pub euler_error: Vector3<f64>,
    /// `rate_error / |omega|`.
    pub relative_rate_error: f64,
}

/// Metrics over rows with `t > start`; `None` without truth or samples.
pub fn metrics(log: &RunLog, start: f64) -> Option<RunMetrics> {
    let mut n = 0usize;
    let (mut att, mut rate, mut omega) = (0.0, 0.0, 0.0);
    let mut euler = Vector3::zeros();
    for row in log.rows.iter().filter(|r| r.time() > start) {
        let (truth, (e_att, e_rate)) = (row.truth?, row.error?);
        n += 1;
        att += e_att;
        rate += e_rate;
        omega += truth.omega.norm();
        let rel = row.estimate.rot.matrix().transpose() * truth.rot.matrix();
        euler += euler_zyx(&rel).abs();
    }
    if n == 0 {
        return None;
    }
    let k = n as f64;
    Some(RunMetrics {
        samples: n,
        attitude_error: att / k,
        rate_error: rate / k,
        euler_error: euler / k,
        relative_rate_error: if omega > 0.0 { rate / omega } else { f64::NAN },
    })
}

/// Thresholds on `|Q~ - I|_F` and `|q~|` and the deadline to reach them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriterion {
    pub attitude: f64,
    pub rate: f64,
    pub deadline: f64,
}

impl Default for SuccessCriterion {
    fn default() -> Self {
        SuccessCriterion { attitude: 0.1, rate: 0.1, deadline: 10.0 }
    }
}

impl SuccessCriterion {
    /// First time after which both errors stay below the thresholds until the
    /// end of the log.
    pub fn convergence_time(&self, log: &RunLog) -> Option<f64> {
        let below = |r: &super::run::LogRow| r.error.is_some_and(|(a, w)| a < self.attitude && w < self.rate);
        match log.rows.iter().rposition(|r| !below(r)) {
            None => log.rows.first().map(|r| r.time()),
            Some(i) => log.rows.get(i + 1).map(|r| r.time()),
        }
    }

    pub fn is_success(&self, log: &RunLog) -> bool {
        self.convergence_time(log).is_some_and(|t| t < self.deadline)
    }
}
