use nalgebra::Vector3;

use crate::ekf::Ekf;
use crate::eqf::EqFilter;
use crate::error::{Error, Result};
use crate::liegroup::AlgebraElement;
use crate::model::{ManifoldState, Measurement};
use crate::symmetry::{error_norms, group_error, state_to_group};

use super::scenario::{nanos_to_secs, SensorStreams};

/// Common interface of the estimators driven by the scheduler.
pub trait AttitudeFilter {
    fn predict(&mut self, u: &Vector3<f64>, dt: f64) -> Result<()>;
    /// Applies a direction measurement that arrived `period` seconds after the previous one.
    fn update(&mut self, y: &Measurement, period: f64) -> Result<()>;
    fn estimate(&self) -> ManifoldState;
    fn last_correction(&self) -> Option<AlgebraElement>;
    fn covariance_trace(&self) -> f64;
    fn lyapunov(&self, truth: &ManifoldState) -> Option<f64>;
}

impl AttitudeFilter for EqFilter {
    fn predict(&mut self, u: &Vector3<f64>, dt: f64) -> Result<()> {
        EqFilter::predict(self, u, dt)
    }

    fn update(&mut self, y: &Measurement, period: f64) -> Result<()> {
        EqFilter::update(self, y, period)
    }

    fn estimate(&self) -> ManifoldState {
        EqFilter::estimate(self)
    }

    fn last_correction(&self) -> Option<AlgebraElement> {
        EqFilter::last_correction(self)
    }

    fn covariance_trace(&self) -> f64 {
        self.state().sigma.trace()
    }

    fn lyapunov(&self, truth: &ManifoldState) -> Option<f64> {
        EqFilter::lyapunov(self, truth).ok()
    }
}

impl AttitudeFilter for Ekf {
    fn predict(&mut self, u: &Vector3<f64>, dt: f64) -> Result<()> {
        Ekf::predict(self, u, dt)
    }

    fn update(&mut self, y: &Measurement, period: f64) -> Result<()> {
        Ekf::update(self, y, period)
    }

    fn estimate(&self) -> ManifoldState {
        Ekf::estimate(self)
    }

    fn last_correction(&self) -> Option<AlgebraElement> {
        None
    }

    fn covariance_trace(&self) -> f64 {
        self.state().p.trace()
    }

    fn lyapunov(&self, _truth: &ManifoldState) -> Option<f64> {
        None
    }
}

/// One logged gyro tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: i64,
    pub estimate: ManifoldState,
    pub truth: Option<ManifoldState>,
    /// `(|Q~ - I|_F, |q~|)` when the truth is known.
    pub error: Option<(f64, f64)>,
    pub correction: Option<AlgebraElement>,
    pub covariance_trace: f64,
    pub lyapunov: Option<f64>,
}

impl LogRow {
    pub fn time(&self) -> f64 {
        nanos_to_secs(self.t)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    /// Times (ns) at which a direction update was applied.
    pub update_times: Vec<i64>,
}

impl RunLog {
    pub fn has_truth(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.truth.is_some())
    }
}

/// Attitude and rate error norms between a truth and an estimate state.
pub fn state_error_norms(truth: &ManifoldState, estimate: &ManifoldState) -> (f64, f64) {
    error_norms(&group_error(&state_to_group(truth), &state_to_group(estimate)))
}

/// Merges the streams by timestamp and drives `filter`.
///
/// Between events the filter predicts with the most recent gyro sample. A
/// direction record triggers an update whose period is the time since the
/// previous direction record (or since the start for the first one; a zero gap
/// falls back to the first positive gap in the stream). A log
/// row is written at every gyro timestamp after all events at that time.
/// Truth records, when present, must share the gyro timestamps.
pub fn run_streams<F: AttitudeFilter + ?Sized>(streams: &SensorStreams, filter: &mut F) -> Result<RunLog> {
    check_sorted(streams)?;
    let start = match (streams.gyro.first(), streams.directions.first()) {
        (Some(g), Some(d)) => g.t.min(d.t),
        (Some(g), None) => g.t,
        (None, Some(d)) => d.t,
        (None, None) => return Ok(RunLog::default()),
    };
    let mut log = RunLog {
        rows: Vec::with_capacity(streams.gyro.len()),
        update_times: Vec::with_capacity(streams.directions.len()),
    };
    // used when a direction record has no positive gap to its predecessor
    let nominal_period =
        streams.directions.windows(2).map(|w| w[1].t - w[0].t).find(|&d| d > 0).map_or(1.0, nanos_to_secs);
    let mut now = start;
    let mut last_direction = start;
    let mut u = Vector3::zeros();
    let (mut gi, mut di, mut ti) = (0, 0, 0);

    while gi < streams.gyro.len() || di < streams.directions.len() {
        let t = match (streams.gyro.get(gi), streams.directions.get(di)) {
            (Some(g), Some(d)) => g.t.min(d.t),
            (Some(g), None) => g.t,
            (None, Some(d)) => d.t,
            (None, None) => unreachable!(),
        };
        if t > now {
            filter.predict(&u, nanos_to_secs(t - now))?;
            now = t;
        }
        while let Some(d) = streams.directions.get(di).filter(|d| d.t == t) {
            let period = if t > last_direction { nanos_to_secs(t - last_direction) } else { nominal_period };
            filter.update(&d.measurement(), period)?;
            log.update_times.push(t);
            last_direction = t;
            di += 1;
        }
        let mut ticked = false;
        while let Some(g) = streams.gyro.get(gi).filter(|g| g.t == t) {
            u = g.u;
            gi += 1;
            ticked = true;
        }
        if ticked {
            while streams.truth.get(ti).is_some_and(|r| r.t < t) {
                ti += 1;
            }
            let truth = streams.truth.get(ti).filter(|r| r.t == t).map(|r| r.state);
            if truth.is_none() && !streams.truth.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "no truth record at gyro time {:.9} s",
                    nanos_to_secs(t)
                )));
            }
            let estimate = filter.estimate();
            log.rows.push(LogRow {
                t,
                estimate,
                truth,
                error: truth.map(|x| state_error_norms(&x, &estimate)),
                correction: filter.last_correction(),
                covariance_trace: filter.covariance_trace(),
                lyapunov: truth.and_then(|x| filter.lyapunov(&x)),
            });
        }
    }
    Ok(log)
}

fn check_sorted(streams: &SensorStreams) -> Result<()> {
    let sorted = |ts: &mut dyn Iterator<Item = i64>, name: &str| -> Result<()> {
        let mut prev = i64::MIN;
        for (i, t) in ts.enumerate() {
            if t < prev {
                return Err(Error::InvalidArgument(format!(
                    "{name} record {i} goes back in time ({:.9} s)",
                    nanos_to_secs(t)
                )));
            }
            prev = t;
        }
        Ok(())
    };
    sorted(&mut streams.gyro.iter().map(|r| r.t), "gyro")?;
    sorted(&mut streams.directions.iter().map(|r| r.t), "direction")?;
    sorted(&mut streams.truth.iter().map(|r| r.t), "truth")
}
