use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::liegroup::random_rotation;
use crate::model::{
    apply_noise, integrate_truth, measure, ManifoldState, Measurement, ReferenceDirections, SystemInput,
};

pub const NANOS_PER_SEC: i64 = 1_000_000_000;

pub fn secs_to_nanos(t: f64) -> i64 {
    (t * NANOS_PER_SEC as f64).round() as i64
}

pub fn nanos_to_secs(t: i64) -> f64 {
    t as f64 * 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration: f64,
    pub predict_rate: f64,
    pub measure_rate: f64,
    pub update_iterations: usize,
    pub sigma_theta: f64,
    pub refs: ReferenceDirections,
    /// Half-width of the per-axis uniform range for the target rate `omega_T`.
    pub omega_t_range: f64,
    /// Half-width of the per-axis uniform range for the chaser rate `u`.
    pub u_range: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            duration: 20.0,
            predict_rate: 100.0,
            measure_rate: 100.0,
            update_iterations: 1,
            sigma_theta: 0.1,
            refs: ReferenceDirections::standard(),
            omega_t_range: 1.5,
            u_range: 1.5,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.duration, "duration")?;
        positive(self.predict_rate, "predict_rate")?;
        positive(self.measure_rate, "measure_rate")?;
        if self.update_iterations == 0 {
            return Err(Error::InvalidArgument("update_iterations must be at least 1".into()));
        }
        if !(self.sigma_theta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_theta must be non-negative, got {}",
                self.sigma_theta
            )));
        }
        if !(self.omega_t_range >= 0.0) || !(self.u_range >= 0.0) {
            return Err(Error::InvalidArgument("sampling ranges must be non-negative".into()));
        }
        Ok(())
    }

    /// Gyro timestamps `k / predict_rate` for `k = 0..=duration * predict_rate`.
    pub fn gyro_times(&self) -> Vec<i64> {
        ticks(self.duration, self.predict_rate, 0)
    }

    /// Direction timestamps `j / measure_rate` for `j >= 1` up to the duration.
    pub fn measurement_times(&self) -> Vec<i64> {
        ticks(self.duration, self.measure_rate, 1)
    }
}

fn ticks(duration: f64, rate: f64, first: i64) -> Vec<i64> {
    let end = secs_to_nanos(duration);
    let n = (duration * rate + 1e-9).floor() as i64;
    (first..=n).map(|k| secs_to_nanos(k as f64 / rate)).take_while(|&t| t <= end).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroRecord {
    pub t: i64,
    pub u: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionRecord {
    pub t: i64,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
}

impl DirectionRecord {
    pub fn measurement(&self) -> Measurement {
        Measurement::new(self.d1, self.d2, nanos_to_secs(self.t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub t: i64,
    pub state: ManifoldState,
}

/// Timestamped sensor streams (nanoseconds), each sorted by time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorStreams {
    pub gyro: Vec<GyroRecord>,
    pub directions: Vec<DirectionRecord>,
    pub truth: Vec<TruthRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub initial: ManifoldState,
    pub u: Vector3<f64>,
    /// Constant target rate in the target frame, `R omega`.
    pub omega_t: Vector3<f64>,
    pub streams: SensorStreams,
}

fn uniform_vector<R: Rng>(rng: &mut R, half_width: f64) -> Vector3<f64> {
    if half_width == 0.0 {
        return Vector3::zeros();
    }
    Vector3::from_fn(|_, _| rng.random_range(-half_width..=half_width))
}

/// Draws `R(0)`, `omega_T` and `u` from the seed, integrates the truth and
/// samples noisy direction measurements.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    generate_with_rng(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

pub(crate) fn generate_with_rng(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    cfg.validate()?;
    let r0 = random_rotation(rng);
    let omega_t = uniform_vector(rng, cfg.omega_t_range);
    let u = uniform_vector(rng, cfg.u_range);
    let initial = ManifoldState::new(r0, r0.matrix().transpose() * omega_t);
    simulate_truth(cfg, initial, u, omega_t, rng)
}

/// Integrates the truth from `initial` under constant `u` over the union of
/// gyro and measurement timestamps.
pub fn simulate_truth<R: Rng>(
    cfg: &ScenarioConfig,
    initial: ManifoldState,
    u: Vector3<f64>,
    omega_t: Vector3<f64>,
    rng: &mut R,
) -> Result<Scenario> {
    let gyro_t = cfg.gyro_times();
    let meas_t = cfg.measurement_times();
    let input = SystemInput::from_rate(u);

    let mut streams = SensorStreams {
        gyro: Vec::with_capacity(gyro_t.len()),
        directions: Vec::with_capacity(meas_t.len()),
        truth: Vec::with_capacity(gyro_t.len()),
    };
    let (mut gi, mut mi) = (0, 0);
    let mut state = initial;
    let mut now = gyro_t[0];
    while gi < gyro_t.len() || mi < meas_t.len() {
        let t = match (gyro_t.get(gi), meas_t.get(mi)) {
            (Some(&g), Some(&m)) => g.min(m),
            (Some(&g), None) => g,
            (None, Some(&m)) => m,
            (None, None) => unreachable!(),
        };
        if t > now {
            state = integrate_truth(&state, &input, nanos_to_secs(t - now))?;
            now = t;
        }
        if meas_t.get(mi) == Some(&t) {
            let y = apply_noise(&measure(&state, &cfg.refs, nanos_to_secs(t)), cfg.sigma_theta, rng);
            streams.directions.push(DirectionRecord { t, d1: y.d1, d2: y.d2 });
            mi += 1;
        }
        if gyro_t.get(gi) == Some(&t) {
            streams.gyro.push(GyroRecord { t, u });
            streams.truth.push(TruthRecord { t, state });
            gi += 1;
        }
    }
    Ok(Scenario { initial, u, omega_t, streams })
}
