//! Run configuration: flat `key = value` lines with dotted sections.
//!
//! ```text
//! scenario.seed = 7
//! scenario.measure_rate = 30
//! filter.k_n = 10
//! filter.damping_form = "euler"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use eqf_core::eqf::{DampingForm, DampingSchedule, GainConfig, RiccatiState};
use eqf_core::sim::{FilterSettings, MonteCarloConfig, ScenarioConfig, SuccessCriterion};
use eqf_core::ReferenceDirections;
use nalgebra::{Matrix6, Vector3};
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: ScenarioConfig,
    pub filter: FilterSettings,
    pub runs: usize,
    pub metric_start: f64,
    pub criterion: SuccessCriterion,
    pub bench_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        let mc = MonteCarloConfig::default();
        Config {
            scenario: mc.scenario,
            filter: mc.filter,
            runs: mc.n_runs,
            metric_start: mc.metric_start,
            criterion: mc.criterion,
            bench_steps: 100_000,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", p.display())))?;
                Config::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.message().to_string())?;
        let mut flat = BTreeMap::new();
        flatten("", table, &mut flat);
        let mut keys = Keys(flat);
        let mut cfg = Config::default();

        let s = &mut cfg.scenario;
        keys.u64("scenario.seed", &mut s.seed)?;
        keys.f64("scenario.duration", &mut s.duration)?;
        keys.f64("scenario.predict_rate", &mut s.predict_rate)?;
        keys.f64("scenario.measure_rate", &mut s.measure_rate)?;
        keys.usize("scenario.update_iterations", &mut s.update_iterations)?;
        keys.f64("scenario.sigma_theta", &mut s.sigma_theta)?;
        keys.f64("scenario.omega_t_range", &mut s.omega_t_range)?;
        keys.f64("scenario.u_range", &mut s.u_range)?;
        let mut d1 = *s.refs.d1();
        let mut d2 = *s.refs.d2();
        let custom_refs = keys.vec3("scenario.d1", &mut d1)? | keys.vec3("scenario.d2", &mut d2)?;
        if custom_refs {
            s.refs = ReferenceDirections::normalized(d1, d2)
                .map_err(|e| format!("scenario.d1/scenario.d2: {e}"))?;
        }
        s.validate().map_err(|e| e.to_string())?;

        let (mut k_n, mut m, mut sigma0) = (10.0, 1.0, 1.0);
        let mut gains_set = keys.f64("filter.k_n", &mut k_n)?;
        gains_set |= keys.f64("filter.m", &mut m)?;
        if gains_set {
            cfg.filter.gains = GainConfig::scalar(m, k_n).map_err(|e| format!("filter.k_n/filter.m: {e}"))?;
        }
        if keys.f64("filter.sigma0", &mut sigma0)? {
            cfg.filter.sigma0 =
                RiccatiState::new(Matrix6::identity() * sigma0).map_err(|e| format!("filter.sigma0: {e}"))?;
        }
        let mut text = String::new();
        if keys.string("filter.damping", &mut text)? {
            cfg.filter.damping = match text.as_str() {
                "per_iteration" => DampingSchedule::PerIteration,
                "once" => DampingSchedule::Once,
                other => {
                    return Err(format!(
                        "filter.damping: expected \"per_iteration\" or \"once\", got {other:?}"
                    ))
                }
            };
        }
        if keys.string("filter.damping_form", &mut text)? {
            cfg.filter.damping_form = match text.as_str() {
                "information" => DampingForm::Information,
                "euler" => DampingForm::Euler,
                other => {
                    return Err(format!(
                        "filter.damping_form: expected \"information\" or \"euler\", got {other:?}"
                    ))
                }
            };
        }

        keys.usize("montecarlo.runs", &mut cfg.runs)?;
        keys.f64("montecarlo.metric_start", &mut cfg.metric_start)?;
        keys.f64("montecarlo.attitude_threshold", &mut cfg.criterion.attitude)?;
        keys.f64("montecarlo.rate_threshold", &mut cfg.criterion.rate)?;
        keys.f64("montecarlo.deadline", &mut cfg.criterion.deadline)?;
        keys.usize("bench.steps", &mut cfg.bench_steps)?;

        if let Some(k) = keys.0.keys().next() {
            return Err(format!("unknown key `{k}`"));
        }
        Ok(cfg)
    }

    pub fn montecarlo(&self, runs: usize) -> MonteCarloConfig {
        MonteCarloConfig {
            scenario: self.scenario.clone(),
            filter: self.filter.clone(),
            n_runs: runs,
            metric_start: self.metric_start,
            criterion: self.criterion,
        }
    }
}

fn flatten(prefix: &str, table: toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other);
            }
        }
    }
}

/// Remaining keys; each accessor removes the key it reads.
struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn take<T>(
        &mut self,
        key: &str,
        out: &mut T,
        conv: impl Fn(&Value) -> Option<T>,
        what: &str,
    ) -> Result<bool, String> {
        match self.0.remove(key) {
            None => Ok(false),
            Some(v) => {
                *out = conv(&v).ok_or_else(|| format!("key `{key}`: expected {what}, got {v}"))?;
                Ok(true)
            }
        }
    }

    fn f64(&mut self, key: &str, out: &mut f64) -> Result<bool, String> {
        self.take(key, out, as_f64, "a number")
    }

    fn u64(&mut self, key: &str, out: &mut u64) -> Result<bool, String> {
        self.take(key, out, |v| v.as_integer().and_then(|i| u64::try_from(i).ok()), "a non-negative integer")
    }

    fn usize(&mut self, key: &str, out: &mut usize) -> Result<bool, String> {
        self.take(
            key,
            out,
            |v| v.as_integer().and_then(|i| usize::try_from(i).ok()),
            "a non-negative integer",
        )
    }

    fn string(&mut self, key: &str, out: &mut String) -> Result<bool, String> {
        self.take(key, out, |v| v.as_str().map(str::to_owned), "a string")
    }

    fn vec3(&mut self, key: &str, out: &mut Vector3<f64>) -> Result<bool, String> {
        self.take(
            key,
            out,
            |v| {
                let a = v.as_array()?;
                if a.len() != 3 {
                    return None;
                }
                Some(Vector3::new(as_f64(&a[0])?, as_f64(&a[1])?, as_f64(&a[2])?))
            },
            "an array of three numbers",
        )
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}
