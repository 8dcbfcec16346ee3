use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::ekf::Ekf;
use crate::eqf::EqFilter;
use crate::error::{Error, Result};

use super::metrics::{metrics, RunMetrics, SuccessCriterion};
use super::run::{run_streams, RunLog};
use super::scenario::generate_with_rng;
use super::{FilterSettings, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Runs fan out over the rayon pool when the `parallel` feature is on.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    /// `scenario.seed` is the master seed.
    pub scenario: ScenarioConfig,
    pub filter: FilterSettings,
    pub n_runs: usize,
    /// Start of the averaging window for post-convergence metrics (s).
    pub metric_start: f64,
    pub criterion: SuccessCriterion,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            scenario: ScenarioConfig::default(),
            filter: FilterSettings::default(),
            n_runs: 1000,
            metric_start: 4.0,
            criterion: SuccessCriterion::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub success: bool,
    pub convergence_time: Option<f64>,
    pub metrics: Option<RunMetrics>,
    pub final_error: Option<(f64, f64)>,
    /// Numeric failure that aborted the run, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloStats {
    pub n_runs: usize,
    pub n_failures: usize,
    pub success_rate: f64,
    /// Means over successful runs of the per-run post-window means.
    pub mean_attitude_error: f64,
    pub mean_rate_error: f64,
    pub mean_relative_rate_error: f64,
    pub runs: Vec<RunSummary>,
}

impl MonteCarloStats {
    pub fn convergence_times(&self) -> Vec<Option<f64>> {
        self.runs.iter().map(|r| r.convergence_time).collect()
    }
}

/// Generator for run `index`: the master seed with the run index as stream.
pub fn run_rng(master: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng
}

/// Scenario of run `index` of a campaign.
pub fn campaign_scenario(cfg: &ScenarioConfig, index: usize) -> Result<super::Scenario> {
    generate_with_rng(cfg, &mut run_rng(cfg.seed, index))
}

fn single_run(cfg: &MonteCarloConfig, index: usize) -> Result<RunSummary> {
    let scenario = campaign_scenario(&cfg.scenario, index)?;
    let mut filter = EqFilter::new(cfg.scenario.eqf_config(&cfg.filter));
    Ok(match run_streams(&scenario.streams, &mut filter) {
        Ok(log) => summarize(cfg, index, &log),
        Err(e @ (Error::LostPositivity { .. } | Error::NearPiSingularity { .. })) => RunSummary {
            index,
            success: false,
            convergence_time: None,
            metrics: None,
            final_error: None,
            failure: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    })
}

fn summarize(cfg: &MonteCarloConfig, index: usize, log: &RunLog) -> RunSummary {
    RunSummary {
        index,
        success: cfg.criterion.is_success(log),
        convergence_time: cfg.criterion.convergence_time(log),
        metrics: metrics(log, cfg.metric_start),
        final_error: log.rows.last().and_then(|r| r.error),
        failure: None,
    }
}

fn map_runs<T: Send>(
    n: usize,
    exec: Execution,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `n_runs` independent seeded scenarios through the equivariant filter.
pub fn monte_carlo(cfg: &MonteCarloConfig, exec: Execution) -> Result<MonteCarloStats> {
    if cfg.n_runs == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one run".into()));
    }
    cfg.scenario.validate()?;
    let runs = map_runs(cfg.n_runs, exec, |i| single_run(cfg, i))?;
    Ok(aggregate(runs))
}

/// Aggregates in index order so the result does not depend on scheduling.
pub fn aggregate(mut runs: Vec<RunSummary>) -> MonteCarloStats {
    runs.sort_by_key(|r| r.index);
    let n_runs = runs.len();
    let n_failures = runs.iter().filter(|r| !r.success).count();
    let ok: Vec<&RunMetrics> = runs.iter().filter(|r| r.success).filter_map(|r| r.metrics.as_ref()).collect();
    let mean = |f: &dyn Fn(&RunMetrics) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64
        }
    };
    MonteCarloStats {
        n_runs,
        n_failures,
        success_rate: 1.0 - n_failures as f64 / n_runs as f64,
        mean_attitude_error: mean(&|m| m.attitude_error),
        mean_rate_error: mean(&|m| m.rate_error),
        mean_relative_rate_error: mean(&|m| m.relative_rate_error),
        runs,
    }
}

/// Equivariant filter and EKF logs on the same scenario.
pub fn compare_filters(
    scenario: &super::Scenario,
    cfg: &ScenarioConfig,
    filter: &FilterSettings,
) -> Result<(RunLog, RunLog)> {
    let mut eqf = EqFilter::new(cfg.eqf_config(filter));
    let mut ekf = Ekf::new(cfg.ekf_config(filter));
    Ok((run_streams(&scenario.streams, &mut eqf)?, run_streams(&scenario.streams, &mut ekf)?))
}

/// Attitude errors `(eqf, ekf)` at time `t` on each campaign scenario.
pub fn paired_attitude_errors(cfg: &MonteCarloConfig, t: f64, exec: Execution) -> Result<Vec<(f64, f64)>> {
    if cfg.n_runs == 0 {
        return Err(Error::InvalidArgument("comparison needs at least one run".into()));
    }
    let at = super::scenario::secs_to_nanos(t);
    map_runs(cfg.n_runs, exec, |i| {
        let scenario = campaign_scenario(&cfg.scenario, i)?;
        let (a, b) = compare_filters(&scenario, &cfg.scenario, &cfg.filter)?;
        let pick = |log: &RunLog| {
            log.rows
                .iter()
                .find(|r| r.t >= at)
                .and_then(|r| r.error)
                .map(|e| e.0)
                .ok_or_else(|| Error::InvalidArgument(format!("no logged error at t = {t}")))
        };
        Ok((pick(&a)?, pick(&b)?))
    })
}
