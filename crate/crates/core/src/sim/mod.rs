//! Scenario generation, the multi-rate scheduler, metrics and Monte Carlo
//! campaigns.
//!
//! Timestamps are integer nanoseconds so that a scenario exported to text and
//! read back drives the filters through exactly the same steps.

mod metrics;
mod montecarlo;
mod run;
mod scenario;

pub use metrics::{euler_zyx, metrics, RunMetrics, SuccessCriterion};
pub use montecarlo::{
    aggregate, campaign_scenario, compare_filters, monte_carlo, paired_attitude_errors, run_rng, Execution,
    MonteCarloConfig, MonteCarloStats, RunSummary,
};
pub use run::{run_streams, state_error_norms, AttitudeFilter, LogRow, RunLog};
pub use scenario::{
    generate_scenario, nanos_to_secs, secs_to_nanos, simulate_truth, DirectionRecord, GyroRecord, Scenario,
    ScenarioConfig, SensorStreams, TruthRecord, NANOS_PER_SEC,
};

use crate::ekf::{EkfConfig, Matrix12};
use crate::eqf::{DampingForm, DampingSchedule, EqfConfig, GainConfig, RiccatiState, UpdateSettings};

/// Filter tuning shared by both estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    pub gains: GainConfig,
    pub sigma0: RiccatiState,
    pub damping: DampingSchedule,
    pub damping_form: DampingForm,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            gains: GainConfig::default(),
            sigma0: RiccatiState::identity(),
            damping: DampingSchedule::default(),
            damping_form: DampingForm::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn eqf_config(&self, f: &FilterSettings) -> EqfConfig {
        EqfConfig {
            gains: f.gains.clone(),
            sigma0: f.sigma0,
            refs: self.refs,
            update: UpdateSettings {
                iterations: self.update_iterations,
                schedule: f.damping,
                form: f.damping_form,
            },
        }
    }

    /// EKF with the same output gain, unit process noise density and `P0 = I`.
    pub fn ekf_config(&self, f: &FilterSettings) -> EkfConfig {
        EkfConfig { m: Matrix12::identity(), n: *f.gains.n(), p0: Matrix12::identity(), refs: self.refs }
    }

    /// Runs the equivariant filter from `(I, 0)` on a generated scenario.
    pub fn run_eqf(&self, f: &FilterSettings) -> crate::Result<(Scenario, RunLog)> {
        let scenario = generate_scenario(self)?;
        let mut filter = crate::eqf::EqFilter::new(self.eqf_config(f));
        let log = run_streams(&scenario.streams, &mut filter)?;
        Ok((scenario, log))
    }
}
