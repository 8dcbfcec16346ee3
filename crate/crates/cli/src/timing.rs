//! Wall-clock timing of single prediction and update steps.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use eqf_core::eqf::EqFilter;
use eqf_core::sim::{generate_scenario, nanos_to_secs, ScenarioConfig};

use crate::config::Config;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTiming {
    pub samples: usize,
    pub median_us: f64,
    pub p99_us: f64,
}

fn summarize(mut ns: Vec<u64>) -> StepTiming {
    ns.sort_unstable();
    let pick = |q: f64| ns[((ns.len() - 1) as f64 * q).round() as usize] as f64 / 1e3;
    StepTiming { samples: ns.len(), median_us: pick(0.5), p99_us: pick(0.99) }
}

/// Times `steps` predictions and `steps` updates on a generated scenario with
/// one measurement per gyro tick.
pub fn time_steps(cfg: &Config, steps: usize) -> Result<(StepTiming, StepTiming), CliError> {
    if steps == 0 {
        return Err(CliError::Usage("bench needs at least one step".into()));
    }
    let sc = ScenarioConfig {
        duration: steps as f64 / cfg.scenario.predict_rate,
        measure_rate: cfg.scenario.predict_rate,
        ..cfg.scenario.clone()
    };
    let scenario = generate_scenario(&sc)?;
    let mut filter = EqFilter::new(sc.eqf_config(&cfg.filter));
    let (mut pred, mut upd) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    let gyro = &scenario.streams.gyro;
    for (k, d) in scenario.streams.directions.iter().enumerate().take(steps) {
        let dt = nanos_to_secs(d.t - gyro[k].t);
        let y = d.measurement();
        let start = Instant::now();
        filter.predict(black_box(&gyro[k].u), dt)?;
        pred.push(start.elapsed().as_nanos() as u64);
        let start = Instant::now();
        filter.update(black_box(&y), dt)?;
        upd.push(start.elapsed().as_nanos() as u64);
    }
    Ok((summarize(pred), summarize(upd)))
}

pub fn timing_csv(pred: &StepTiming, upd: &StepTiming) -> String {
    let mut s = String::from("step,samples,median_us,p99_us\n");
    for (name, t) in [("predict", pred), ("update", upd)] {
        let _ = writeln!(s, "{name},{},{:.3},{:.3}", t.samples, t.median_us, t.p99_us);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let t = summarize((1..=100).map(|v| v * 1000).collect());
        assert_eq!(t.samples, 100);
        assert_eq!(t.median_us, 51.0);
        assert_eq!(t.p99_us, 99.0);
    }

    #[test]
    fn short_run_produces_csv() {
        let (p, u) = time_steps(&Config::default(), 50).unwrap();
        assert_eq!(p.samples, 50);
        assert_eq!(u.samples, 50);
        let csv = timing_csv(&p, &u);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 4));
    }
}
