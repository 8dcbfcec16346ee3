mod config;
mod report;
mod sensor_log;
mod timing;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eqf_core::eqf::EqFilter;
use eqf_core::liegroup::{random_rotation, random_unit_vector};
use eqf_core::model::{observability_rank, DEFAULT_LIE_ORDER};
use eqf_core::sim::{compare_filters, metrics, monte_carlo, run_rng, run_streams, Execution};
use eqf_core::{ManifoldState, ReferenceDirections, SystemInput};
use nalgebra::Vector3;

use config::Config;

// A closed stdout (e.g. piped into `head`) is not an error worth reporting.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<eqf_core::Error> for CliError {
    fn from(e: eqf_core::Error) -> Self {
        use eqf_core::Error::*;
        match e {
            LostPositivity { .. } | NearPiSingularity { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "eqf",
    version,
    about = "Equivariant filter for relative attitude and target angular velocity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write the filter log as CSV
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        /// Also write the generated sensor streams as a replayable log
        #[arg(long)]
        export_sensors: Option<PathBuf>,
    },
    /// Run a seeded Monte Carlo campaign
    Montecarlo {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of runs (overrides montecarlo.runs)
        #[arg(long, short)]
        n: Option<usize>,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        sequential: bool,
    },
    /// Run the filter over a recorded sensor log
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Numeric observability rank at a random state
    Observability {
        /// Append the orthonormality constraints R R^T = I as outputs
        #[arg(long)]
        expanded: bool,
        #[arg(long, default_value_t = DEFAULT_LIE_ORDER)]
        lie_order: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d2: Option<Vec<f64>>,
    },
    /// Time single prediction and update steps
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Steps to time (overrides bench.steps)
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the equivariant filter and the EKF on the same scenario
    CompareEkf {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn simulate(config: Option<&Path>, output: &Path, export: Option<&Path>) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let (scenario, log) = cfg.scenario.run_eqf(&cfg.filter)?;
    write_file(output, &report::run_log_csv(&log))?;
    if let Some(p) = export {
        write_file(p, &sensor_log::write(&scenario.streams))?;
    }
    let conv = cfg.criterion.convergence_time(&log);
    out!(
        "seed {}: |omega_T| = {:.4} rad/s, converged at {}",
        cfg.scenario.seed,
        scenario.omega_t.norm(),
        conv.map_or("never".to_string(), |t| format!("{t:.2} s"))
    );
    if let Some(m) = metrics(&log, cfg.metric_start) {
        out!("{}", report::metrics_summary("eqf", &m, cfg.metric_start));
    }
    Ok(())
}

fn montecarlo(
    config: Option<&Path>,
    n: Option<usize>,
    output: &Path,
    sequential: bool,
) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let runs = n.unwrap_or(cfg.runs);
    if runs == 0 {
        return Err(CliError::Usage("the number of runs must be at least 1".into()));
    }
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let stats = monte_carlo(&cfg.montecarlo(runs), exec)?;
    write_file(output, &report::montecarlo_csv(&stats))?;
    out!(
        "success rate {:.2}% ({} of {} runs failed); means over successful runs after {} s: attitude {:.4}, rate {:.4} rad/s",
        100.0 * stats.success_rate,
        stats.n_failures,
        stats.n_runs,
        cfg.metric_start,
        stats.mean_attitude_error,
        stats.mean_rate_error
    );
    Ok(())
}

fn replay(log_path: &Path, config: Option<&Path>, output: &Path) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", log_path.display())))?;
    let parsed =
        sensor_log::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", log_path.display());
    }
    let mut filter = EqFilter::new(cfg.scenario.eqf_config(&cfg.filter));
    let log = run_streams(&parsed.streams, &mut filter)?;
    write_file(output, &report::run_log_csv(&log))?;
    out!(
        "replayed {} gyro and {} direction records",
        parsed.streams.gyro.len(),
        parsed.streams.directions.len()
    );
    if parsed.streams.directions.is_empty() {
        out!("no direction records: prediction only, Riccati trace {:.4}", filter.state().sigma.trace());
    }
    if let Some(m) = metrics(&log, cfg.metric_start) {
        out!("{}", report::metrics_summary("eqf", &m, cfg.metric_start));
    }
    Ok(())
}

fn observability(
    expanded: bool,
    lie_order: usize,
    seed: u64,
    d1: Option<Vec<f64>>,
    d2: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let v = |d: Option<Vec<f64>>, default: Vector3<f64>, name: &str| match d {
        None => Ok(default),
        Some(d) if d.len() == 3 => Ok(Vector3::new(d[0], d[1], d[2])),
        Some(_) => Err(CliError::Usage(format!("--{name} takes three comma-separated numbers"))),
    };
    let refs = ReferenceDirections::normalized(v(d1, Vector3::x(), "d1")?, v(d2, Vector3::y(), "d2")?)?;
    let mut rng = run_rng(seed, 0);
    let x = ManifoldState::new(random_rotation(&mut rng), random_unit_vector(&mut rng) * 0.7);
    let input = SystemInput::from_rate(random_unit_vector(&mut rng) * 1.1);
    let report = observability_rank(&x, &input, &refs, expanded, lie_order)?;
    out!("outputs: {}", if expanded { "directions + orthonormality constraints" } else { "directions" });
    out!("lie derivative order: {lie_order}");
    out!("rank: {} of 12", report.rank);
    let sv: Vec<String> = report.singular_values.iter().map(|s| format!("{s:.3e}")).collect();
    out!("singular values: {}", sv.join(" "));
    if let (Some(dir), Some(angle)) = (report.null_direction, report.null_direction_angle) {
        let n = dir.normalize();
        out!("null-space direction in R^T (d1 x d2): [{:.6}, {:.6}, {:.6}]", n.x, n.y, n.z);
        out!("angle to R^T (d1 x d2): {:.3e} rad", angle);
    }
    Ok(())
}

fn bench(config: Option<&Path>, steps: Option<usize>, output: Option<&Path>) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let (pred, upd) = timing::time_steps(&cfg, steps.unwrap_or(cfg.bench_steps))?;
    let csv = timing::timing_csv(&pred, &upd);
    match output {
        Some(p) => write_file(p, &csv)?,
        None => {
            let _ = std::io::stdout().write_all(csv.as_bytes());
        }
    }
    Ok(())
}

fn compare_ekf(config: Option<&Path>, output: &Path) -> Result<(), CliError> {
    let cfg = Config::load(config)?;
    let scenario = eqf_core::sim::generate_scenario(&cfg.scenario)?;
    let (eqf, ekf) = compare_filters(&scenario, &cfg.scenario, &cfg.filter)?;
    write_file(output, &report::compare_csv(&eqf, &ekf))?;
    for (label, log) in [("eqf", &eqf), ("ekf", &ekf)] {
        if let Some(m) = metrics(log, cfg.metric_start) {
            out!("{}", report::metrics_summary(label, &m, cfg.metric_start));
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, output, export_sensors } => {
            simulate(config.as_deref(), &output, export_sensors.as_deref())
        }
        Command::Montecarlo { config, n, output, sequential } => {
            montecarlo(config.as_deref(), n, &output, sequential)
        }
        Command::Replay { log, config, output } => replay(&log, config.as_deref(), &output),
        Command::Observability { expanded, lie_order, seed, d1, d2 } => {
            observability(expanded, lie_order, seed, d1, d2)
        }
        Command::Bench { config, steps, output } => bench(config.as_deref(), steps, output.as_deref()),
        Command::CompareEkf { config, output } => compare_ekf(config.as_deref(), &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
