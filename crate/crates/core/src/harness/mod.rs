//! Experiment runner: single seeded runs, processor × vehicle-count sweeps,
//! and their CSV artifacts.

mod output;
mod sweep;

pub use output::{
    emit_outputs, read_cells_csv, read_heatmap_csv, read_redline_csv, CellRow, HeatmapRow,
    RedlineRow,
};
pub use sweep::{run_sweep, RunSummary, SweepCell, SweepResult};

use serde::{Deserialize, Serialize};

use crate::analytic::Mm1Params;
use crate::error::{FieldError, ValidationError};
use crate::mobility::MobilityModel;
use crate::scenario::config::{check_horizon, DEFAULT_DURATION_S, DEFAULT_WARMUP_S};
use crate::scenario::{Processor, ServiceSpec};
use crate::simnet::{
    simulate, Accounting, DelayRecord, LinkModel, SimError, SimOptions, SimOutput,
};
use crate::stats;

/// Everything that determines one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: ServiceSpec,
    pub processor: Processor,
    pub n_vehicles: usize,
    pub seed: u64,
    /// Extra component of every stream key; 0 unless a caller needs several
    /// independent runs under one seed.
    pub repetition: u32,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub link: LinkModel,
    pub mobility: MobilityModel,
    pub accounting: Accounting,
}

impl ExperimentConfig {
    pub fn new(spec: ServiceSpec, processor: Processor, n_vehicles: usize, seed: u64) -> Self {
        Self {
            spec,
            processor,
            n_vehicles,
            seed,
            repetition: 0,
            duration_s: DEFAULT_DURATION_S,
            warmup_s: DEFAULT_WARMUP_S,
            link: LinkModel::default(),
            mobility: MobilityModel::default(),
            accounting: Accounting::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errors = Vec::new();
        self.spec.collect_errors("service", &mut errors);
        self.processor.collect_errors("processor", &mut errors);
        if self.n_vehicles == 0 {
            errors.push(FieldError::new("n_vehicles", "must be >= 1"));
        }
        check_horizon(self.duration_s, self.warmup_s, "", &mut errors);
        self.link.collect_errors("link", &mut errors);
        self.mobility.collect_errors("mobility", &mut errors);
        ValidationError::check(errors)
    }

    /// M/M/1 parameters of each MecApp under the equal CPU split.
    pub fn mm1(&self) -> Mm1Params {
        Mm1Params::from_allocation(
            self.spec.uplink_rate_hz,
            self.processor.mips / self.n_vehicles as f64,
            self.spec.ipr_mean_mi,
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("success rate of an empty repetition list is undefined")]
    NoRepetitions,
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {message}")]
    Read {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// `None` when no sample survived warm-up and horizon filtering.
    pub reliability: Option<f64>,
    /// Analytic stability of each MecApp (`mu > lambda`).
    pub stable: bool,
    pub mean_e2e_s: Option<f64>,
    pub p99_e2e_s: Option<f64>,
    pub delay_records: Vec<DelayRecord>,
    pub output: SimOutput,
}

impl ExperimentResult {
    pub fn meets(&self, r_req: f64) -> bool {
        self.reliability.is_some_and(|r| r >= r_req)
    }
}

/// Runs one experiment keeping every delay record.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    run_experiment_with(
        cfg,
        SimOptions {
            keep_records: true,
            record_dispatches: false,
        },
    )
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    options: SimOptions,
) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let mut output = simulate(cfg, options)?;
    let delay_records = std::mem::take(&mut output.delay_records);
    Ok(ExperimentResult {
        reliability: output.reliability(),
        stable: output.mm1.is_stable(),
        mean_e2e_s: stats::mean(&output.e2e_s),
        p99_e2e_s: stats::quantile(&output.e2e_s, 0.99),
        delay_records,
        output,
    })
}

/// Fraction of records delivered within `d_req`; `None` for no records.
pub fn compute_reliability(records: &[DelayRecord], d_req: f64) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let met = records.iter().filter(|r| r.e2e_s <= d_req).count();
    Some(met as f64 / records.len() as f64)
}

/// Percentage of repetitions whose reliability reaches `r_req`.
pub fn success_rate(reliabilities: &[f64], r_req: f64) -> Result<f64, HarnessError> {
    if reliabilities.is_empty() {
        return Err(HarnessError::NoRepetitions);
    }
    let met = reliabilities.iter().filter(|&&r| r >= r_req).count();
    Ok(100.0 * met as f64 / reliabilities.len() as f64)
}
