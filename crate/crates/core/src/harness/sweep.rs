use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment_with, HarnessError};
use crate::analytic::{cpu_min, feasible_vehicle_count, PlanRow};
use crate::scenario::{Processor, StudyConfig};
use crate::simnet::SimOptions;

/// Outcome of one seeded run inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub reliability: Option<f64>,
    pub mean_e2e_ms: Option<f64>,
    pub p99_e2e_ms: Option<f64>,
    pub samples: u64,
    pub stable: bool,
    /// Set when the run failed; the sweep carries on.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub processor: Processor,
    pub n_vehicles: usize,
    /// One entry per seed, in seed-list order.
    pub runs: Vec<RunSummary>,
    /// Percentage of runs meeting the reliability requirement. Runs without
    /// data count as misses.
    pub success_rate_pct: f64,
    pub stable: bool,
}

impl SweepCell {
    /// Mean reliability over runs that produced data.
    pub fn mean_reliability(&self) -> Option<f64> {
        let values: Vec<f64> = self.runs.iter().filter_map(|r| r.reliability).collect();
        crate::stats::mean(&values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: StudyConfig,
    pub cpu_min_mips: f64,
    /// Row-major: processors in config order, vehicle counts in config order.
    pub cells: Vec<SweepCell>,
    /// Analytic feasibility bound per processor.
    pub red_line: Vec<PlanRow>,
}

impl SweepResult {
    pub fn cell(&self, processor_id: &str, n_vehicles: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.processor.id == processor_id && c.n_vehicles == n_vehicles)
    }

    pub fn row(&self, processor_id: &str) -> impl Iterator<Item = &SweepCell> {
        let id = processor_id.to_owned();
        self.cells.iter().filter(move |c| c.processor.id == id)
    }

    pub fn run_count(&self) -> usize {
        self.cells.iter().map(|c| c.runs.len()).sum()
    }
}

/// Runs every `(processor, vehicle count, seed)` combination on up to `jobs`
/// worker threads. Results are independent of `jobs`.
pub fn run_sweep(study: &StudyConfig, jobs: usize) -> Result<SweepResult, HarnessError> {
    let mut errors = Vec::new();
    study.collect_errors(&mut errors);
    crate::error::ValidationError::check(errors)?;

    let tasks: Vec<(usize, usize, u64)> = (0..study.processors.len())
        .flat_map(|p| {
            study
                .vehicle_counts
                .iter()
                .flat_map(move |&n| study.seeds.iter().map(move |&s| (p, n, s)))
        })
        .collect();

    let execute = || -> Vec<RunSummary> {
        tasks
            .par_iter()
            .map(|&(p, n, seed)| run_cell(study, &study.processors[p], n, seed))
            .collect()
    };
    let runs = if jobs == 0 {
        execute()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(execute)
    };

    let r_req = study.service.requirement.r_req;
    let per_cell = study.seeds.len();
    let mut runs = runs.into_iter();
    let mut cells = Vec::new();
    for processor in &study.processors {
        for &n in &study.vehicle_counts {
            let cell_runs: Vec<RunSummary> = runs.by_ref().take(per_cell).collect();
            let met = cell_runs
                .iter()
                .filter(|r| r.reliability.is_some_and(|x| x >= r_req))
                .count();
            let stable = study.experiment(processor, n, 0).mm1().is_stable();
            cells.push(SweepCell {
                processor: processor.clone(),
                n_vehicles: n,
                success_rate_pct: 100.0 * met as f64 / cell_runs.len() as f64,
                runs: cell_runs,
                stable,
            });
        }
    }

    Ok(SweepResult {
        config: study.clone(),
        cpu_min_mips: cpu_min(&study.service),
        red_line: study
            .processors
            .iter()
            .map(|p| PlanRow {
                processor: p.clone(),
                max_vehicles: feasible_vehicle_count(p, &study.service),
            })
            .collect(),
        cells,
    })
}

fn run_cell(study: &StudyConfig, processor: &Processor, n: usize, seed: u64) -> RunSummary {
    let cfg = study.experiment(processor, n, seed);
    let stable = cfg.mm1().is_stable();
    match run_experiment_with(&cfg, SimOptions::default()) {
        Ok(res) => RunSummary {
            seed,
            reliability: res.reliability,
            mean_e2e_ms: res.mean_e2e_s.map(|s| s * 1e3),
            p99_e2e_ms: res.p99_e2e_s.map(|s| s * 1e3),
            samples: res.output.samples,
            stable,
            error: None,
        },
        Err(e) => RunSummary {
            seed,
            reliability: None,
            mean_e2e_ms: None,
            p99_e2e_ms: None,
            samples: 0,
            stable,
            error: Some(e.to_string()),
        },
    }
}
