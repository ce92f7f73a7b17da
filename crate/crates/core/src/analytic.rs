//! Closed-form M/M/1 capacity planning.
//!
//! Each MecApp is an M/M/1 queue whose sojourn time is exponential with
//! rate `mu - lambda`. Requiring `P(sojourn <= d_req) >= r_req` gives the
//! minimum service rate `lambda - ln(1 - r_req) / d_req`, and with
//! `mu = cpu / E(IPR)` the minimum CPU share per MecApp.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scenario::{Processor, Requirement, ServiceSpec};

/// Arrival and service rates of one M/M/1 queue, packets/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mm1Params {
    pub lambda_hz: f64,
    pub mu_hz: f64,
}

impl Mm1Params {
    pub fn new(lambda_hz: f64, mu_hz: f64) -> Self {
        Self { lambda_hz, mu_hz }
    }

    /// Service rate of a MecApp holding `allocated_mips` for requests of mean
    /// demand `ipr_mean_mi`.
    pub fn from_allocation(lambda_hz: f64, allocated_mips: f64, ipr_mean_mi: f64) -> Self {
        Self::new(lambda_hz, service_rate(allocated_mips, ipr_mean_mi))
    }

    pub fn utilization(&self) -> f64 {
        self.lambda_hz / self.mu_hz
    }

    pub fn is_stable(&self) -> bool {
        self.lambda_hz < self.mu_hz
    }

    /// Mean sojourn time `1 / (mu - lambda)`; `None` when unstable.
    pub fn mean_sojourn_s(&self) -> Option<f64> {
        self.is_stable()
            .then(|| 1.0 / (self.mu_hz - self.lambda_hz))
    }
}

/// Outcome of [`mm1_reliability`]. An unstable queue has no finite
/// sojourn-time law; its reliability is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reliability {
    Stable(f64),
    Unstable,
}

impl Reliability {
    pub fn value(self) -> f64 {
        match self {
            Reliability::Stable(p) => p,
            Reliability::Unstable => 0.0,
        }
    }

    pub fn is_unstable(self) -> bool {
        matches!(self, Reliability::Unstable)
    }
}

/// `mu = cpu / E(IPR)`.
pub fn service_rate(allocated_mips: f64, ipr_mean_mi: f64) -> f64 {
    allocated_mips / ipr_mean_mi
}

/// Smallest service rate meeting `req` at arrival rate `lambda_hz`.
pub fn required_service_rate(lambda_hz: f64, req: Requirement) -> f64 {
    // -ln(1 - r) computed via ln_1p keeps precision for small r.
    lambda_hz - (-req.r_req).ln_1p() / req.d_req_s
}

/// Minimum CPU share (MIPS) a single MecApp of `spec` needs.
pub fn cpu_min(spec: &ServiceSpec) -> f64 {
    required_service_rate(spec.uplink_rate_hz, spec.requirement) * spec.ipr_mean_mi
}

/// `cpu_min` rounded half-up to whole MIPS, for display.
pub fn cpu_min_display(spec: &ServiceSpec) -> u64 {
    round_half_up(cpu_min(spec))
}

pub(crate) fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

/// `P(sojourn <= d)` of an M/M/1 queue.
pub fn mm1_reliability(p: Mm1Params, d: f64) -> Reliability {
    if !p.is_stable() {
        return Reliability::Unstable;
    }
    if d <= 0.0 {
        return Reliability::Stable(0.0);
    }
    Reliability::Stable(-(-(p.mu_hz - p.lambda_hz) * d).exp_m1())
}

/// Largest vehicle count `n` for which `proc.mips / n >= cpu_min(spec)`.
pub fn feasible_vehicle_count(proc: &Processor, spec: &ServiceSpec) -> u64 {
    max_apps(proc.mips, cpu_min(spec))
}

fn max_apps(capacity_mips: f64, per_app_mips: f64) -> u64 {
    let n = (capacity_mips / per_app_mips).floor();
    // Guard the floor against a quotient that rounds just above an integer.
    let mut n = n.max(0.0) as u64;
    while n > 0 && capacity_mips / (n as f64) < per_app_mips {
        n -= 1;
    }
    while capacity_mips / ((n + 1) as f64) >= per_app_mips {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub service: String,
    pub cpu_min_mips: f64,
    pub mu_min_hz: f64,
    /// Keyed by processor id.
    pub max_vehicles: BTreeMap<String, u64>,
    /// Processors in the order they were given, with their vehicle bound.
    pub rows: Vec<PlanRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub processor: Processor,
    pub max_vehicles: u64,
}

pub fn plan(spec: &ServiceSpec, procs: &[Processor]) -> PlanResult {
    let mu_min_hz = required_service_rate(spec.uplink_rate_hz, spec.requirement);
    let cpu_min_mips = mu_min_hz * spec.ipr_mean_mi;
    let rows: Vec<PlanRow> = procs
        .iter()
        .map(|p| PlanRow {
            processor: p.clone(),
            max_vehicles: max_apps(p.mips, cpu_min_mips),
        })
        .collect();
    PlanResult {
        service: spec.name.clone(),
        cpu_min_mips,
        mu_min_hz,
        max_vehicles: rows
            .iter()
            .map(|r| (r.processor.id.clone(), r.max_vehicles))
            .collect(),
        rows,
    }
}
