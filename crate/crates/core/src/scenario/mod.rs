//! Domain types for services, requirements and edge processors, the
//! built-in catalog, and experiment-file validation.
//!
//! Units are fixed across the crate: seconds, bytes, meters, million
//! instructions (MI) and million instructions per second (MIPS).

mod catalog;
pub mod config;

pub use catalog::{
    catalog_processors, catalog_services, load_processor, load_service, COOPERATIVE_AWARENESS,
    COOPERATIVE_MANEUVER, COOPERATIVE_SENSING, RADIO_PARAMETERS, REMOTE_DRIVING,
};
pub use config::{validate_config, RawConfig, StudyConfig};

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, FieldError, ValidationError};

/// Relative tolerance between a service's derived uplink bandwidth and the
/// tabulated figure.
pub const BANDWIDTH_TOLERANCE: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown service {0:?} (known: remote_driving, cooperative_sensing, cooperative_maneuver, cooperative_awareness)")]
    UnknownService(String),
    #[error("unknown processor {0:?} (known: id1, id2, id3, id4)")]
    UnknownProcessor(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Latency/reliability target: `P(delay <= d_req_s) >= r_req`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Requirement {
    /// End-to-end latency threshold, seconds.
    pub d_req_s: f64,
    /// Required probability of meeting the threshold, in `[0, 1)`.
    pub r_req: f64,
}

impl Requirement {
    pub fn new(d_req_s: f64, r_req: f64) -> Result<Self, ValidationError> {
        let req = Self { d_req_s, r_req };
        let mut errors = Vec::new();
        req.collect_errors("requirement", &mut errors);
        ValidationError::check(errors).map(|_| req)
    }

    pub(crate) fn collect_errors(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if !(self.d_req_s.is_finite() && self.d_req_s > 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.d_req_s"),
                format!("must be finite and > 0, got {}", self.d_req_s),
            ));
        }
        // r_req = 1 would demand an infinite service rate.
        if !(0.0..1.0).contains(&self.r_req) {
            errors.push(FieldError::new(
                format!("{prefix}.r_req"),
                format!("must lie in [0, 1), got {}", self.r_req),
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// The processed result goes back to the sender and to every vehicle
    /// inside a circle of random radius around it.
    Dissemination,
    /// The processed result goes back to the sender only.
    ClientServer,
}

/// Workload laws and requirement of one connected-vehicle service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub name: String,
    pub behavior: Behavior,
    /// Poisson packet rate per vehicle (packets/s).
    pub uplink_rate_hz: f64,
    /// Mean of the exponential uplink payload law (bytes).
    pub uplink_payload_mean_bytes: f64,
    /// Constant response payload (bytes).
    pub downlink_payload_bytes: u32,
    /// Mean of the exponential per-request instruction demand (MI).
    pub ipr_mean_mi: f64,
    /// Upper bound of the uniform dissemination radius law (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissemination_radius_max_m: Option<f64>,
    pub requirement: Requirement,
}

impl ServiceSpec {
    /// Mean uplink bandwidth demanded by one vehicle, bits/s.
    pub fn uplink_bandwidth_bps(&self) -> f64 {
        self.uplink_rate_hz * self.uplink_payload_mean_bytes * 8.0
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut errors = Vec::new();
        self.collect_errors("service", &mut errors);
        ValidationError::check(errors)
    }

    pub(crate) fn collect_errors(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if self.name.trim().is_empty() {
            errors.push(FieldError::new(
                format!("{prefix}.name"),
                "must not be empty",
            ));
        }
        require_positive(
            errors,
            &format!("{prefix}.uplink_rate_hz"),
            self.uplink_rate_hz,
        );
        require_positive(
            errors,
            &format!("{prefix}.uplink_payload_mean_bytes"),
            self.uplink_payload_mean_bytes,
        );
        if self.downlink_payload_bytes == 0 {
            errors.push(FieldError::new(
                format!("{prefix}.downlink_payload_bytes"),
                "must be >= 1 byte",
            ));
        }
        require_positive(errors, &format!("{prefix}.ipr_mean_mi"), self.ipr_mean_mi);
        for (path, v) in [
            ("uplink_rate_hz", self.uplink_rate_hz),
            ("uplink_payload_mean_bytes", self.uplink_payload_mean_bytes),
            ("ipr_mean_mi", self.ipr_mean_mi),
        ] {
            if v.is_infinite() {
                errors.push(FieldError::new(
                    format!("{prefix}.{path}"),
                    "must be finite",
                ));
            }
        }
        match (self.behavior, self.dissemination_radius_max_m) {
            (Behavior::ClientServer, Some(_)) => errors.push(FieldError::new(
                format!("{prefix}.dissemination_radius_max_m"),
                "must be absent for client_server behavior",
            )),
            (Behavior::Dissemination, None) => errors.push(FieldError::new(
                format!("{prefix}.dissemination_radius_max_m"),
                "required for dissemination behavior",
            )),
            (Behavior::Dissemination, Some(r)) if !(r.is_finite() && r >= 0.0) => {
                errors.push(FieldError::new(
                    format!("{prefix}.dissemination_radius_max_m"),
                    format!("must be finite and >= 0, got {r}"),
                ))
            }
            _ => {}
        }
        self.requirement
            .collect_errors(&format!("{prefix}.requirement"), errors);
    }
}

/// An edge-node processor; the whole capacity is split among the MecApps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Processor {
    pub id: String,
    pub name: String,
    pub mips: f64,
}

impl Processor {
    pub fn new(id: impl Into<String>, name: impl Into<String>, mips: f64) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            mips,
        }
    }

    pub(crate) fn collect_errors(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if !(self.mips.is_finite() && self.mips > 0.0) {
            errors.push(FieldError::new(
                format!("{prefix}.mips"),
                format!("must be finite and > 0, got {}", self.mips),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requirement_bounds() {
        assert!(Requirement::new(0.02, 0.99).is_ok());
        assert!(Requirement::new(0.02, 0.0).is_ok());
        let err = Requirement::new(0.0, 1.0).unwrap_err();
        assert!(err.has_path("requirement.d_req_s"));
        assert!(err.has_path("requirement.r_req"));
        assert!(Requirement::new(0.1, -0.1).is_err());
        assert!(Requirement::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn radius_must_match_behavior() {
        let mut s = load_service(REMOTE_DRIVING).unwrap();
        s.dissemination_radius_max_m = Some(100.0);
        let err = s.validate().unwrap_err();
        assert!(err.has_path("service.dissemination_radius_max_m"));

        let mut s = load_service(COOPERATIVE_AWARENESS).unwrap();
        s.dissemination_radius_max_m = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn every_violation_is_listed() {
        let mut s = load_service(COOPERATIVE_SENSING).unwrap();
        s.uplink_rate_hz = -1.0;
        s.ipr_mean_mi = 0.0;
        s.downlink_payload_bytes = 0;
        let err = s.validate().unwrap_err();
        let paths: Vec<_> = err.paths().collect();
        assert_eq!(
            paths,
            [
                "service.uplink_rate_hz",
                "service.downlink_payload_bytes",
                "service.ipr_mean_mi"
            ]
        );
    }
}
