//! Experiment files.
//!
//! A TOML document naming one service, one or more processors and the
//! sweep axes. Unknown keys are rejected; every other violation is
//! collected and reported with its field path.
//!
//! ```toml
//! vehicle_counts = [1, 2, 3]
//! seeds = [1, 2, 3, 4, 5]      # default 1..=5
//! duration_s = 180.0           # default 180
//! warmup_s = 10.0              # default 10
//! accounting = "per_copy"      # or "per_request"
//! service = "remote_driving"   # or a table, see below
//! processor = ["id1", "id4", { id = "lab", mips = 500000 }]
//!
//! [link]                       # all optional
//! uplink_capacity_bps = 400e6
//! downlink_capacity_bps = 400e6
//! base_latency_s = 0.001
//!
//! [mobility]                   # all optional
//! kind = "random_waypoint"     # or "trace" with path = "trace.csv"
//! v_min_mps = 5.0
//! v_max_mps = 14.0
//! pause_max_s = 5.0
//! update_period_s = 1.0
//! area_side_m = 1000.0
//! ```
//!
//! A service table either overrides fields of a catalog service
//! (`name = "cooperative_sensing"`, `ipr_mean_mi = 300`) or, under any other
//! name, must define every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_processor, load_service, Behavior, Processor, Requirement, ServiceSpec};
use crate::error::{FieldError, ValidationError};
use crate::harness::ExperimentConfig;
use crate::mobility::{load_trace, MobilityKind, MobilityModel};
use crate::simnet::{Accounting, LinkModel};

pub const DEFAULT_DURATION_S: f64 = 180.0;
pub const DEFAULT_WARMUP_S: f64 = 10.0;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RawService {
    Name(String),
    Table(RawServiceTable),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawServiceTable {
    pub name: String,
    pub behavior: Option<Behavior>,
    pub uplink_rate_hz: Option<f64>,
    pub uplink_payload_mean_bytes: Option<f64>,
    pub downlink_payload_bytes: Option<i64>,
    pub ipr_mean_mi: Option<f64>,
    pub dissemination_radius_max_m: Option<f64>,
    pub requirement: Option<RawRequirement>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRequirement {
    pub d_req_s: Option<f64>,
    pub r_req: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RawProcessor {
    Id(String),
    Table(RawProcessorTable),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProcessorTable {
    pub id: Option<String>,
    pub name: Option<String>,
    pub mips: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLink {
    pub uplink_capacity_bps: Option<f64>,
    pub downlink_capacity_bps: Option<f64>,
    pub base_latency_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawMobilityKind {
    RandomWaypoint,
    Trace,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMobility {
    pub kind: Option<RawMobilityKind>,
    pub v_min_mps: Option<f64>,
    pub v_max_mps: Option<f64>,
    pub pause_max_s: Option<f64>,
    pub path: Option<PathBuf>,
    pub update_period_s: Option<f64>,
    pub area_side_m: Option<f64>,
}

/// An experiment file as parsed, before validation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub service: RawService,
    pub processor: OneOrMany<RawProcessor>,
    pub vehicle_counts: Vec<i64>,
    pub seeds: Option<Vec<i64>>,
    pub duration_s: Option<f64>,
    pub warmup_s: Option<f64>,
    pub accounting: Option<Accounting>,
    pub link: Option<RawLink>,
    pub mobility: Option<RawMobility>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// A validated experiment file: one service, the processor and vehicle-count
/// axes, and the seeds to repeat each cell with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub service: ServiceSpec,
    pub processors: Vec<Processor>,
    pub vehicle_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub accounting: Accounting,
    pub link: LinkModel,
    pub mobility: MobilityModel,
}

impl StudyConfig {
    /// Catalog service on every catalog processor, default settings.
    pub fn for_service(service: ServiceSpec, vehicle_counts: Vec<usize>) -> Self {
        Self {
            service,
            processors: super::catalog_processors(),
            vehicle_counts,
            seeds: DEFAULT_SEEDS.to_vec(),
            duration_s: DEFAULT_DURATION_S,
            warmup_s: DEFAULT_WARMUP_S,
            accounting: Accounting::default(),
            link: LinkModel::default(),
            mobility: MobilityModel::default(),
        }
    }

    pub fn experiment(
        &self,
        processor: &Processor,
        n_vehicles: usize,
        seed: u64,
    ) -> ExperimentConfig {
        ExperimentConfig {
            spec: self.service.clone(),
            processor: processor.clone(),
            n_vehicles,
            seed,
            repetition: 0,
            duration_s: self.duration_s,
            warmup_s: self.warmup_s,
            link: self.link,
            mobility: self.mobility.clone(),
            accounting: self.accounting,
        }
    }

    /// Reads and validates an experiment file. Relative trace paths resolve
    /// against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let raw = RawConfig::from_toml(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Ok(validate_config(raw, path.parent())?)
    }

    pub(crate) fn collect_errors(&self, errors: &mut Vec<FieldError>) {
        self.service.collect_errors("service", errors);
        if self.processors.is_empty() {
            errors.push(FieldError::new(
                "processor",
                "at least one processor is required",
            ));
        }
        for (i, p) in self.processors.iter().enumerate() {
            let prefix = if self.processors.len() == 1 {
                "processor".to_owned()
            } else {
                format!("processor[{i}]")
            };
            p.collect_errors(&prefix, errors);
        }
        if self.vehicle_counts.is_empty() {
            errors.push(FieldError::new("vehicle_counts", "must not be empty"));
        }
        for (i, &n) in self.vehicle_counts.iter().enumerate() {
            if n == 0 {
                errors.push(FieldError::new(
                    format!("vehicle_counts[{i}]"),
                    "must be >= 1",
                ));
            }
        }
        if self.seeds.is_empty() {
            errors.push(FieldError::new("seeds", "must not be empty"));
        }
        check_horizon(self.duration_s, self.warmup_s, "", errors);
        self.link.collect_errors("link", errors);
        self.mobility.collect_errors("mobility", errors);
    }
}

pub(crate) fn check_horizon(
    duration_s: f64,
    warmup_s: f64,
    prefix: &str,
    errors: &mut Vec<FieldError>,
) {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        errors.push(FieldError::new(
            format!("{prefix}duration_s"),
            format!("must be finite and > 0, got {duration_s}"),
        ));
    }
    if !(warmup_s.is_finite() && warmup_s >= 0.0) {
        errors.push(FieldError::new(
            format!("{prefix}warmup_s"),
            format!("must be finite and >= 0, got {warmup_s}"),
        ));
    } else if duration_s > 0.0 && duration_s < warmup_s {
        errors.push(FieldError::new(
            format!("{prefix}duration_s"),
            format!("must be >= warmup_s ({duration_s} < {warmup_s})"),
        ));
    }
}

/// Resolves catalog references and defaults, then checks every invariant.
/// `base_dir` anchors relative trace paths.
pub fn validate_config(
    raw: RawConfig,
    base_dir: Option<&Path>,
) -> Result<StudyConfig, ValidationError> {
    let mut errors = Vec::new();

    let service = resolve_service(&raw.service, &mut errors);
    if let Some(s) = &service {
        s.collect_errors("service", &mut errors);
    }

    let raw_procs = match raw.processor {
        OneOrMany::One(p) => vec![("processor".to_owned(), p)],
        OneOrMany::Many(ps) => ps
            .into_iter()
            .enumerate()
            .map(|(i, p)| (format!("processor[{i}]"), p))
            .collect(),
    };
    if raw_procs.is_empty() {
        errors.push(FieldError::new(
            "processor",
            "at least one processor is required",
        ));
    }
    let processors: Vec<Processor> = raw_procs
        .iter()
        .enumerate()
        .filter_map(|(i, (path, p))| resolve_processor(p, path, i, &mut errors))
        .collect();

    let mut vehicle_counts = Vec::new();
    for (i, &n) in raw.vehicle_counts.iter().enumerate() {
        if n < 1 {
            errors.push(FieldError::new(
                format!("vehicle_counts[{i}]"),
                format!("must be >= 1, got {n}"),
            ));
        } else {
            vehicle_counts.push(n as usize);
        }
    }
    if raw.vehicle_counts.is_empty() {
        errors.push(FieldError::new("vehicle_counts", "must not be empty"));
    }

    let seeds = match raw.seeds {
        None => DEFAULT_SEEDS.to_vec(),
        Some(list) => {
            if list.is_empty() {
                errors.push(FieldError::new("seeds", "must not be empty"));
            }
            list.iter()
                .enumerate()
                .filter_map(|(i, &s)| {
                    if s < 0 {
                        errors.push(FieldError::new(
                            format!("seeds[{i}]"),
                            format!("must be >= 0, got {s}"),
                        ));
                        None
                    } else {
                        Some(s as u64)
                    }
                })
                .collect()
        }
    };

    let duration_s = raw.duration_s.unwrap_or(DEFAULT_DURATION_S);
    let warmup_s = raw.warmup_s.unwrap_or(DEFAULT_WARMUP_S);
    check_horizon(duration_s, warmup_s, "", &mut errors);

    let link = {
        let d = LinkModel::default();
        let r = raw.link.unwrap_or_default();
        LinkModel {
            uplink_capacity_bps: r.uplink_capacity_bps.unwrap_or(d.uplink_capacity_bps),
            downlink_capacity_bps: r.downlink_capacity_bps.unwrap_or(d.downlink_capacity_bps),
            base_latency_s: r.base_latency_s.unwrap_or(d.base_latency_s),
        }
    };
    link.collect_errors("link", &mut errors);

    let mobility = resolve_mobility(raw.mobility.unwrap_or_default(), base_dir, &mut errors);
    if let Some(m) = &mobility {
        m.collect_errors("mobility", &mut errors);
        if let (
            MobilityKind::Trace { path },
            Some(ServiceSpec {
                behavior: Behavior::Dissemination,
                ..
            }),
        ) = (&m.kind, &service)
        {
            match load_trace(path) {
                Ok(trace) => {
                    let needed = vehicle_counts.iter().copied().max().unwrap_or(0);
                    if trace.vehicle_count() < needed {
                        errors.push(FieldError::new(
                            "mobility.path",
                            format!(
                                "trace holds {} vehicles but vehicle_counts asks for {needed}",
                                trace.vehicle_count()
                            ),
                        ));
                    }
                }
                Err(e) => errors.push(FieldError::new("mobility.path", e.to_string())),
            }
        }
    }

    ValidationError::check(errors)?;
    Ok(StudyConfig {
        service: service.expect("validated"),
        processors,
        vehicle_counts,
        seeds,
        duration_s,
        warmup_s,
        accounting: raw.accounting.unwrap_or_default(),
        link,
        mobility: mobility.expect("validated"),
    })
}

fn resolve_service(raw: &RawService, errors: &mut Vec<FieldError>) -> Option<ServiceSpec> {
    let table = match raw {
        RawService::Name(name) => {
            return match load_service(name) {
                Ok(s) => Some(s),
                Err(e) => {
                    errors.push(FieldError::new("service", e.to_string()));
                    None
                }
            };
        }
        RawService::Table(t) => t,
    };
    let base = load_service(&table.name).ok();
    let before = errors.len();
    let mut need = |field: &str, catalog: Option<f64>, given: Option<f64>| -> f64 {
        given.or(catalog).unwrap_or_else(|| {
            errors.push(FieldError::new(
                format!("service.{field}"),
                format!("required for non-catalog service {:?}", table.name),
            ));
            f64::NAN
        })
    };
    let uplink_rate_hz = need(
        "uplink_rate_hz",
        base.as_ref().map(|b| b.uplink_rate_hz),
        table.uplink_rate_hz,
    );
    let uplink_payload_mean_bytes = need(
        "uplink_payload_mean_bytes",
        base.as_ref().map(|b| b.uplink_payload_mean_bytes),
        table.uplink_payload_mean_bytes,
    );
    let ipr_mean_mi = need(
        "ipr_mean_mi",
        base.as_ref().map(|b| b.ipr_mean_mi),
        table.ipr_mean_mi,
    );
    let raw_req = table.requirement.clone().unwrap_or_default();
    let d_req_s = need(
        "requirement.d_req_s",
        base.as_ref().map(|b| b.requirement.d_req_s),
        raw_req.d_req_s,
    );
    let r_req = need(
        "requirement.r_req",
        base.as_ref().map(|b| b.requirement.r_req),
        raw_req.r_req,
    );

    let behavior = table.behavior.or(base.as_ref().map(|b| b.behavior));
    if behavior.is_none() {
        errors.push(FieldError::new(
            "service.behavior",
            format!("required for non-catalog service {:?}", table.name),
        ));
    }
    let downlink_payload_bytes = match table.downlink_payload_bytes {
        Some(b) if !(1..=i64::from(u32::MAX)).contains(&b) => {
            errors.push(FieldError::new(
                "service.downlink_payload_bytes",
                format!("must be between 1 and {} bytes, got {b}", u32::MAX),
            ));
            None
        }
        Some(b) => Some(b as u32),
        None => base.as_ref().map(|b| b.downlink_payload_bytes).or_else(|| {
            errors.push(FieldError::new(
                "service.downlink_payload_bytes",
                format!("required for non-catalog service {:?}", table.name),
            ));
            None
        }),
    };
    // A behavior override drops the catalog radius when it no longer applies.
    let dissemination_radius_max_m = table.dissemination_radius_max_m.or_else(|| match behavior {
        Some(Behavior::Dissemination) => base.as_ref().and_then(|b| b.dissemination_radius_max_m),
        _ => None,
    });
    if errors.len() > before {
        return None;
    }
    Some(ServiceSpec {
        name: table.name.clone(),
        behavior: behavior?,
        uplink_rate_hz,
        uplink_payload_mean_bytes,
        downlink_payload_bytes: downlink_payload_bytes?,
        ipr_mean_mi,
        dissemination_radius_max_m,
        requirement: Requirement { d_req_s, r_req },
    })
}

fn resolve_processor(
    raw: &RawProcessor,
    path: &str,
    index: usize,
    errors: &mut Vec<FieldError>,
) -> Option<Processor> {
    let lookup = |id: &str, errors: &mut Vec<FieldError>, field: String| match load_processor(id) {
        Ok(p) => Some(p),
        Err(e) => {
            errors.push(FieldError::new(field, e.to_string()));
            None
        }
    };
    match raw {
        RawProcessor::Id(id) => lookup(id, errors, path.to_owned()),
        RawProcessor::Table(t) => match (t.mips, &t.id) {
            (None, Some(id)) => {
                let mut p = lookup(id, errors, format!("{path}.id"))?;
                if let Some(name) = &t.name {
                    p.name = name.clone();
                }
                Some(p)
            }
            (None, None) => {
                errors.push(FieldError::new(
                    format!("{path}.mips"),
                    "either id or mips is required",
                ));
                None
            }
            (Some(mips), id) => {
                let p = Processor {
                    id: id.clone().unwrap_or_else(|| format!("custom{}", index + 1)),
                    name: t.name.clone().unwrap_or_default(),
                    mips,
                };
                let before = errors.len();
                p.collect_errors(path, errors);
                (errors.len() == before).then_some(p)
            }
        },
    }
}

fn resolve_mobility(
    raw: RawMobility,
    base_dir: Option<&Path>,
    errors: &mut Vec<FieldError>,
) -> Option<MobilityModel> {
    let d = MobilityModel::default();
    let (v_min, v_max, pause_max) = match d.kind {
        MobilityKind::RandomWaypoint {
            v_min_mps,
            v_max_mps,
            pause_max_s,
        } => (v_min_mps, v_max_mps, pause_max_s),
        MobilityKind::Trace { .. } => unreachable!("default mobility is random waypoint"),
    };
    let kind = match raw.kind.unwrap_or(RawMobilityKind::RandomWaypoint) {
        RawMobilityKind::RandomWaypoint => {
            if raw.path.is_some() {
                errors.push(FieldError::new(
                    "mobility.path",
                    "only valid with kind = \"trace\"",
                ));
                return None;
            }
            MobilityKind::RandomWaypoint {
                v_min_mps: raw.v_min_mps.unwrap_or(v_min),
                v_max_mps: raw.v_max_mps.unwrap_or(v_max),
                pause_max_s: raw.pause_max_s.unwrap_or(pause_max),
            }
        }
        RawMobilityKind::Trace => {
            for (field, set) in [
                ("v_min_mps", raw.v_min_mps.is_some()),
                ("v_max_mps", raw.v_max_mps.is_some()),
                ("pause_max_s", raw.pause_max_s.is_some()),
            ] {
                if set {
                    errors.push(FieldError::new(
                        format!("mobility.{field}"),
                        "only valid with kind = \"random_waypoint\"",
                    ));
                }
            }
            let Some(path) = raw.path else {
                errors.push(FieldError::new(
                    "mobility.path",
                    "required with kind = \"trace\"",
                ));
                return None;
            };
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            MobilityKind::Trace { path }
        }
    };
    Some(MobilityModel {
        kind,
        update_period_s: raw.update_period_s.unwrap_or(d.update_period_s),
        area_side_m: raw.area_side_m.unwrap_or(d.area_side_m),
    })
}
