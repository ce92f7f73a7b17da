//! Capacity planning and discrete-event simulation of connected-vehicle
//! services hosted on a shared edge node.
//!
//! - [`scenario`]: services, requirements, processors, catalog, config files
//! - [`analytic`]: closed-form M/M/1 minimum CPU and feasible vehicle counts
//! - [`engine`]: event scheduler and seeded random streams
//! - [`mobility`]: random-waypoint fleets and CSV trace replay
//! - [`simnet`]: uplink, MecApp queueing/processing and downlink pipeline
//! - [`harness`]: experiment runs, sweeps and CSV artifacts

pub mod analytic;
pub mod engine;
pub mod error;
pub mod harness;
pub mod mobility;
pub mod scenario;
pub mod simnet;
pub mod stats;

pub use analytic::{
    cpu_min, feasible_vehicle_count, mm1_reliability, plan, required_service_rate, Mm1Params,
    PlanResult,
};
pub use error::{FieldError, ValidationError};
pub use harness::{
    compute_reliability, emit_outputs, run_experiment, run_sweep, success_rate, ExperimentConfig,
    ExperimentResult, HarnessError, SweepResult,
};
pub use mobility::{MobilityKind, MobilityModel, Position};
pub use scenario::{
    catalog_processors, catalog_services, load_processor, load_service, validate_config, Behavior,
    Processor, Requirement, ServiceSpec, StudyConfig,
};
pub use simnet::{Accounting, DelayRecord, LinkModel};
