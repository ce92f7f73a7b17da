//! Vehicle positions over time: a synthetic random-waypoint fleet or a
//! replayed CSV trace (`t_s,vehicle_id,x_m,y_m`).
//!
//! Both are stored as per-vehicle piecewise-linear trajectories.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Purpose, RngStream, SamplerError, StreamKey};
use crate::error::{require_positive, FieldError};

pub const DEFAULT_AREA_SIDE_M: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(&self, other: &Position, f: f64) -> Position {
        Position::new(
            self.x + (other.x - self.x) * f,
            self.y + (other.y - self.y) * f,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityKind {
    RandomWaypoint {
        v_min_mps: f64,
        v_max_mps: f64,
        /// Pauses at each waypoint are drawn from `U(0, pause_max_s)`.
        pause_max_s: f64,
    },
    Trace {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel {
    pub kind: MobilityKind,
    /// Random-waypoint legs are generated lazily, this far ahead of the clock.
    pub update_period_s: f64,
    pub area_side_m: f64,
}

impl Default for MobilityModel {
    fn default() -> Self {
        Self {
            kind: MobilityKind::RandomWaypoint {
                v_min_mps: 5.0,
                v_max_mps: 14.0,
                pause_max_s: 5.0,
            },
            update_period_s: 1.0,
            area_side_m: DEFAULT_AREA_SIDE_M,
        }
    }
}

impl MobilityModel {
    pub(crate) fn collect_errors(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        require_positive(
            errors,
            &format!("{prefix}.update_period_s"),
            self.update_period_s,
        );
        require_positive(errors, &format!("{prefix}.area_side_m"), self.area_side_m);
        for (name, v) in [
            ("update_period_s", self.update_period_s),
            ("area_side_m", self.area_side_m),
        ] {
            if v.is_infinite() {
                errors.push(FieldError::new(
                    format!("{prefix}.{name}"),
                    "must be finite",
                ));
            }
        }
        if let MobilityKind::RandomWaypoint {
            v_min_mps,
            v_max_mps,
            pause_max_s,
        } = self.kind
        {
            for (name, v) in [
                ("v_min_mps", v_min_mps),
                ("v_max_mps", v_max_mps),
                ("pause_max_s", pause_max_s),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    errors.push(FieldError::new(
                        format!("{prefix}.{name}"),
                        format!("must be finite and >= 0, got {v}"),
                    ));
                }
            }
            if v_min_mps > v_max_mps {
                errors.push(FieldError::new(
                    format!("{prefix}.v_min_mps"),
                    format!("must not exceed v_max_mps ({v_min_mps} > {v_max_mps})"),
                ));
            }
        }
    }

    /// Builds the positions source for `n` vehicles of one run.
    pub fn instantiate(
        &self,
        n: usize,
        seed: u64,
        repetition: u32,
    ) -> Result<Fleet, MobilityError> {
        match &self.kind {
            MobilityKind::RandomWaypoint {
                v_min_mps,
                v_max_mps,
                pause_max_s,
            } => {
                let params = WaypointParams {
                    v_min_mps: *v_min_mps,
                    v_max_mps: *v_max_mps,
                    pause_max_s: *pause_max_s,
                    area_side_m: self.area_side_m,
                };
                Ok(Fleet::RandomWaypoint(RandomWaypoint::new(
                    n, params, seed, repetition,
                )?))
            }
            MobilityKind::Trace { path } => {
                let trace = load_trace(path)?;
                Ok(Fleet::Trace(trace.take(n)?))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MobilityError {
    #[error("unknown vehicle {0}")]
    UnknownVehicle(usize),
    #[error(
        "position requested at t={t} s but trajectories are generated only up to {generated} s"
    )]
    NotGenerated { t: f64, generated: f64 },
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trace line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("trace line {line}: time {t} s for vehicle {vehicle:?} precedes its previous row ({previous} s)")]
    DecreasingTime {
        line: u64,
        vehicle: String,
        t: f64,
        previous: f64,
    },
    #[error("no vehicles in trace")]
    NoVehicles,
    #[error("trace holds {available} vehicles but {requested} were requested")]
    TooFewVehicles { available: usize, requested: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Time-ordered `(t, position)` samples of one vehicle. Positions are held
/// before the first and after the last sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    points: Vec<(f64, Position)>,
}

impl Trajectory {
    pub fn position_at(&self, t: f64) -> Position {
        let pts = &self.points;
        let idx = pts.partition_point(|(ti, _)| *ti <= t);
        if idx == 0 {
            return pts[0].1;
        }
        if idx == pts.len() {
            return pts[idx - 1].1;
        }
        let (t0, p0) = pts[idx - 1];
        let (t1, p1) = pts[idx];
        if t1 <= t0 {
            return p1;
        }
        p0.lerp(&p1, (t - t0) / (t1 - t0))
    }

    pub fn points(&self) -> &[(f64, Position)] {
        &self.points
    }

    fn last_time(&self) -> f64 {
        self.points.last().map_or(f64::NEG_INFINITY, |p| p.0)
    }
}

/// A loaded mobility trace; vehicles are indexed in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    ids: Vec<String>,
    trajectories: Vec<Trajectory>,
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    t_s: f64,
    vehicle_id: String,
    x_m: f64,
    y_m: f64,
}

pub fn load_trace(path: &Path) -> Result<Trace, MobilityError> {
    let file = std::fs::File::open(path).map_err(|source| MobilityError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_trace(file)
}

pub fn parse_trace<R: Read>(reader: R) -> Result<Trace, MobilityError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| MobilityError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Err(MobilityError::NoVehicles);
    }
    let expected = ["t_s", "vehicle_id", "x_m", "y_m"];
    if headers.iter().ne(expected) {
        return Err(MobilityError::Parse {
            line: 1,
            message: format!(
                "header must be `t_s,vehicle_id,x_m,y_m`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut trace = Trace {
        ids: Vec::new(),
        trajectories: Vec::new(),
    };
    for record in rdr.records() {
        let record = record.map_err(|e| MobilityError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow =
            record
                .deserialize(Some(&headers))
                .map_err(|e| MobilityError::Parse {
                    line,
                    message: e.to_string(),
                })?;
        if !row.t_s.is_finite() || !row.x_m.is_finite() || !row.y_m.is_finite() {
            return Err(MobilityError::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        let slot = *index.entry(row.vehicle_id.clone()).or_insert_with(|| {
            trace.ids.push(row.vehicle_id.clone());
            trace.trajectories.push(Trajectory::default());
            trace.ids.len() - 1
        });
        let traj = &mut trace.trajectories[slot];
        let previous = traj.last_time();
        if row.t_s < previous {
            return Err(MobilityError::DecreasingTime {
                line,
                vehicle: row.vehicle_id,
                t: row.t_s,
                previous,
            });
        }
        traj.points.push((row.t_s, Position::new(row.x_m, row.y_m)));
    }
    if trace.ids.is_empty() {
        return Err(MobilityError::NoVehicles);
    }
    Ok(trace)
}

impl Trace {
    pub fn vehicle_count(&self) -> usize {
        self.ids.len()
    }

    pub fn vehicle_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn trajectory(&self, vehicle: usize) -> Option<&Trajectory> {
        self.trajectories.get(vehicle)
    }

    /// Keeps the first `n` vehicles.
    pub fn take(mut self, n: usize) -> Result<Trace, MobilityError> {
        if n > self.ids.len() {
            return Err(MobilityError::TooFewVehicles {
                available: self.ids.len(),
                requested: n,
            });
        }
        self.ids.truncate(n);
        self.trajectories.truncate(n);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub v_min_mps: f64,
    pub v_max_mps: f64,
    pub pause_max_s: f64,
    pub area_side_m: f64,
}

/// Random-waypoint vehicles in `[0, side]^2`: pick a uniform destination,
/// drive to it at a uniform speed, pause, repeat. Destinations lie inside
/// the square, so straight legs never leave it.
#[derive(Debug, Clone)]
pub struct RandomWaypoint {
    params: WaypointParams,
    vehicles: Vec<WaypointVehicle>,
}

#[derive(Debug, Clone)]
struct WaypointVehicle {
    rng: RngStream,
    trajectory: Trajectory,
    /// Zero speed: the vehicle never moves again.
    parked: bool,
}

impl RandomWaypoint {
    pub fn new(
        n: usize,
        params: WaypointParams,
        seed: u64,
        repetition: u32,
    ) -> Result<Self, MobilityError> {
        let side = params.area_side_m;
        let vehicles = (0..n)
            .map(|v| {
                let key = StreamKey::new(repetition, v as u32, Purpose::Mobility);
                let mut rng = RngStream::new(seed, key);
                let start = Position::new(
                    rng.sample_uniform(0.0, side)?,
                    rng.sample_uniform(0.0, side)?,
                );
                Ok(WaypointVehicle {
                    rng,
                    trajectory: Trajectory {
                        points: vec![(0.0, start)],
                    },
                    parked: false,
                })
            })
            .collect::<Result<_, MobilityError>>()?;
        Ok(Self { params, vehicles })
    }

    /// Extends every trajectory to cover at least `[0, t]`.
    pub fn extend_to(&mut self, t: f64) -> Result<(), MobilityError> {
        let p = self.params;
        for v in &mut self.vehicles {
            while !v.parked && v.trajectory.last_time() < t {
                let (t0, from) = *v.trajectory.points.last().expect("start point");
                let speed = v.rng.sample_uniform(p.v_min_mps, p.v_max_mps)?;
                let to = Position::new(
                    v.rng.sample_uniform(0.0, p.area_side_m)?,
                    v.rng.sample_uniform(0.0, p.area_side_m)?,
                );
                let pause = v.rng.sample_uniform(0.0, p.pause_max_s)?;
                if speed <= 0.0 {
                    v.parked = true;
                    break;
                }
                let arrive = t0 + from.distance(&to) / speed;
                v.trajectory.points.push((arrive, to));
                if pause > 0.0 {
                    v.trajectory.points.push((arrive + pause, to));
                }
            }
        }
        Ok(())
    }

    /// Time up to which every trajectory is known.
    pub fn generated_until(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| {
                if v.parked {
                    f64::INFINITY
                } else {
                    v.trajectory.last_time()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn trajectory(&self, vehicle: usize) -> Option<&Trajectory> {
        self.vehicles.get(vehicle).map(|v| &v.trajectory)
    }
}

/// Positions of all vehicles of one run.
#[derive(Debug, Clone)]
pub enum Fleet {
    RandomWaypoint(RandomWaypoint),
    Trace(Trace),
}

impl Fleet {
    pub fn len(&self) -> usize {
        match self {
            Fleet::RandomWaypoint(w) => w.vehicles.len(),
            Fleet::Trace(t) => t.vehicle_count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Makes positions up to `t` queryable. A no-op for traces.
    pub fn extend_to(&mut self, t: f64) -> Result<(), MobilityError> {
        match self {
            Fleet::RandomWaypoint(w) => w.extend_to(t),
            Fleet::Trace(_) => Ok(()),
        }
    }

    pub fn position_at(&self, vehicle: usize, t: f64) -> Result<Position, MobilityError> {
        match self {
            Fleet::RandomWaypoint(w) => {
                let v = w
                    .vehicles
                    .get(vehicle)
                    .ok_or(MobilityError::UnknownVehicle(vehicle))?;
                let generated = v.trajectory.last_time();
                if !v.parked && t > generated {
                    return Err(MobilityError::NotGenerated { t, generated });
                }
                Ok(v.trajectory.position_at(t))
            }
            Fleet::Trace(tr) => tr
                .trajectory(vehicle)
                .map(|traj| traj.position_at(t))
                .ok_or(MobilityError::UnknownVehicle(vehicle)),
        }
    }

    /// Every vehicle other than `center` within `radius` meters of it at `t`,
    /// in ascending id order.
    pub fn neighbors_within(
        &self,
        center: usize,
        radius: f64,
        t: f64,
    ) -> Result<Vec<usize>, MobilityError> {
        let c = self.position_at(center, t)?;
        let mut out = Vec::new();
        for v in 0..self.len() {
            if v == center {
                continue;
            }
            if self.position_at(v, t)?.distance(&c) <= radius {
                out.push(v);
            }
        }
        Ok(out)
    }
}
