//! Packet pipeline of one experiment run:
//! uplink -> MecApp queue -> MecApp processing -> downlink.
//!
//! Every vehicle owns one MecApp holding `processor.mips / n` and one FIFO
//! link server per direction at `capacity / n` bits/s. Queues are
//! unbounded; nothing is dropped.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::analytic::Mm1Params;
use crate::engine::{
    EngineError, Event, EventKind, Handler, Purpose, RngStream, SamplerError, Scheduler, StreamKey,
};
use crate::error::{require_non_negative, require_positive, FieldError};
use crate::harness::ExperimentConfig;
use crate::mobility::{Fleet, MobilityError};
use crate::scenario::{Behavior, ServiceSpec};

type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// How dissemination deliveries turn into reliability samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Each delivered copy is one sample.
    #[default]
    PerCopy,
    /// A request succeeds only if every copy meets the deadline.
    PerRequest,
}

impl Accounting {
    pub fn as_str(self) -> &'static str {
        match self {
            Accounting::PerCopy => "per_copy",
            Accounting::PerRequest => "per_request",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    /// Total cell uplink capacity, bits/s. May be `inf`.
    pub uplink_capacity_bps: f64,
    pub downlink_capacity_bps: f64,
    /// Added to every transmission, seconds.
    pub base_latency_s: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            uplink_capacity_bps: 400e6,
            downlink_capacity_bps: 400e6,
            base_latency_s: 0.001,
        }
    }
}

impl LinkModel {
    /// Links that add no delay at all.
    pub fn ideal() -> Self {
        Self {
            uplink_capacity_bps: f64::INFINITY,
            downlink_capacity_bps: f64::INFINITY,
            base_latency_s: 0.0,
        }
    }

    pub(crate) fn collect_errors(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        require_positive(
            errors,
            &format!("{prefix}.uplink_capacity_bps"),
            self.uplink_capacity_bps,
        );
        require_positive(
            errors,
            &format!("{prefix}.downlink_capacity_bps"),
            self.downlink_capacity_bps,
        );
        require_non_negative(
            errors,
            &format!("{prefix}.base_latency_s"),
            self.base_latency_s,
        );
    }
}

/// A FIFO transmitter: one packet at a time, then a fixed propagation latency.
#[derive(Debug, Clone)]
pub struct LinkServer {
    rate_bps: f64,
    base_latency_s: f64,
    free_at: f64,
}

impl LinkServer {
    pub fn new(rate_bps: f64, base_latency_s: f64) -> Self {
        Self {
            rate_bps,
            base_latency_s,
            free_at: f64::NEG_INFINITY,
        }
    }

    /// Sends `bytes` that become ready at `ready_at`; returns the arrival time
    /// at the far end.
    pub fn transmit(&mut self, ready_at: f64, bytes: u64) -> f64 {
        let start = ready_at.max(self.free_at);
        let done = start + (bytes as f64 * 8.0) / self.rate_bps;
        self.free_at = done;
        done + self.base_latency_s
    }
}

/// Per-vehicle uplink server at `uplink_capacity / n_vehicles`.
pub fn uplink_server(link: &LinkModel, n_vehicles: usize) -> LinkServer {
    LinkServer::new(
        link.uplink_capacity_bps / n_vehicles as f64,
        link.base_latency_s,
    )
}

/// Per-destination downlink server at `downlink_capacity / n_vehicles`.
pub fn downlink_server(link: &LinkModel, n_vehicles: usize) -> LinkServer {
    LinkServer::new(
        link.downlink_capacity_bps / n_vehicles as f64,
        link.base_latency_s,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub source_vehicle: usize,
    pub created_at: f64,
    pub payload_bytes: u64,
    pub ipr_mi: f64,
}

/// A vehicle's application instance on the edge node: a FIFO queue served
/// at a fixed CPU share.
#[derive(Debug, Clone)]
pub struct MecApp {
    pub owner_vehicle: usize,
    pub allocated_mips: f64,
    queue: VecDeque<u64>,
    busy_until: f64,
    busy_time_s: f64,
    admitted: u64,
    started: u64,
    demand_mi: f64,
}

impl MecApp {
    pub fn new(owner_vehicle: usize, allocated_mips: f64) -> Self {
        Self {
            owner_vehicle,
            allocated_mips,
            queue: VecDeque::new(),
            busy_until: f64::NEG_INFINITY,
            busy_time_s: 0.0,
            admitted: 0,
            started: 0,
            demand_mi: 0.0,
        }
    }

    /// Queues `r` arriving at `arrival` and fixes its service window:
    /// it starts once everything ahead of it is done and runs for
    /// `ipr_mi / allocated_mips` seconds.
    pub fn enqueue_and_serve(&mut self, r: &Request, arrival: f64) -> (f64, f64) {
        let start = arrival.max(self.busy_until);
        let processing = r.ipr_mi / self.allocated_mips;
        let end = start + processing;
        self.busy_until = end;
        self.busy_time_s += processing;
        self.demand_mi += r.ipr_mi;
        self.admitted += 1;
        self.queue.push_back(r.id);
        (start, end)
    }

    /// Removes the head of the queue when its service starts.
    fn begin_service(&mut self, id: u64) -> Result<(), BoxError> {
        match self.queue.pop_front() {
            Some(head) if head == id => {
                self.started += 1;
                Ok(())
            }
            head => Err(format!(
                "MecApp {}: FIFO violated, expected {head:?}, got {id}",
                self.owner_vehicle
            )
            .into()),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn stats(&self) -> AppStats {
        AppStats {
            owner_vehicle: self.owner_vehicle,
            allocated_mips: self.allocated_mips,
            admitted: self.admitted,
            started: self.started,
            busy_time_s: self.busy_time_s,
            demand_mi: self.demand_mi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppStats {
    pub owner_vehicle: usize,
    pub allocated_mips: f64,
    /// Requests admitted to the queue.
    pub admitted: u64,
    /// Requests whose service has begun.
    pub started: u64,
    /// Processing time committed to admitted requests.
    pub busy_time_s: f64,
    pub demand_mi: f64,
}

/// Delay decomposition of one delivered copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub request_id: u64,
    pub source_vehicle: usize,
    pub recipient: usize,
    pub created_at: f64,
    pub uplink_s: f64,
    pub mec_queue_s: f64,
    pub mec_processing_s: f64,
    pub downlink_s: f64,
    pub e2e_s: f64,
    pub deadline_met: bool,
}

impl DelayRecord {
    /// Time spent on the edge node (queueing + processing).
    pub fn mec_sojourn_s(&self) -> f64 {
        self.mec_queue_s + self.mec_processing_s
    }
}

/// Recipients chosen for one processed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub request_id: u64,
    pub source_vehicle: usize,
    pub time: f64,
    /// Whether the request counts toward reliability.
    pub judged: bool,
    /// `None` for client-server responses.
    pub radius_m: Option<f64>,
    /// Source first, then neighbors in ascending id order.
    pub recipients: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep every judged `DelayRecord` in the output.
    pub keep_records: bool,
    /// Keep every `DispatchRecord` in the output.
    pub record_dispatches: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("n_vehicles must be >= 1")]
    NoVehicles,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub accounting: Accounting,
    /// Reliability samples after warm-up and horizon filtering.
    pub samples: u64,
    pub met: u64,
    /// Judged copies or requests that never completed before the horizon.
    pub inflight_failures: u64,
    /// End-to-end delays of judged delivered copies.
    pub e2e_s: Vec<f64>,
    pub delay_records: Vec<DelayRecord>,
    pub dispatches: Vec<DispatchRecord>,
    pub requests_generated: u64,
    pub copies_delivered: u64,
    pub mm1: Mm1Params,
    pub apps: Vec<AppStats>,
    pub events_scheduled: u64,
    pub events_dispatched: u64,
    pub events_pending: u64,
    pub digest: u64,
}

impl SimOutput {
    pub fn reliability(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.met as f64 / self.samples as f64)
    }
}

#[derive(Debug, Clone, Copy)]
enum Payload {
    Generate { vehicle: usize },
    Request { id: u64 },
    Copy { id: u64, recipient: usize },
    None,
}

struct VehicleStreams {
    interarrival: RngStream,
    payload: RngStream,
    instructions: RngStream,
    radius: RngStream,
}

struct RequestState {
    request: Request,
    uplink_arrival: f64,
    service_start: f64,
    service_end: f64,
    /// Requests created within `d_req` of the horizon, or during warm-up,
    /// are never judged.
    judged: bool,
    /// 0 until dispatched.
    copies: u32,
    delivered: u32,
    met: u32,
}

struct Pipeline<'a> {
    spec: &'a ServiceSpec,
    options: SimOptions,
    accounting: Accounting,
    downlink_bytes: u64,
    streams: Vec<VehicleStreams>,
    uplinks: Vec<LinkServer>,
    downlinks: Vec<LinkServer>,
    apps: Vec<MecApp>,
    fleet: Option<Fleet>,
    mobility_period_s: f64,
    requests: Vec<RequestState>,
    warmup_s: f64,
    judge_before: f64,
    delivered_met: u64,
    delivered_judged: u64,
    copies_delivered: u64,
    e2e_s: Vec<f64>,
    delay_records: Vec<DelayRecord>,
    dispatches: Vec<DispatchRecord>,
}

/// Runs one experiment to its horizon.
pub fn simulate(cfg: &ExperimentConfig, options: SimOptions) -> Result<SimOutput, SimError> {
    let n = cfg.n_vehicles;
    if n == 0 {
        return Err(SimError::NoVehicles);
    }
    let spec = &cfg.spec;
    let rep = cfg.repetition;
    let alloc = cfg.processor.mips / n as f64;
    let streams = (0..n)
        .map(|v| {
            let s = |p| RngStream::new(cfg.seed, StreamKey::new(rep, v as u32, p));
            VehicleStreams {
                interarrival: s(Purpose::Interarrival),
                payload: s(Purpose::UplinkPayload),
                instructions: s(Purpose::Instructions),
                radius: s(Purpose::DisseminationRadius),
            }
        })
        .collect();
    let fleet = match spec.behavior {
        Behavior::Dissemination => Some(cfg.mobility.instantiate(n, cfg.seed, rep)?),
        Behavior::ClientServer => None,
    };

    let mut p = Pipeline {
        spec,
        options,
        accounting: cfg.accounting,
        downlink_bytes: u64::from(spec.downlink_payload_bytes),
        streams,
        uplinks: (0..n).map(|_| uplink_server(&cfg.link, n)).collect(),
        downlinks: (0..n).map(|_| downlink_server(&cfg.link, n)).collect(),
        apps: (0..n).map(|v| MecApp::new(v, alloc)).collect(),
        fleet,
        mobility_period_s: cfg.mobility.update_period_s,
        requests: Vec::new(),
        warmup_s: cfg.warmup_s,
        judge_before: cfg.duration_s - spec.requirement.d_req_s,
        delivered_met: 0,
        delivered_judged: 0,
        copies_delivered: 0,
        e2e_s: Vec::new(),
        delay_records: Vec::new(),
        dispatches: Vec::new(),
    };

    let mut sched = Scheduler::new();
    for v in 0..n {
        let dt = p.streams[v]
            .interarrival
            .sample_poisson_interarrival(spec.uplink_rate_hz)?;
        if dt <= cfg.duration_s {
            sched.schedule(
                dt,
                EventKind::PacketGenerated,
                Payload::Generate { vehicle: v },
            )?;
        }
    }
    if p.fleet.is_some() {
        sched.schedule(0.0, EventKind::MobilityUpdate, Payload::None)?;
    }
    sched.schedule(cfg.duration_s, EventKind::SimEnd, Payload::None)?;
    sched.run_until(cfg.duration_s, &mut p)?;

    Ok(p.finish(&sched, cfg))
}

impl Pipeline<'_> {
    fn on_generate(
        &mut self,
        now: f64,
        vehicle: usize,
        sched: &mut Scheduler<Payload>,
    ) -> Result<(), BoxError> {
        let spec = self.spec;
        let streams = &mut self.streams[vehicle];
        let payload = streams.payload.sample_exp(spec.uplink_payload_mean_bytes)?;
        let ipr = streams.instructions.sample_exp(spec.ipr_mean_mi)?;
        let request = Request {
            id: self.requests.len() as u64,
            source_vehicle: vehicle,
            created_at: now,
            // whole bytes, at least one
            payload_bytes: (payload.ceil() as u64).max(1),
            ipr_mi: ipr.max(f64::MIN_POSITIVE),
        };
        let arrival = self.uplinks[vehicle].transmit(now, request.payload_bytes);
        let judged = now >= self.warmup_s && now < self.judge_before;
        let id = request.id;
        self.requests.push(RequestState {
            request,
            uplink_arrival: arrival,
            service_start: f64::NAN,
            service_end: f64::NAN,
            judged,
            copies: 0,
            delivered: 0,
            met: 0,
        });
        sched.schedule(arrival, EventKind::UplinkDone, Payload::Request { id })?;

        let next = now
            + streams
                .interarrival
                .sample_poisson_interarrival(spec.uplink_rate_hz)?;
        sched.schedule(
            next,
            EventKind::PacketGenerated,
            Payload::Generate { vehicle },
        )?;
        Ok(())
    }

    fn on_uplink_done(
        &mut self,
        now: f64,
        id: u64,
        sched: &mut Scheduler<Payload>,
    ) -> Result<(), BoxError> {
        let state = &mut self.requests[id as usize];
        let app = &mut self.apps[state.request.source_vehicle];
        let (start, end) = app.enqueue_and_serve(&state.request, now);
        state.service_start = start;
        state.service_end = end;
        sched.schedule(start, EventKind::ServiceStart, Payload::Request { id })?;
        Ok(())
    }

    fn on_service_start(
        &mut self,
        id: u64,
        sched: &mut Scheduler<Payload>,
    ) -> Result<(), BoxError> {
        let state = &self.requests[id as usize];
        let app = &mut self.apps[state.request.source_vehicle];
        app.begin_service(id)?;
        sched.schedule(
            state.service_end,
            EventKind::ServiceDone,
            Payload::Request { id },
        )?;
        Ok(())
    }

    fn on_service_done(
        &mut self,
        now: f64,
        id: u64,
        sched: &mut Scheduler<Payload>,
    ) -> Result<(), BoxError> {
        let source = self.requests[id as usize].request.source_vehicle;
        let (recipients, radius) = self.dispatch_response(source, now)?;
        for &dest in &recipients {
            let delivered = self.downlinks[dest].transmit(now, self.downlink_bytes);
            sched.schedule(
                delivered,
                EventKind::DownlinkDone,
                Payload::Copy {
                    id,
                    recipient: dest,
                },
            )?;
        }
        self.requests[id as usize].copies = recipients.len() as u32;
        if self.options.record_dispatches {
            self.dispatches.push(DispatchRecord {
                request_id: id,
                source_vehicle: source,
                time: now,
                judged: self.requests[id as usize].judged,
                radius_m: radius,
                recipients,
            });
        }
        Ok(())
    }

    /// Picks the recipients of a response emitted at `t`.
    fn dispatch_response(
        &mut self,
        source: usize,
        t: f64,
    ) -> Result<(Vec<usize>, Option<f64>), BoxError> {
        match (
            self.spec.behavior,
            self.spec.dissemination_radius_max_m,
            &self.fleet,
        ) {
            (Behavior::Dissemination, Some(r_max), Some(fleet)) => {
                let radius = self.streams[source].radius.sample_uniform(0.0, r_max)?;
                let mut recipients = vec![source];
                recipients.extend(fleet.neighbors_within(source, radius, t)?);
                Ok((recipients, Some(radius)))
            }
            _ => Ok((vec![source], None)),
        }
    }

    fn on_downlink_done(&mut self, now: f64, id: u64, recipient: usize) {
        self.copies_delivered += 1;
        let d_req = self.spec.requirement.d_req_s;
        let state = &mut self.requests[id as usize];
        let r = &state.request;
        let uplink_s = state.uplink_arrival - r.created_at;
        let mec_queue_s = state.service_start - state.uplink_arrival;
        let mec_processing_s = state.service_end - state.service_start;
        let downlink_s = now - state.service_end;
        let e2e_s = uplink_s + mec_queue_s + mec_processing_s + downlink_s;
        let deadline_met = e2e_s <= d_req;
        state.delivered += 1;
        if !state.judged {
            return;
        }
        if deadline_met {
            state.met += 1;
            self.delivered_met += 1;
        }
        self.delivered_judged += 1;
        self.e2e_s.push(e2e_s);
        if self.options.keep_records {
            self.delay_records.push(DelayRecord {
                request_id: id,
                source_vehicle: r.source_vehicle,
                recipient,
                created_at: r.created_at,
                uplink_s,
                mec_queue_s,
                mec_processing_s,
                downlink_s,
                e2e_s,
                deadline_met,
            });
        }
    }

    fn finish(self, sched: &Scheduler<Payload>, cfg: &ExperimentConfig) -> SimOutput {
        let judged = self.requests.iter().filter(|s| s.judged);
        let (samples, met, inflight_failures) = match self.accounting {
            Accounting::PerCopy => {
                // Undispatched requests count as one missing copy.
                let missing: u64 = judged
                    .map(|s| u64::from(s.copies.max(1) - s.delivered))
                    .sum();
                (self.delivered_judged + missing, self.delivered_met, missing)
            }
            Accounting::PerRequest => {
                let (mut samples, mut met, mut missing) = (0, 0, 0);
                for s in judged {
                    samples += 1;
                    let complete = s.copies > 0 && s.delivered == s.copies;
                    if !complete {
                        missing += 1;
                    } else if s.met == s.copies {
                        met += 1;
                    }
                }
                (samples, met, missing)
            }
        };
        let mm1 = Mm1Params::from_allocation(
            self.spec.uplink_rate_hz,
            cfg.processor.mips / cfg.n_vehicles as f64,
            self.spec.ipr_mean_mi,
        );
        SimOutput {
            accounting: self.accounting,
            samples,
            met,
            inflight_failures,
            e2e_s: self.e2e_s,
            delay_records: self.delay_records,
            dispatches: self.dispatches,
            requests_generated: self.requests.len() as u64,
            copies_delivered: self.copies_delivered,
            mm1,
            apps: self.apps.iter().map(MecApp::stats).collect(),
            events_scheduled: sched.scheduled(),
            events_dispatched: sched.dispatched(),
            events_pending: sched.pending() as u64,
            digest: sched.digest(),
        }
    }
}

impl Handler<Payload> for Pipeline<'_> {
    fn handle(
        &mut self,
        event: Event<Payload>,
        sched: &mut Scheduler<Payload>,
    ) -> Result<(), BoxError> {
        let now = event.time;
        match (event.kind, event.payload) {
            (EventKind::PacketGenerated, Payload::Generate { vehicle }) => {
                self.on_generate(now, vehicle, sched)
            }
            (EventKind::UplinkDone, Payload::Request { id }) => self.on_uplink_done(now, id, sched),
            (EventKind::ServiceStart, Payload::Request { id }) => self.on_service_start(id, sched),
            (EventKind::ServiceDone, Payload::Request { id }) => {
                self.on_service_done(now, id, sched)
            }
            (EventKind::DownlinkDone, Payload::Copy { id, recipient }) => {
                self.on_downlink_done(now, id, recipient);
                Ok(())
            }
            (EventKind::MobilityUpdate, _) => {
                if let Some(fleet) = &mut self.fleet {
                    fleet.extend_to(now + 2.0 * self.mobility_period_s)?;
                    sched.schedule(
                        now + self.mobility_period_s,
                        EventKind::MobilityUpdate,
                        Payload::None,
                    )?;
                }
                Ok(())
            }
            (EventKind::SimEnd, _) => Ok(()),
            (kind, payload) => Err(format!("unexpected payload {payload:?} for {kind}").into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(id: u64, ipr_mi: f64) -> Request {
        Request {
            id,
            source_vehicle: 0,
            created_at: 0.0,
            payload_bytes: 1,
            ipr_mi,
        }
    }

    #[test]
    fn uplink_idle_link() {
        // 40000 B at 32 Mb/s per vehicle (400 Mb/s shared by 12.5) + 1 ms.
        let mut link = LinkServer::new(32e6, 0.001);
        let arrival = link.transmit(0.0, 40_000);
        assert!((arrival - 0.011).abs() < 1e-12, "{arrival}");
    }

    #[test]
    fn per_vehicle_share() {
        let link = LinkModel {
            uplink_capacity_bps: 64e6,
            downlink_capacity_bps: 0.5e6,
            base_latency_s: 0.001,
        };
        let mut up = uplink_server(&link, 2);
        assert!((up.transmit(0.0, 40_000) - 0.011).abs() < 1e-12);
        // 313 B at 0.25 Mb/s + 1 ms
        let mut down = downlink_server(&link, 2);
        let t = down.transmit(0.0, 313);
        assert!((t - (313.0 * 8.0 / 250_000.0 + 0.001)).abs() < 1e-12);
        assert!((t - 0.011016).abs() < 1e-9);
    }

    #[test]
    fn link_is_fifo() {
        let mut link = LinkServer::new(8e6, 0.0);
        let a = link.transmit(0.0, 1_000_000); // 1 s on the wire
        let b = link.transmit(0.5, 1_000_000);
        assert_eq!(a, 1.0);
        assert_eq!(b, 2.0);
        let c = link.transmit(5.0, 1_000_000);
        assert_eq!(c, 6.0);
    }

    #[test]
    fn infinite_capacity_adds_only_latency() {
        let mut link = uplink_server(&LinkModel::ideal(), 3);
        assert_eq!(link.transmit(1.25, 1_000_000), 1.25);
    }

    #[test]
    fn idle_app_processing() {
        let mut app = MecApp::new(0, 165_130.0);
        let (start, end) = app.enqueue_and_serve(&request(0, 500.0), 2.0);
        assert_eq!(start, 2.0);
        assert!((end - start - 500.0 / 165_130.0).abs() < 1e-15);
        assert!(((end - start) * 1e3 - 3.028).abs() < 1e-3);
    }

    #[test]
    fn simultaneous_arrivals_queue() {
        let mut app = MecApp::new(0, 1000.0);
        let (s1, e1) = app.enqueue_and_serve(&request(0, 100.0), 1.0);
        let (s2, e2) = app.enqueue_and_serve(&request(1, 50.0), 1.0);
        assert_eq!(s2 - 1.0, e1 - s1);
        assert_eq!(s2, e1);
        assert!((e2 - s2 - 0.05).abs() < 1e-15);
        assert_eq!(app.queue_len(), 2);
        app.begin_service(0).unwrap();
        assert!(app.begin_service(7).is_err());
    }

    #[test]
    fn link_validation() {
        let link = LinkModel {
            uplink_capacity_bps: 0.0,
            downlink_capacity_bps: f64::INFINITY,
            base_latency_s: -1.0,
        };
        let mut errors = Vec::new();
        link.collect_errors("link", &mut errors);
        let paths: Vec<_> = errors.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["link.uplink_capacity_bps", "link.base_latency_s"]);
    }
}
