use super::{Behavior, Processor, Requirement, ScenarioError, ServiceSpec};

pub const REMOTE_DRIVING: &str = "remote_driving";
pub const COOPERATIVE_SENSING: &str = "cooperative_sensing";
pub const COOPERATIVE_MANEUVER: &str = "cooperative_maneuver";
pub const COOPERATIVE_AWARENESS: &str = "cooperative_awareness";

/// Response payload shared by all services (bytes).
const DOWNLINK_PAYLOAD_BYTES: u32 = 313;

/// Radio configuration of the reference deployment. Descriptive only; the
/// link model does not consume these values.
pub const RADIO_PARAMETERS: [(&str, &str); 12] = [
    ("Number of gNBs", "1"),
    ("Carrier frequency", "6GHz"),
    ("Bandwidth", "80MHz(100 PRBs)"),
    ("Numerology", "2"),
    ("Fading (Jakes) + shadowing", "enabled"),
    ("gNB Tx power", "46 dBm"),
    ("gNB antenna gain", "8dBi"),
    ("gNB noise figure", "5dB"),
    ("UE antenna gain", "0dBi"),
    ("UE noise figure", "7dB"),
    ("Path loss model", "(3GPP - TR 36.873)"),
    ("Blershift", "5"),
];

struct ServiceRow {
    name: &'static str,
    behavior: Behavior,
    rate_hz: f64,
    payload_mean_bytes: f64,
    ipr_mean_mi: f64,
    radius_max_m: Option<f64>,
    d_req_s: f64,
    r_req: f64,
}

const SERVICES: [ServiceRow; 4] = [
    ServiceRow {
        name: REMOTE_DRIVING,
        behavior: Behavior::ClientServer,
        rate_hz: 100.0,
        payload_mean_bytes: 40_000.0,
        ipr_mean_mi: 500.0,
        radius_max_m: None,
        d_req_s: 0.020,
        r_req: 0.99,
    },
    ServiceRow {
        name: COOPERATIVE_SENSING,
        behavior: Behavior::Dissemination,
        rate_hz: 100.0,
        payload_mean_bytes: 12_500.0,
        ipr_mean_mi: 200.0,
        radius_max_m: Some(200.0),
        d_req_s: 0.010,
        r_req: 0.95,
    },
    ServiceRow {
        name: COOPERATIVE_MANEUVER,
        behavior: Behavior::Dissemination,
        rate_hz: 10.0,
        payload_mean_bytes: 16_250.0,
        ipr_mean_mi: 500.0,
        radius_max_m: Some(500.0),
        d_req_s: 0.100,
        r_req: 0.99,
    },
    ServiceRow {
        name: COOPERATIVE_AWARENESS,
        behavior: Behavior::Dissemination,
        rate_hz: 10.0,
        payload_mean_bytes: 1_500.0,
        ipr_mean_mi: 200.0,
        radius_max_m: Some(500.0),
        d_req_s: 0.100,
        r_req: 0.95,
    },
];

const PROCESSORS: [(&str, &str, f64); 4] = [
    ("id1", "AMD Ryzen Threadripper", 2_356_230.0),
    ("id2", "AMD Ryzen 9", 749_070.0),
    ("id3", "Intel Core i9-9900K", 412_090.0),
    ("id4", "Intel Core i5-11600K", 346_350.0),
];

impl ServiceRow {
    fn to_spec(&self) -> ServiceSpec {
        ServiceSpec {
            name: self.name.to_owned(),
            behavior: self.behavior,
            uplink_rate_hz: self.rate_hz,
            uplink_payload_mean_bytes: self.payload_mean_bytes,
            downlink_payload_bytes: DOWNLINK_PAYLOAD_BYTES,
            ipr_mean_mi: self.ipr_mean_mi,
            dissemination_radius_max_m: self.radius_max_m,
            requirement: Requirement {
                d_req_s: self.d_req_s,
                r_req: self.r_req,
            },
        }
    }
}

/// The four built-in services, in catalog order.
pub fn catalog_services() -> Vec<ServiceSpec> {
    SERVICES.iter().map(ServiceRow::to_spec).collect()
}

/// The four built-in processors, fastest first.
pub fn catalog_processors() -> Vec<Processor> {
    PROCESSORS
        .iter()
        .map(|&(id, name, mips)| Processor::new(id, name, mips))
        .collect()
}

pub fn load_service(name: &str) -> Result<ServiceSpec, ScenarioError> {
    SERVICES
        .iter()
        .find(|row| row.name == name)
        .map(ServiceRow::to_spec)
        .ok_or_else(|| ScenarioError::UnknownService(name.to_owned()))
}

pub fn load_processor(id: &str) -> Result<Processor, ScenarioError> {
    catalog_processors()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| ScenarioError::UnknownProcessor(id.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::BANDWIDTH_TOLERANCE;

    #[test]
    fn remote_driving_row() {
        let s = load_service("remote_driving").unwrap();
        assert_eq!(s.behavior, Behavior::ClientServer);
        assert_eq!(s.uplink_rate_hz, 100.0);
        assert_eq!(s.uplink_payload_mean_bytes, 40_000.0);
        assert_eq!(s.ipr_mean_mi, 500.0);
        assert_eq!(s.downlink_payload_bytes, 313);
        assert_eq!(s.dissemination_radius_max_m, None);
        assert_eq!(
            s.requirement,
            Requirement {
                d_req_s: 0.02,
                r_req: 0.99
            }
        );
    }

    #[test]
    fn awareness_row() {
        let s = load_service("cooperative_awareness").unwrap();
        assert_eq!(s.behavior, Behavior::Dissemination);
        assert_eq!(s.uplink_rate_hz, 10.0);
        assert_eq!(s.uplink_payload_mean_bytes, 1_500.0);
        assert_eq!(s.ipr_mean_mi, 200.0);
        assert_eq!(s.dissemination_radius_max_m, Some(500.0));
        assert_eq!(
            s.requirement,
            Requirement {
                d_req_s: 0.1,
                r_req: 0.95
            }
        );
    }

    #[test]
    fn unknown_service() {
        assert!(matches!(
            load_service("unknown_service"),
            Err(ScenarioError::UnknownService(n)) if n == "unknown_service"
        ));
        assert!(matches!(
            load_processor("id9"),
            Err(ScenarioError::UnknownProcessor(_))
        ));
    }

    #[test]
    fn catalog_is_complete_and_valid() {
        let services = catalog_services();
        assert_eq!(services.len(), 4);
        for s in &services {
            s.validate().unwrap();
        }
        let procs = catalog_processors();
        assert_eq!(procs.len(), 4);
        let mips: Vec<f64> = procs.iter().map(|p| p.mips).collect();
        assert_eq!(mips, [2_356_230.0, 749_070.0, 412_090.0, 346_350.0]);
    }

    #[test]
    fn uplink_bandwidth_matches_table() {
        let tabulated_mbps = [32.0, 10.0, 1.3, 0.12];
        for (s, mbps) in catalog_services().iter().zip(tabulated_mbps) {
            let derived = s.uplink_bandwidth_bps() / 1e6;
            assert!(
                ((derived - mbps) / mbps).abs() <= BANDWIDTH_TOLERANCE,
                "{}: {derived} Mb/s vs {mbps}",
                s.name
            );
        }
    }
}
