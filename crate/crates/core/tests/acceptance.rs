//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use mecplan::analytic::{cpu_min_display, mm1_reliability, required_service_rate, Mm1Params};
use mecplan::engine::{Purpose, RngStream, StreamKey};
use mecplan::harness::{run_experiment, run_experiment_with, ExperimentConfig};
use mecplan::simnet::SimOptions;
use mecplan::stats::ks_test;
use mecplan::{
    catalog_processors, catalog_services, emit_outputs, feasible_vehicle_count, load_service,
    run_sweep, LinkModel, Processor, Requirement, StudyConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 0.01;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Catalog order: remote driving, sensing, maneuver, awareness.
fn criterion_1() -> Outcome {
    let expected = [165_130u64, 79_915, 28_026, 7_992];
    let mut got = Vec::new();
    for (spec, want) in catalog_services().iter().zip(expected) {
        let v = cpu_min_display(spec);
        ensure(
            v.abs_diff(want) <= 1,
            format!("{}: {v} vs {want}", spec.name),
        )?;
        got.push(format!("{}={v}", spec.name));
    }
    Ok(got.join(" "))
}

fn criterion_2() -> Outcome {
    let expected: [(&str, [u64; 4]); 4] = [
        ("remote_driving", [14, 4, 2, 2]),
        ("cooperative_maneuver", [84, 26, 14, 12]),
        ("cooperative_sensing", [29, 9, 5, 4]),
        ("cooperative_awareness", [294, 93, 51, 43]),
    ];
    let procs = catalog_processors();
    for (name, want) in expected {
        let spec = load_service(name).unwrap();
        let got: Vec<u64> = procs
            .iter()
            .map(|p| feasible_vehicle_count(p, &spec))
            .collect();
        ensure(got == want, format!("{name}: {got:?} vs {want:?}"))?;
    }
    Ok("all four services exact on id1..id4".into())
}

fn criterion_3() -> Outcome {
    let mut notes = Vec::new();
    for spec in catalog_services() {
        let start = Instant::now();
        let alloc = mecplan::cpu_min(&spec);
        let mut cfg = ExperimentConfig::new(spec.clone(), Processor::new("p", "", alloc), 1, 1);
        cfg.link = LinkModel::ideal();
        cfg.duration_s = 600.0;
        let res = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();

        let rate = alloc / spec.ipr_mean_mi - spec.uplink_rate_hz;
        let sojourn: Vec<f64> = res
            .delay_records
            .iter()
            .map(|r| r.mec_sojourn_s())
            .collect();
        let ks = ks_test(&sojourn, |t| {
            if t <= 0.0 {
                0.0
            } else {
                1.0 - (-rate * t).exp()
            }
        })
        .ok_or("no samples")?;
        let r = res.reliability.ok_or("no data")?;
        let r_req = spec.requirement.r_req;
        ensure(
            ks.passes(ALPHA),
            format!(
                "{}: KS D={:.5} p={:.4} n={}",
                spec.name, ks.statistic, ks.p_value, ks.n
            ),
        )?;
        ensure(
            (r - r_req).abs() <= 0.01,
            format!("{}: reliability {r:.4} vs {r_req}", spec.name),
        )?;
        ensure(
            elapsed < Duration::from_secs(10),
            format!("{}: took {elapsed:?}", spec.name),
        )?;
        notes.push(format!(
            "{} p={:.3} R={r:.4} {:.2}s",
            spec.name,
            ks.p_value,
            elapsed.as_secs_f64()
        ));
    }
    Ok(notes.join("; "))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let lambda = rng.random_range(0.0..1000.0);
        let req = Requirement {
            d_req_s: rng.random_range(1e-3..1.0),
            r_req: rng.random_range(0.5..0.99999),
        };
        let mu = required_service_rate(lambda, req);
        let r = mm1_reliability(Mm1Params::new(lambda, mu), req.d_req_s).value();
        let rel = ((r - req.r_req) / req.r_req).abs();
        worst = worst.max(rel);
        ensure(rel <= 1e-12, format!("lambda={lambda} {req:?}: {r}"))?;
    }
    Ok(format!("1000 triples, worst relative error {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let mut study =
        StudyConfig::for_service(load_service("cooperative_sensing").unwrap(), vec![1, 4, 7]);
    study.seeds = vec![1, 2];
    study.duration_s = 30.0;
    study.warmup_s = 5.0;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, jobs) in dirs.iter().zip([1, 0]) {
        let res = run_sweep(&study, jobs).map_err(|e| e.to_string())?;
        emit_outputs(&res, dir.path()).map_err(|e| e.to_string())?;
    }
    for file in ["cells.csv", "heatmap.csv"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        ensure(a == b, format!("{file} differs"))?;
    }
    Ok("cells.csv and heatmap.csv byte-identical across runs and worker counts".into())
}

fn grid_axis(name: &str) -> Vec<usize> {
    match name {
        "cooperative_maneuver" => vec![1, 10, 20, 30, 40, 50, 60],
        "cooperative_awareness" => vec![1, 20, 40, 60, 80, 100, 120],
        _ => (1..=7).collect(),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for spec in catalog_services() {
        let study = StudyConfig::for_service(spec.clone(), grid_axis(&spec.name));
        let res = run_sweep(&study, 0).map_err(|e| e.to_string())?;
        let mut passing = Vec::new();
        for proc in &study.processors {
            let row: Vec<_> = res.row(&proc.id).collect();
            for c in &row {
                ensure(
                    c.stable || c.success_rate_pct == 0.0,
                    format!(
                        "{} {} n={}: overloaded cell at {}%",
                        spec.name, proc.id, c.n_vehicles, c.success_rate_pct
                    ),
                )?;
                ensure(
                    c.runs.iter().all(|r| r.error.is_none()),
                    format!("{} {} n={}: run error", spec.name, proc.id, c.n_vehicles),
                )?;
            }
            let means: Vec<f64> = row
                .iter()
                .map(|c| c.mean_reliability().unwrap_or(0.0))
                .collect();
            let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
            ensure(
                inversions <= 1,
                format!(
                    "{} {}: {inversions} inversions in {means:?}",
                    spec.name, proc.id
                ),
            )?;
            passing.push(row.iter().filter(|c| c.success_rate_pct > 50.0).count());
        }
        let (fast, slow) = (passing[0], *passing.last().unwrap());
        ensure(
            fast >= slow,
            format!("{}: fastest passes {fast} cells, slowest {slow}", spec.name),
        )?;
        notes.push(format!("{} passing {passing:?}", spec.name));
    }
    notes.push(format!("{:.1}s", start.elapsed().as_secs_f64()));
    Ok(notes.join("; "))
}

fn criterion_7() -> Outcome {
    let runs = [
        ("remote_driving", "id3", 2, 1u64),
        ("remote_driving", "id4", 5, 2),
        ("cooperative_sensing", "id1", 20, 3),
        ("cooperative_maneuver", "id2", 40, 4),
        ("cooperative_awareness", "id4", 50, 5),
    ];
    let (mut records, mut requests) = (0usize, 0usize);
    for (service, proc_id, n, seed) in runs {
        let spec = load_service(service).unwrap();
        let proc = mecplan::load_processor(proc_id).unwrap();
        let cfg = ExperimentConfig::new(spec, proc, n, seed);
        let options = SimOptions {
            keep_records: true,
            record_dispatches: true,
        };
        let res = run_experiment_with(&cfg, options).map_err(|e| e.to_string())?;
        for r in &res.delay_records {
            ensure(
                r.e2e_s == r.uplink_s + r.mec_queue_s + r.mec_processing_s + r.downlink_s,
                format!(
                    "{service}: component sum broken for request {}",
                    r.request_id
                ),
            )?;
        }
        records += res.delay_records.len();

        let mut delivered: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &res.delay_records {
            *delivered.entry(r.request_id).or_default() += 1;
        }
        let mut fleet = cfg
            .mobility
            .instantiate(n, seed, 0)
            .map_err(|e| e.to_string())?;
        fleet
            .extend_to(cfg.duration_s + 10.0)
            .map_err(|e| e.to_string())?;
        let mut missing = 0u64;
        for d in res.output.dispatches.iter().filter(|d| d.judged) {
            let expected = match d.radius_m {
                Some(radius) => {
                    let c = fleet.position_at(d.source_vehicle, d.time).unwrap();
                    1 + (0..n)
                        .filter(|&v| v != d.source_vehicle)
                        .filter(|&v| {
                            let p = fleet.position_at(v, d.time).unwrap();
                            (p.x - c.x).hypot(p.y - c.y) <= radius
                        })
                        .count()
                }
                None => 1,
            };
            ensure(
                d.recipients.len() == expected,
                format!(
                    "{service}: request {} addressed {} vs {expected}",
                    d.request_id,
                    d.recipients.len()
                ),
            )?;
            let k = delivered.remove(&d.request_id).unwrap_or(0);
            ensure(
                k <= expected,
                format!("{service}: request {} over-delivered", d.request_id),
            )?;
            missing += (expected - k) as u64;
            requests += 1;
        }
        ensure(
            delivered.is_empty(),
            format!("{service}: records for undispatched requests"),
        )?;
        // the remainder are judged requests still queued at the horizon, one missing copy each
        let undispatched = res.output.inflight_failures.checked_sub(missing);
        ensure(
            undispatched.is_some(),
            format!(
                "{service}: {missing} undelivered copies vs {} reported",
                res.output.inflight_failures
            ),
        )?;
    }
    Ok(format!(
        "{records} records, {requests} judged requests checked"
    ))
}

fn criterion_8() -> Outcome {
    const N: usize = 1_000_000;
    let key = |p| StreamKey::new(0, 0, p);
    let check_mean = |label: &str, xs: &[f64], mean: f64, sd: f64| -> Result<(), String> {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = sd / (xs.len() as f64).sqrt();
        ensure(
            (m - mean).abs() <= 3.0 * se,
            format!("{label}: mean {m} vs {mean} (3 se = {})", 3.0 * se),
        )
    };

    let mut s = RngStream::new(8, key(Purpose::Instructions));
    let exp: Vec<f64> = (0..N).map(|_| s.sample_exp(500.0).unwrap()).collect();
    check_mean("exponential", &exp, 500.0, 500.0)?;

    let mut s = RngStream::new(8, key(Purpose::DisseminationRadius));
    let uni: Vec<f64> = (0..N)
        .map(|_| s.sample_uniform(0.0, 500.0).unwrap())
        .collect();
    check_mean("uniform", &uni, 250.0, 500.0 / 12f64.sqrt())?;

    let mut s = RngStream::new(8, key(Purpose::Interarrival));
    let gaps: Vec<f64> = (0..N)
        .map(|_| s.sample_poisson_interarrival(100.0).unwrap())
        .collect();
    check_mean("poisson interarrival", &gaps, 0.01, 0.01)?;
    // counts per 1 s window of the same process: mean and variance equal the rate
    let mut counts = vec![0.0; (gaps.iter().sum::<f64>()) as usize];
    let mut t = 0.0;
    for g in &gaps {
        t += g;
        if let Some(c) = counts.get_mut(t as usize) {
            *c += 1.0;
        }
    }
    check_mean("poisson count", &counts, 100.0, 10.0)?;

    let ks_exp = ks_test(&exp[..100_000], |x| 1.0 - (-x / 500.0).exp()).unwrap();
    let ks_uni = ks_test(&uni[..100_000], |x| x / 500.0).unwrap();
    ensure(
        ks_exp.passes(ALPHA),
        format!("exponential KS p={}", ks_exp.p_value),
    )?;
    ensure(
        ks_uni.passes(ALPHA),
        format!("uniform KS p={}", ks_uni.p_value),
    )?;
    Ok(format!(
        "means within 3 se; KS p exp={:.3} uni={:.3}",
        ks_exp.p_value, ks_uni.p_value
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("cpu_min reproduction", criterion_1),
        ("red-line reproduction", criterion_2),
        ("M/M/1 oracle equivalence", criterion_3),
        ("inverse identity", criterion_4),
        ("sweep determinism", criterion_5),
        ("qualitative grid trends", criterion_6),
        ("delay conservation and dissemination counts", criterion_7),
        ("sampler statistics", criterion_8),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        ran += 1;
        match run() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
