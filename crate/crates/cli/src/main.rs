use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mecplan::analytic::cpu_min_display;
use mecplan::harness::run_experiment_with;
use mecplan::simnet::SimOptions;
use mecplan::{
    catalog_processors, emit_outputs, load_processor, load_service, plan, run_sweep, Processor,
    StudyConfig,
};

#[derive(Parser)]
#[command(
    name = "mecplan",
    version,
    about = "Edge CPU capacity planning for connected-vehicle services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum CPU per MecApp and the largest feasible fleet per processor.
    Plan {
        #[arg(long)]
        service: String,
        /// Catalog ids (`id1`) or raw MIPS values; defaults to the catalog.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        processors: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Simulate every processor and vehicle count of a config for one seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full grid and write CSV outputs.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Plan {
            service,
            processors,
            format,
        } => cmd_plan(&service, &processors, format),
        Command::Run { config, seed } => cmd_run(&config, seed),
        Command::Sweep { config, out, jobs } => cmd_sweep(&config, &out, jobs),
    }
}

fn parse_processor(arg: &str) -> Result<Processor> {
    if let Ok(p) = load_processor(arg) {
        return Ok(p);
    }
    match arg.parse::<f64>() {
        Ok(mips) if mips > 0.0 && mips.is_finite() => Ok(Processor::new(arg, "", mips)),
        _ => bail!("`{arg}` is neither a catalog processor id nor a positive MIPS value"),
    }
}

fn cmd_plan(service: &str, processors: &[String], format: Format) -> Result<()> {
    let spec = load_service(service)?;
    let procs = if processors.is_empty() {
        catalog_processors()
    } else {
        processors
            .iter()
            .map(|p| parse_processor(p))
            .collect::<Result<_>>()?
    };
    let result = plan(&spec, &procs);
    match format {
        Format::Text => {
            println!("service      {}", result.service);
            println!(
                "cpu_min      {} MIPS ({:.2})",
                cpu_min_display(&spec),
                result.cpu_min_mips
            );
            println!("mu_min       {:.4} /s", result.mu_min_hz);
            println!("{:<10} {:>12} {:>12}", "processor", "mips", "max_vehicles");
            for row in &result.rows {
                println!(
                    "{:<10} {:>12} {:>12}",
                    row.processor.id, row.processor.mips, row.max_vehicles
                );
            }
        }
        Format::Csv => {
            println!("service,cpu_min_mips,mu_min_hz,processor,processor_mips,max_vehicles");
            for row in &result.rows {
                println!(
                    "{},{},{},{},{},{}",
                    result.service,
                    result.cpu_min_mips,
                    result.mu_min_hz,
                    row.processor.id,
                    row.processor.mips,
                    row.max_vehicles
                );
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>, scale: f64, digits: usize) -> String {
    v.map_or_else(
        || "no data".to_owned(),
        |x| format!("{:.*}", digits, x * scale),
    )
}

fn cmd_run(path: &Path, seed: Option<u64>) -> Result<()> {
    let study = StudyConfig::from_file(path)?;
    let seed = seed.unwrap_or(study.seeds[0]);
    let r_req = study.service.requirement.r_req;
    println!("service {} seed {seed} r_req {r_req}", study.service.name);
    println!(
        "{:<10} {:>12} {:>6} {:>11} {:>10} {:>10} {:>6}",
        "processor", "mips", "n", "reliability", "mean_ms", "p99_ms", "meets"
    );
    for proc in &study.processors {
        for &n in &study.vehicle_counts {
            let cfg = study.experiment(proc, n, seed);
            let res = run_experiment_with(&cfg, SimOptions::default())
                .with_context(|| format!("run {} with {n} vehicles", proc.id))?;
            let meets = if !res.stable {
                "unstable"
            } else if res.meets(r_req) {
                "yes"
            } else {
                "no"
            };
            println!(
                "{:<10} {:>12} {:>6} {:>11} {:>10} {:>10} {:>6}",
                proc.id,
                proc.mips,
                n,
                fmt_opt(res.reliability, 1.0, 5),
                fmt_opt(res.mean_e2e_s, 1e3, 3),
                fmt_opt(res.p99_e2e_s, 1e3, 3),
                meets
            );
        }
    }
    Ok(())
}

fn cmd_sweep(path: &Path, out: &Path, jobs: usize) -> Result<()> {
    let study = StudyConfig::from_file(path)?;
    let result = run_sweep(&study, jobs)?;
    for cell in &result.cells {
        for run in cell.runs.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "warning: {} n={} seed {}: {}",
                cell.processor.id,
                cell.n_vehicles,
                run.seed,
                run.error.as_deref().unwrap_or_default()
            );
        }
    }
    let files = emit_outputs(&result, out)?;

    print!("{:>12}", "mips \\ n");
    for n in &study.vehicle_counts {
        print!("{n:>6}");
    }
    println!("{:>8}", "red");
    for (proc, red) in study.processors.iter().zip(&result.red_line) {
        print!("{:>12}", proc.mips);
        for cell in result.row(&proc.id) {
            print!("{:>6}", cell.success_rate_pct);
        }
        println!("{:>8}", red.max_vehicles);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
