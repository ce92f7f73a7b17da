use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, SweepResult};
use crate::scenario::RADIO_PARAMETERS;

pub const CELLS_FILE: &str = "cells.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const REDLINE_FILE: &str = "redline.csv";
pub const METADATA_FILE: &str = "run.toml";
pub const GNUPLOT_FILE: &str = "heatmap.gp";

/// One row of `cells.csv`: a single seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub service: String,
    pub processor_mips: f64,
    pub n_vehicles: usize,
    pub seed: u64,
    pub reliability: Option<f64>,
    pub mean_e2e_ms: Option<f64>,
    pub p99_e2e_ms: Option<f64>,
}

/// One row of `heatmap.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub processor_mips: f64,
    pub n_vehicles: usize,
    pub success_rate_pct: f64,
}

/// One row of `redline.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedlineRow {
    pub processor_mips: f64,
    pub max_vehicles: u64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    cpu_min_mips: f64,
    config: &'a crate::scenario::StudyConfig,
    red_line: Vec<RedlineRow>,
    radio_parameters: Vec<[&'static str; 2]>,
}

impl SweepResult {
    pub fn cell_rows(&self) -> Vec<CellRow> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.runs.iter().map(|r| CellRow {
                    service: self.config.service.name.clone(),
                    processor_mips: c.processor.mips,
                    n_vehicles: c.n_vehicles,
                    seed: r.seed,
                    reliability: r.reliability,
                    mean_e2e_ms: r.mean_e2e_ms,
                    p99_e2e_ms: r.p99_e2e_ms,
                })
            })
            .collect()
    }

    pub fn heatmap_rows(&self) -> Vec<HeatmapRow> {
        self.cells
            .iter()
            .map(|c| HeatmapRow {
                processor_mips: c.processor.mips,
                n_vehicles: c.n_vehicles,
                success_rate_pct: c.success_rate_pct,
            })
            .collect()
    }

    pub fn redline_rows(&self) -> Vec<RedlineRow> {
        self.red_line
            .iter()
            .map(|r| RedlineRow {
                processor_mips: r.processor.mips,
                max_vehicles: r.max_vehicles,
            })
            .collect()
    }
}

/// Writes `cells.csv`, `heatmap.csv`, `redline.csv`, `run.toml` and
/// `heatmap.gp` into `dir`, creating it if needed.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut written = Vec::new();

    let path = dir.join(CELLS_FILE);
    write_csv(&path, &result.cell_rows())?;
    written.push(path);

    let path = dir.join(HEATMAP_FILE);
    write_csv(&path, &result.heatmap_rows())?;
    written.push(path);

    let path = dir.join(REDLINE_FILE);
    write_csv(&path, &result.redline_rows())?;
    written.push(path);

    let metadata = Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        cpu_min_mips: result.cpu_min_mips,
        config: &result.config,
        red_line: result.redline_rows(),
        radio_parameters: RADIO_PARAMETERS.iter().map(|&(k, v)| [k, v]).collect(),
    };
    let text = toml::to_string_pretty(&metadata).map_err(|e| HarnessError::Io {
        path: dir.join(METADATA_FILE),
        source: std::io::Error::other(e),
    })?;
    let path = dir.join(METADATA_FILE);
    write_file(&path, text.as_bytes())?;
    written.push(path);

    let path = dir.join(GNUPLOT_FILE);
    write_file(&path, gnuplot_script(result).as_bytes())?;
    written.push(path);

    Ok(written)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let io_err = |e: csv::Error| HarnessError::Io {
        path: path.to_owned(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_csv<T: for<'de> Deserialize<'de>>(
    path: &Path,
    header: &[&str],
) -> Result<Vec<T>, HarnessError> {
    let read_err = |message: String| HarnessError::Read {
        path: path.to_owned(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| read_err(e.to_string()))?;
    let found = r.headers().map_err(|e| read_err(e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(read_err(format!(
            "unexpected header `{}`",
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| read_err(e.to_string())))
        .collect()
}

pub fn read_cells_csv(path: &Path) -> Result<Vec<CellRow>, HarnessError> {
    read_csv(
        path,
        &[
            "service",
            "processor_mips",
            "n_vehicles",
            "seed",
            "reliability",
            "mean_e2e_ms",
            "p99_e2e_ms",
        ],
    )
}

pub fn read_heatmap_csv(path: &Path) -> Result<Vec<HeatmapRow>, HarnessError> {
    read_csv(path, &["processor_mips", "n_vehicles", "success_rate_pct"])
}

pub fn read_redline_csv(path: &Path) -> Result<Vec<RedlineRow>, HarnessError> {
    read_csv(path, &["processor_mips", "max_vehicles"])
}

fn gnuplot_script(result: &SweepResult) -> String {
    let procs = &result.config.processors;
    let counts = &result.config.vehicle_counts;
    let mut s = String::new();
    s.push_str("# Success-rate heatmap; run with `gnuplot heatmap.gp` next to heatmap.csv.\n");
    s.push_str("set datafile separator ','\nset terminal pngcairo size 800,500\nset output 'heatmap.png'\n");
    s.push_str(&format!(
        "set title 'Success rate (%) - {}'\n",
        result.config.service.name
    ));
    s.push_str("set xlabel 'Vehicles'\nset ylabel 'MIPS'\nset cbrange [0:100]\nset palette gray negative\n");
    let xt: Vec<String> = counts
        .iter()
        .enumerate()
        .map(|(i, n)| format!("'{n}' {i}"))
        .collect();
    let yt: Vec<String> = procs
        .iter()
        .enumerate()
        .map(|(i, p)| format!("'{}' {i}", p.mips))
        .collect();
    s.push_str(&format!(
        "set xtics ({})\nset ytics ({})\n",
        xt.join(", "),
        yt.join(", ")
    ));
    s.push_str("xi(n) = ");
    for (i, n) in counts.iter().enumerate() {
        s.push_str(&format!("n == {n} ? {i} : "));
    }
    s.push_str("NaN\nyi(m) = ");
    for (i, p) in procs.iter().enumerate() {
        s.push_str(&format!("m == {} ? {i} : ", p.mips));
    }
    s.push_str("NaN\n");
    s.push_str("plot 'heatmap.csv' skip 1 using (xi($2)):(yi($1)):3 with image notitle, \\\n");
    s.push_str("     '' skip 1 using (xi($2)):(yi($1)):(sprintf('%d', $3)) with labels notitle\n");
    s
}
