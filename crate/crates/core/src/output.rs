//! Result files: per-UE records, CDF tables, heat map, placements, beam
//! patterns and the JSON summary.
//!
//! Floats are written with the shortest representation that round-trips, so
//! a fixed (config, seed) always produces the same bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::engine::{DropResult, HeatPoint};
use crate::geometry::NodePlacement;
use crate::radio::lin_to_db;
use crate::ris::BeamPattern;
use crate::stats::cdf;
use crate::{Result, SimError};

pub const UE_HEADER: [&str; 10] = [
    "ue_id",
    "sector",
    "panel_id",
    "x_m",
    "y_m",
    "direct_db",
    "cascaded_db",
    "rsrp_dbm",
    "sinr_db",
    "ris_dist_m",
];
pub const CDF_HEADER: [&str; 2] = ["value", "percentile"];
pub const HEATMAP_HEADER: [&str; 3] = ["x_m", "y_m", "gain_db"];
pub const PLACEMENT_HEADER: [&str; 8] = ["kind", "id", "sector", "x_m", "y_m", "z_m", "azimuth_deg", "tilt_deg"];
pub const PATTERN_HEADER: [&str; 2] = ["angle_deg", "power_db"];

/// Percentiles reported in the summary.
pub const SUMMARY_PERCENTILES: [f64; 3] = [5.0, 50.0, 95.0];

fn csv_err(e: csv::Error) -> SimError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => SimError::Io(e),
        other => SimError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<String>) -> String {
    x.unwrap_or_default()
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `ue.csv`: one row per UE. `panel_id`, `cascaded_db` and `ris_dist_m`
/// are empty for UEs without a serving panel.
pub fn write_ue_csv<W: Write>(out: W, result: &DropResult) -> Result<()> {
    write_rows(
        out,
        &UE_HEADER,
        result.ues.iter().map(|u| {
            let paired = u.panel_id.is_some();
            vec![
                u.ue_id.to_string(),
                u.sector.to_string(),
                opt(u.panel_id.map(|p| p.to_string())),
                num(u.position.x),
                num(u.position.y),
                num(lin_to_db(u.direct)),
                opt(paired.then(|| num(lin_to_db(u.cascaded)))),
                num(u.rsrp_dbm),
                num(u.sinr_db),
                opt(u.ris_distance_m.map(num)),
            ]
        }),
    )
}

/// CDF table: sorted values with their percentile (0–100, k/n·100 for the
/// k-th of n samples).
pub fn write_cdf_csv<W: Write>(out: W, samples: &[f64]) -> Result<()> {
    let c = cdf(samples)?;
    write_rows(
        out,
        &CDF_HEADER,
        c.points.iter().map(|&(x, p)| vec![num(x), num(100.0 * p)]),
    )
}

pub fn write_heatmap_csv<W: Write>(out: W, points: &[HeatPoint]) -> Result<()> {
    write_rows(
        out,
        &HEATMAP_HEADER,
        points.iter().map(|p| vec![num(p.x_m), num(p.y_m), num(p.gain_db)]),
    )
}

pub fn write_placements_csv<'a, W: Write>(out: W, nodes: impl IntoIterator<Item = &'a NodePlacement>) -> Result<()> {
    write_rows(
        out,
        &PLACEMENT_HEADER,
        nodes.into_iter().map(|n| {
            vec![
                n.kind.as_str().to_string(),
                n.id.to_string(),
                n.sector.to_string(),
                num(n.position.x),
                num(n.position.y),
                num(n.position.z),
                num(n.azimuth_deg),
                num(n.tilt_deg),
            ]
        }),
    )
}

/// Beam-pattern cut normalized to its peak.
pub fn write_pattern_csv<W: Write>(out: W, pattern: &BeamPattern) -> Result<()> {
    write_rows(
        out,
        &PATTERN_HEADER,
        pattern
            .angles_deg
            .iter()
            .zip(&pattern.power_db)
            .map(|(&a, &p)| vec![num(a), num(p)]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub percentile: f64,
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    pub baseline_rsrp_dbm: f64,
    pub baseline_sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub noise_dbm: f64,
    pub num_ues: usize,
    pub num_panels: usize,
    pub num_paired: usize,
    pub quantiles: Vec<QuantileRow>,
}

impl Summary {
    pub fn new(result: &DropResult) -> Result<Self> {
        let rsrp = cdf(&result.rsrp())?;
        let sinr = cdf(&result.sinr())?;
        let base_rsrp = cdf(&result.ues.iter().map(|u| u.baseline_rsrp_dbm).collect::<Vec<_>>())?;
        let base_sinr = cdf(&result.baseline_sinr())?;
        let quantiles = SUMMARY_PERCENTILES
            .iter()
            .map(|&p| QuantileRow {
                percentile: p,
                rsrp_dbm: rsrp.quantile(p / 100.0),
                sinr_db: sinr.quantile(p / 100.0),
                baseline_rsrp_dbm: base_rsrp.quantile(p / 100.0),
                baseline_sinr_db: base_sinr.quantile(p / 100.0),
            })
            .collect();
        Ok(Self {
            config: result.config.clone(),
            seed: result.seed,
            noise_dbm: result.noise_dbm,
            num_ues: result.ues.len(),
            num_panels: result.panels.len(),
            num_paired: result.ues.iter().filter(|u| u.panel_id.is_some()).count(),
            quantiles,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<fs::File> {
    let path = dir.join(name);
    let f = fs::File::create(&path)?;
    written.push(path);
    Ok(f)
}

/// Writes `summary.json`, `ue.csv`, `cdf_rsrp.csv` and `cdf_sinr.csv` into
/// `dir` (created if missing), plus `placements.csv` when asked. Returns the
/// written paths.
pub fn write_drop_outputs(dir: &Path, result: &DropResult, placements: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = Summary::new(result)?;
    create(dir, "summary.json", &mut written)?.write_all(summary.to_json_pretty().as_bytes())?;
    write_ue_csv(create(dir, "ue.csv", &mut written)?, result)?;
    write_cdf_csv(create(dir, "cdf_rsrp.csv", &mut written)?, &result.rsrp())?;
    write_cdf_csv(create(dir, "cdf_sinr.csv", &mut written)?, &result.sinr())?;
    if placements {
        write_placements_csv(create(dir, "placements.csv", &mut written)?, result.placements())?;
    }
    Ok(written)
}
