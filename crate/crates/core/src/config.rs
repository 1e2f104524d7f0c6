//! Scenario configuration: JSON parsing, defaults, range validation and
//! `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::Placement;
use crate::radio::{PatternParams, RadioModel};
use crate::{Result, SimError};

/// How a panel chosen by several UEs is shared between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelSharing {
    /// The panel serves only its best proposer; the others fall back to the
    /// direct link.
    Exclusive,
    /// Every proposer is served in its own time slot with the panel steered
    /// toward it. Interference from the panel uses the configuration of its
    /// best proposer.
    TimeShared,
}

/// Every tunable of a simulated drop. Missing JSON keys take the defaults
/// below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_ghz: f64,
    pub isd_m: f64,
    /// Rings of sites around the centre site (0 or 1; 2 is accepted but slow).
    pub rings: u32,
    pub panels_per_sector: usize,
    /// Elements per side of a square panel.
    pub panel_grid: usize,
    pub panel_placement: Placement,
    pub ue_per_sector: usize,
    pub ue_placement: Placement,
    pub tx_power_dbm: f64,
    pub phase_bits: u32,
    pub failure_rate: f64,
    /// A UE pairs with a panel when `cascaded_db >= direct_db + threshold`.
    pub pairing_threshold_db: f64,
    pub cross_ris_interference: bool,
    pub shadowing: bool,
    pub near_field_exact: bool,
    pub codebook_mode: bool,
    pub panel_sharing: PanelSharing,
    pub noise_bandwidth_mhz: f64,
    pub noise_figure_db: f64,
    pub heatmap_step_m: f64,
    /// Peak gain of each half of the split element response.
    pub element_peak_gain_dbi: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.6,
            isd_m: 500.0,
            rings: 1,
            panels_per_sector: 4,
            panel_grid: 16,
            panel_placement: Placement::CellEdge,
            ue_per_sector: 50,
            ue_placement: Placement::Uniform,
            tx_power_dbm: 46.0,
            phase_bits: 2,
            failure_rate: 0.0,
            pairing_threshold_db: 3.0,
            cross_ris_interference: true,
            shadowing: true,
            near_field_exact: true,
            codebook_mode: false,
            panel_sharing: PanelSharing::TimeShared,
            noise_bandwidth_mhz: 20.0,
            noise_figure_db: 9.0,
            heatmap_step_m: 5.0,
            element_peak_gain_dbi: 5.0,
            seed: 1,
        }
    }
}

fn check_f64(field: &'static str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(SimError::Range {
            field,
            value: v.to_string(),
            bound: format!("[{lo}, {hi}]"),
        })
    }
}

fn check_int(field: &'static str, v: u64, lo: u64, hi: u64) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(SimError::Range {
            field,
            value: v.to_string(),
            bound: format!("[{lo}, {hi}]"),
        })
    }
}

impl ScenarioConfig {
    /// Checks every numeric field against its allowed range.
    pub fn validate(&self) -> Result<()> {
        check_f64("carrier_ghz", self.carrier_ghz, 0.5, 100.0)?;
        check_f64("isd_m", self.isd_m, 100.0, 5000.0)?;
        check_int("rings", self.rings.into(), 0, 2)?;
        check_int("panels_per_sector", self.panels_per_sector as u64, 0, 64)?;
        check_int("panel_grid", self.panel_grid as u64, 1, 128)?;
        check_int("ue_per_sector", self.ue_per_sector as u64, 1, 1000)?;
        check_f64("tx_power_dbm", self.tx_power_dbm, -30.0, 80.0)?;
        check_int("phase_bits", self.phase_bits.into(), 1, 8)?;
        check_f64("failure_rate", self.failure_rate, 0.0, 1.0)?;
        check_f64("pairing_threshold_db", self.pairing_threshold_db, -60.0, 60.0)?;
        check_f64("noise_bandwidth_mhz", self.noise_bandwidth_mhz, 0.001, 1000.0)?;
        check_f64("noise_figure_db", self.noise_figure_db, 0.0, 30.0)?;
        check_f64("heatmap_step_m", self.heatmap_step_m, 0.5, 100.0)?;
        check_f64("element_peak_gain_dbi", self.element_peak_gain_dbi, -20.0, 30.0)?;
        Ok(())
    }

    /// Thermal noise power over the configured bandwidth plus noise figure.
    pub fn noise_dbm(&self) -> f64 {
        -174.0 + 10.0 * (self.noise_bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }

    pub fn radio_model(&self) -> RadioModel {
        RadioModel {
            fc_ghz: self.carrier_ghz,
            ris_pattern: PatternParams::ris_element(self.element_peak_gain_dbi),
            shadowing: self.shadowing,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Returns a copy with `key` set to `value`, re-validated.
    pub fn with_override(&self, key: &str, value: &Value) -> Result<Self> {
        let mut obj = serde_json::to_value(self).expect("config serializes");
        let map = obj.as_object_mut().expect("config is an object");
        if !map.contains_key(key) {
            return Err(SimError::Config(format!("unknown config key `{key}`")));
        }
        map.insert(key.to_string(), value.clone());
        let cfg: ScenarioConfig =
            serde_json::from_value(obj).map_err(|e| SimError::Config(format!("bad value for `{key}`: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SimError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Interprets one override value: JSON when it parses, a bare string otherwise.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()))
}

/// Splits `key=v1,v2,...` into the key and its candidate values.
pub fn parse_override(arg: &str) -> Result<(String, Vec<Value>)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| SimError::Config(format!("override `{arg}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(SimError::Config(format!("override `{arg}` has an empty key")));
    }
    let values: Vec<Value> = raw.split(',').map(parse_value).collect();
    Ok((key.to_string(), values))
}
