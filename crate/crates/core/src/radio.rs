//! Large-scale channel primitives: antenna patterns, Urban-Macro LOS
//! probability and pathloss, log-normal shadowing and per-link power gains.
//!
//! Coefficients follow the 3GPP TR 38.901 UMa tables. Angles are degrees,
//! distances metres, carrier frequency GHz.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Frame, Layout, NodeKind, NodePlacement};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BS_ELECTRICAL_TILT_DEG: f64 = 4.0;
pub const SHADOW_SIGMA_LOS_DB: f64 = 4.0;
pub const SHADOW_SIGMA_NLOS_DB: f64 = 6.0;
/// Effective environment height for the UMa breakpoint distance.
const UMA_ENV_HEIGHT_M: f64 = 1.0;

pub fn wavelength_m(fc_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (fc_ghz * 1e9)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Parametric single-element pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternParams {
    pub peak_dbi: f64,
    pub hpbw_h_deg: f64,
    pub hpbw_v_deg: f64,
    /// Front-back attenuation limit.
    pub a_max_db: f64,
    /// Vertical sidelobe limit.
    pub sla_v_db: f64,
}

impl PatternParams {
    /// Effective sector beam of the BS array.
    pub const BS_SECTOR: PatternParams = PatternParams {
        peak_dbi: 17.0,
        hpbw_h_deg: 65.0,
        hpbw_v_deg: 10.0,
        a_max_db: 30.0,
        sla_v_db: 30.0,
    };

    /// One split component of the RIS element response.
    pub const fn ris_element(peak_dbi: f64) -> PatternParams {
        PatternParams {
            peak_dbi,
            hpbw_h_deg: 65.0,
            hpbw_v_deg: 65.0,
            a_max_db: 30.0,
            sla_v_db: 30.0,
        }
    }
}

/// Gain in dBi at the given offsets from boresight.
pub fn element_pattern(az_offset_deg: f64, el_offset_deg: f64, p: &PatternParams) -> f64 {
    let vertical = (12.0 * (el_offset_deg / p.hpbw_v_deg).powi(2)).min(p.sla_v_db);
    let horizontal = (12.0 * (az_offset_deg / p.hpbw_h_deg).powi(2)).min(p.a_max_db);
    p.peak_dbi - (vertical + horizontal).min(p.a_max_db)
}

/// Sector antenna gain toward `direction` (global frame, need not be unit).
pub fn bs_sector_gain(direction: crate::geometry::Vec3, boresight_az_deg: f64, mech_tilt_deg: f64) -> f64 {
    let frame = Frame::new(boresight_az_deg, mech_tilt_deg + BS_ELECTRICAL_TILT_DEG);
    let (az, el) = frame.local_angles(direction);
    element_pattern(az, el, &PatternParams::BS_SECTOR)
}

/// UMa LOS probability for a receiver at height `h_ut`.
pub fn los_probability(d2d: f64, h_ut: f64) -> f64 {
    if d2d <= 18.0 {
        return 1.0;
    }
    let c = if h_ut <= 13.0 {
        0.0
    } else {
        ((h_ut - 13.0) / 10.0).powf(1.5)
    };
    let base = 18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d);
    let corr = 1.0 + c * 1.25 * (d2d / 100.0).powi(3) * (-d2d / 150.0).exp();
    (base * corr).clamp(0.0, 1.0)
}

/// Breakpoint distance d'_BP of the UMa LOS model.
pub fn breakpoint_distance(fc_ghz: f64, h_bs: f64, h_ut: f64) -> f64 {
    let hb = (h_bs - UMA_ENV_HEIGHT_M).max(0.0);
    let hu = (h_ut - UMA_ENV_HEIGHT_M).max(0.0);
    4.0 * hb * hu * fc_ghz * 1e9 / SPEED_OF_LIGHT
}

/// Precomputed UMa coefficients for a fixed carrier and height pair, so the
/// per-element kernels only pay for one logarithm per evaluation.
#[derive(Debug, Clone, Copy)]
pub struct UmaCoefficients {
    fc_term: f64,
    bp: f64,
    bp_term: f64,
    nlos_height: f64,
}

impl UmaCoefficients {
    pub fn new(fc_ghz: f64, h_bs: f64, h_ut: f64) -> Self {
        let bp = breakpoint_distance(fc_ghz, h_bs, h_ut);
        let dh = h_bs - h_ut;
        Self {
            fc_term: 20.0 * fc_ghz.log10(),
            bp,
            bp_term: 9.0 * (bp * bp + dh * dh).log10(),
            nlos_height: 0.6 * (h_ut - 1.5),
        }
    }

    /// Pathloss in dB given d3d (already clamped) and d2d.
    pub fn pathloss(&self, d3d: f64, d2d: f64, los: bool) -> f64 {
        let lg = d3d.log10();
        let pl_los = if d2d <= self.bp {
            28.0 + 22.0 * lg + self.fc_term
        } else {
            28.0 + 40.0 * lg + self.fc_term - self.bp_term
        };
        if los {
            pl_los
        } else {
            let pl_nlos = 13.54 + 39.08 * lg + self.fc_term - self.nlos_height;
            pl_los.max(pl_nlos)
        }
    }
}

pub fn clamp_distance(d3d: f64) -> f64 {
    if d3d < 1.0 {
        log::warn!("3D distance {d3d:.3} m below 1 m, clamped (near-degenerate geometry)");
        1.0
    } else {
        d3d
    }
}

/// UMa pathloss in dB.
pub fn uma_pathloss(d3d: f64, d2d: f64, fc_ghz: f64, h_bs: f64, h_ut: f64, los: bool) -> f64 {
    UmaCoefficients::new(fc_ghz, h_bs, h_ut).pathloss(clamp_distance(d3d), d2d, los)
}

/// One shadow-fading draw in dB; exactly zero when disabled.
pub fn shadow_fading<R: Rng + ?Sized>(rng: &mut R, los: bool, enabled: bool) -> f64 {
    let sigma = if los {
        SHADOW_SIGMA_LOS_DB
    } else {
        SHADOW_SIGMA_NLOS_DB
    };
    // Draw unconditionally so the stream position does not depend on the flag.
    let z: f64 = Normal::new(0.0, sigma).unwrap().sample(rng);
    if enabled {
        z
    } else {
        0.0
    }
}

/// Random large-scale state of one link for one drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub los: bool,
    pub shadow_db: f64,
}

impl LinkState {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, d2d: f64, h_ut: f64, shadowing: bool) -> Self {
        let u: f64 = rng.random();
        let los = u < los_probability(d2d, h_ut);
        let shadow_db = shadow_fading(rng, los, shadowing);
        Self { los, shadow_db }
    }

    /// Linear power factor of the shadowing term.
    pub fn shadow_lin(&self) -> f64 {
        db_to_lin(-self.shadow_db)
    }
}

/// Carrier and pattern settings shared by every link in a drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioModel {
    pub fc_ghz: f64,
    /// One split component of the RIS element pattern.
    pub ris_pattern: PatternParams,
    pub shadowing: bool,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            fc_ghz: 2.6,
            ris_pattern: PatternParams::ris_element(5.0),
            shadowing: true,
        }
    }
}

impl RadioModel {
    pub fn wavelength(&self) -> f64 {
        wavelength_m(self.fc_ghz)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGain {
    pub los: bool,
    pub pathloss_db: f64,
    pub shadow_db: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    /// Linear power gain.
    pub total: f64,
}

impl LinkGain {
    pub fn total_db(&self) -> f64 {
        self.tx_gain_db + self.rx_gain_db - self.pathloss_db - self.shadow_db
    }
}

/// Pattern gain of `node` toward `direction`. UEs are omni (0 dBi).
pub fn node_gain_db(node: &NodePlacement, direction: crate::geometry::Vec3, model: &RadioModel) -> f64 {
    match node.kind {
        NodeKind::Bs => bs_sector_gain(direction, node.azimuth_deg, node.tilt_deg),
        NodeKind::Ris => {
            let (az, el) = node.frame().local_angles(direction);
            element_pattern(az, el, &model.ris_pattern)
        }
        NodeKind::Ue => 0.0,
    }
}

/// Evaluates a link for a given large-scale state.
pub fn link_gain_with_state(
    tx: &NodePlacement,
    rx: &NodePlacement,
    layout: &Layout,
    model: &RadioModel,
    state: LinkState,
) -> LinkGain {
    let rx_pos = layout.wrapped_position(tx.position, rx.position);
    let d = rx_pos - tx.position;
    let d2d = d.xy().norm();
    let d3d = d.norm();
    let (h_bs, h_ut) = if tx.position.z >= rx.position.z {
        (tx.position.z, rx.position.z)
    } else {
        (rx.position.z, tx.position.z)
    };
    let pathloss_db = uma_pathloss(d3d, d2d, model.fc_ghz, h_bs, h_ut, state.los);
    let tx_gain_db = node_gain_db(tx, d, model);
    let rx_gain_db = node_gain_db(rx, d * -1.0, model);
    let total = db_to_lin(tx_gain_db + rx_gain_db - pathloss_db - state.shadow_db);
    LinkGain {
        los: state.los,
        pathloss_db,
        shadow_db: state.shadow_db,
        tx_gain_db,
        rx_gain_db,
        total,
    }
}

/// Samples the LOS state and shadowing of a link, then evaluates it.
pub fn link_gain<R: Rng + ?Sized>(
    tx: &NodePlacement,
    rx: &NodePlacement,
    layout: &Layout,
    model: &RadioModel,
    rng: &mut R,
) -> LinkGain {
    let d2d = layout.wrapped_distance(tx.position.xy(), rx.position.xy());
    let h_ut = tx.position.z.min(rx.position.z);
    let state = LinkState::sample(rng, d2d, h_ut, model.shadowing);
    link_gain_with_state(tx, rx, layout, model, state)
}
