//! BS → RIS → UE cascaded gain by per-element coherent summation, incoherent
//! combination with the direct link, and RIS–UE pairing.

use num_complex::Complex64;

use crate::geometry::{Layout, NodePlacement, Vec3};
use crate::radio::{bs_sector_gain, clamp_distance, db_to_lin, element_pattern, LinkState, RadioModel, UmaCoefficients};
use crate::ris::{level_phasors, RisPanel};

/// Per-element terms of one hop between the panel and an external antenna,
/// `√PL_lin(dₑ)·γ(direction)·e^{jk·dₑ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub terms: Vec<Complex64>,
    /// The external antenna lies behind the panel plane.
    pub behind: bool,
}

/// Computes one hop's element terms toward `other`, which must already be
/// wrap-resolved relative to the panel centre.
///
/// The pathloss formula uses the nominal antenna heights (panel centre and
/// `other`); per-element distances and angles enter exactly unless
/// `near_field_exact` is false, in which case the panel-centre amplitude is
/// reused and only the phase is evaluated per element.
pub fn element_leg(panel: &RisPanel, other: Vec3, los: bool, model: &RadioModel, near_field_exact: bool) -> Leg {
    let center = panel.center();
    let (h_bs, h_ut) = if other.z >= center.z {
        (other.z, center.z)
    } else {
        (center.z, other.z)
    };
    let uma = UmaCoefficients::new(model.fc_ghz, h_bs, h_ut);
    let k = model.wavenumber();
    let frame = panel.frame();
    let amplitude = |d: Vec3| -> f64 {
        let d3d = clamp_distance(d.norm());
        let d2d = d.xy().norm();
        let pl = uma.pathloss(d3d, d2d, los);
        let (az, el) = frame.local_angles(d);
        let g = element_pattern(az, el, &panel.pattern);
        10f64.powf((g - pl) / 20.0)
    };
    let behind = (other - center).dot(frame.boresight) < 0.0;
    let terms = if near_field_exact {
        panel
            .elements()
            .iter()
            .map(|&e| {
                let d = other - e;
                Complex64::from_polar(amplitude(d), k * d.norm())
            })
            .collect()
    } else {
        let a = amplitude(other - center);
        panel
            .elements()
            .iter()
            .map(|&e| Complex64::from_polar(a, k * (other - e).norm()))
            .collect()
    };
    Leg { terms, behind }
}

/// Coherent sum over elements of `inc·out·e^{jφ}` for the given indices.
pub fn coherent_two_hop(inc: &[Complex64], out: &[Complex64], indices: &[u8], bits: u32) -> Complex64 {
    let phasors = level_phasors(bits);
    inc.iter()
        .zip(out)
        .zip(indices)
        .map(|((a, b), &q)| a * b * phasors[q as usize])
        .sum()
}

/// Elementwise product of two legs: the per-element cascaded terms before
/// phase control.
pub fn two_hop_terms(inc: &[Complex64], out: &[Complex64]) -> Vec<Complex64> {
    inc.iter().zip(out).map(|(a, b)| a * b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadedGain {
    pub coherent_sum: Complex64,
    /// Linear power gain including BS and UE antenna gains and the
    /// shadowing of both hops.
    pub power: f64,
    pub behind_panel: bool,
}

impl CascadedGain {
    pub const NONE: CascadedGain = CascadedGain {
        coherent_sum: Complex64::new(0.0, 0.0),
        power: 0.0,
        behind_panel: false,
    };

    pub fn from_sum(sum: Complex64, scalar: f64, behind_panel: bool) -> Self {
        Self {
            coherent_sum: sum,
            power: sum.norm_sqr() * scalar,
            behind_panel,
        }
    }
}

/// Shared inputs for evaluating cascaded links.
#[derive(Debug, Clone, Copy)]
pub struct CascadeContext<'a> {
    pub layout: &'a Layout,
    pub model: &'a RadioModel,
    pub near_field_exact: bool,
}

/// Link-level scalar outside the coherent sum: BS sector gain toward the
/// panel centre, 0 dBi UE, and shadowing on both hops.
pub fn cascade_scalar(bs_gain_db: f64, bs_ris: &LinkState, ris_ue: &LinkState) -> f64 {
    db_to_lin(bs_gain_db) * bs_ris.shadow_lin() * ris_ue.shadow_lin()
}

/// Cascaded gain of `bs → panel → ue` with the panel's applied phases.
pub fn cascaded_gain(
    bs: &NodePlacement,
    panel: &RisPanel,
    ue: &NodePlacement,
    bs_ris: LinkState,
    ris_ue: LinkState,
    ctx: &CascadeContext<'_>,
) -> CascadedGain {
    let c = panel.center();
    let bs_pos = ctx.layout.wrapped_position(c, bs.position);
    let ue_pos = ctx.layout.wrapped_position(c, ue.position);
    let bs_gain_db = bs_sector_gain(c - bs_pos, bs.azimuth_deg, bs.tilt_deg);
    let inc = element_leg(panel, bs_pos, bs_ris.los, ctx.model, ctx.near_field_exact);
    let out = element_leg(panel, ue_pos, ris_ue.los, ctx.model, ctx.near_field_exact);
    let applied = panel.applied_config();
    let sum = coherent_two_hop(&inc.terms, &out.terms, &applied.0, panel.bits);
    CascadedGain::from_sum(sum, cascade_scalar(bs_gain_db, &bs_ris, &ris_ue), out.behind || inc.behind)
}

/// Incoherent power-domain combination of the direct and cascaded links.
pub fn combined_gain(direct: f64, cascaded: f64) -> f64 {
    direct + cascaded
}

/// Picks the strongest candidate if its cascaded gain is at least
/// `direct + threshold_db` (in dB). Ties go to the lowest panel id.
pub fn pair_ris(candidates: &[(usize, CascadedGain)], direct: f64, threshold_db: f64) -> Option<(usize, CascadedGain)> {
    let mut best: Option<(usize, CascadedGain)> = None;
    for &(id, g) in candidates {
        let better = match best {
            None => true,
            Some((bid, bg)) => g.power > bg.power || (g.power == bg.power && id < bid),
        };
        if better {
            best = Some((id, g));
        }
    }
    best.filter(|(_, g)| g.power > 0.0 && g.power >= direct * db_to_lin(threshold_db))
}
