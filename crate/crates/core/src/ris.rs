//! RIS device model: element grid, split element response, discrete phase
//! control, beamforming configuration, failure injection and far-field
//! pattern analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{Frame, NodeKind, NodePlacement, Vec3, RIS_HEIGHT_M};
use crate::radio::{element_pattern, wavelength_m, PatternParams};

/// Element pitch in wavelengths, both axes.
pub const ELEMENT_SPACING_WAVELENGTHS: f64 = 0.4;
/// Number of global phase rotations tried by [`quantized_conjugate`].
pub const ROTATION_SCAN_POINTS: usize = 16;
pub const MAX_CODEBOOK_ENTRIES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RisElementState {
    pub index: u8,
    pub failed: bool,
    /// Frozen phase index, meaningful only when `failed`.
    pub failed_index: u8,
}

impl RisElementState {
    pub fn applied_index(&self) -> u8 {
        if self.failed {
            self.failed_index
        } else {
            self.index
        }
    }
}

/// Row-major grid of commanded phase indices (row = vertical position).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseConfig(pub Vec<u8>);

impl PhaseConfig {
    pub fn zeros(n: usize) -> Self {
        PhaseConfig(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisPanel {
    pub placement: NodePlacement,
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Pattern of each split component of the element response.
    pub pattern: PatternParams,
    pub bits: u32,
    pub states: Vec<RisElementState>,
    frame: Frame,
    elements: Vec<Vec3>,
}

impl RisPanel {
    pub fn new(
        placement: NodePlacement,
        rows: usize,
        cols: usize,
        fc_ghz: f64,
        pattern: PatternParams,
        bits: u32,
    ) -> Self {
        assert!(rows > 0 && cols > 0, "panel needs at least one element");
        assert!((1..=8).contains(&bits), "phase bits must be in 1..=8");
        let spacing_m = ELEMENT_SPACING_WAVELENGTHS * wavelength_m(fc_ghz);
        let frame = placement.frame();
        let c = placement.position;
        let (r0, c0) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
        let mut elements = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for k in 0..cols {
                let dv = (r as f64 - r0) * spacing_m;
                let dh = (k as f64 - c0) * spacing_m;
                elements.push(c + frame.horizontal * dh + frame.vertical * dv);
            }
        }
        Self {
            placement,
            rows,
            cols,
            spacing_m,
            pattern,
            bits,
            states: vec![RisElementState::default(); rows * cols],
            frame,
            elements,
        }
    }

    pub fn id(&self) -> usize {
        self.placement.id
    }

    pub fn center(&self) -> Vec3 {
        self.placement.position
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn elements(&self) -> &[Vec3] {
        &self.elements
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn width_m(&self) -> f64 {
        self.cols as f64 * self.spacing_m
    }

    pub fn height_m(&self) -> f64 {
        self.rows as f64 * self.spacing_m
    }

    pub fn area_m2(&self) -> f64 {
        self.width_m() * self.height_m()
    }

    pub fn diagonal_m(&self) -> f64 {
        self.width_m().hypot(self.height_m())
    }

    pub fn set_config(&mut self, config: &PhaseConfig) {
        assert_eq!(config.len(), self.num_elements());
        for (s, &q) in self.states.iter_mut().zip(&config.0) {
            s.index = q;
        }
    }

    /// Phase indices actually applied, failures included.
    pub fn applied_config(&self) -> PhaseConfig {
        PhaseConfig(self.states.iter().map(RisElementState::applied_index).collect())
    }

    pub fn failed_count(&self) -> usize {
        self.states.iter().filter(|s| s.failed).count()
    }

    /// Split pattern amplitude √g(φᵢ)·√g(φᵣ) for directions from the element
    /// toward the source and toward the observer.
    pub fn element_amplitude(&self, incident: Vec3, reflect: Vec3) -> f64 {
        let (ai, ei) = self.frame.local_angles(incident);
        let (ar, er) = self.frame.local_angles(reflect);
        let g = element_pattern(ai, ei, &self.pattern) + element_pattern(ar, er, &self.pattern);
        10f64.powf(g / 20.0)
    }

    pub fn element_response(&self, incident: Vec3, reflect: Vec3, state: &RisElementState) -> Complex64 {
        let phase = level_phase(state.applied_index(), self.bits);
        Complex64::from_polar(self.element_amplitude(incident, reflect), phase)
    }
}

pub fn level_phase(index: u8, bits: u32) -> f64 {
    2.0 * PI * index as f64 / (1u32 << bits) as f64
}

/// Unit phasors of every quantization level.
pub fn level_phasors(bits: u32) -> Vec<Complex64> {
    (0..(1u32 << bits))
        .map(|k| Complex64::from_polar(1.0, level_phase(k as u8, bits)))
        .collect()
}

/// Index of the quantization level nearest to `phase` (mod 2π).
/// Exact midpoints resolve to the smaller index.
pub fn quantize_phase(phase: f64, bits: u32) -> u8 {
    let levels = 1u32 << bits;
    let step = 2.0 * PI / levels as f64;
    let x = phase.rem_euclid(2.0 * PI) / step;
    let lo = x.floor();
    let frac = x - lo;
    let lo = (lo as u32) % levels;
    let hi = (lo + 1) % levels;
    if frac < 0.5 {
        lo as u8
    } else if frac > 0.5 {
        hi as u8
    } else {
        lo.min(hi) as u8
    }
}

/// Quantized co-phasing of per-element terms `tₑ`: picks indices so that
/// `Σ tₑ·e^{jφₑ}` is as large as possible. Each candidate global rotation
/// `c` yields `φₑ = Q(c − arg tₑ)`; the best of [`ROTATION_SCAN_POINTS`]
/// rotations over one level step is kept (first one on ties), then shifted so
/// that element 0 has index 0.
pub fn quantized_conjugate(terms: &[Complex64], bits: u32) -> (PhaseConfig, Complex64) {
    let phasors = level_phasors(bits);
    let step = 2.0 * PI / phasors.len() as f64;
    let args: Vec<f64> = terms.iter().map(|t| t.arg()).collect();
    let mut best: Option<(f64, Vec<u8>, Complex64)> = None;
    let mut idx = vec![0u8; terms.len()];
    for m in 0..ROTATION_SCAN_POINTS {
        let c = step * m as f64 / ROTATION_SCAN_POINTS as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for ((q, t), a) in idx.iter_mut().zip(terms).zip(&args) {
            *q = quantize_phase(c - a, bits);
            sum += t * phasors[*q as usize];
        }
        let p = sum.norm_sqr();
        if best.as_ref().is_none_or(|b| p > b.0) {
            best = Some((p, idx.clone(), sum));
        }
    }
    // A common offset does not change |Σ|; pin element 0 to index 0.
    let (_, mut q, s) = best.unwrap();
    let levels = phasors.len();
    let shift = q.first().copied().unwrap_or(0);
    for x in &mut q {
        *x = ((*x as usize + levels - shift as usize) % levels) as u8;
    }
    (PhaseConfig(q), s * phasors[shift as usize].conj())
}

/// Coherent sum `Σ tₑ·e^{jφₑ}` for a phase configuration.
pub fn coherent_sum(terms: &[Complex64], config: &PhaseConfig, bits: u32) -> Complex64 {
    let phasors = level_phasors(bits);
    terms
        .iter()
        .zip(&config.0)
        .map(|(t, &q)| t * phasors[q as usize])
        .sum()
}

/// Geometric two-hop terms for configuration purposes: split pattern
/// amplitudes over spherical spreading, with exact per-element distances.
pub fn geometric_terms(panel: &RisPanel, bs: Vec3, ue: Vec3, wavenumber: f64) -> Vec<Complex64> {
    panel
        .elements()
        .iter()
        .map(|&e| {
            let (to_bs, to_ue) = (bs - e, ue - e);
            let (d1, d2) = (to_bs.norm(), to_ue.norm());
            let a = panel.element_amplitude(to_bs, to_ue) / (d1 * d2);
            Complex64::from_polar(a, wavenumber * (d1 + d2))
        })
        .collect()
}

/// Quantized conjugate beamforming toward `ue` for illumination from `bs`.
/// Positions must already be wrap-resolved relative to the panel.
pub fn conjugate_config(panel: &RisPanel, bs: Vec3, ue: Vec3, fc_ghz: f64) -> PhaseConfig {
    let k = 2.0 * PI / wavelength_m(fc_ghz);
    quantized_conjugate(&geometric_terms(panel, bs, ue, k), panel.bits).0
}

/// Far-field terms for plane-wave incidence from `incident` and observation
/// toward `reflect` (unit vectors pointing away from the panel).
pub fn far_field_terms(panel: &RisPanel, incident: Vec3, reflect: Vec3, wavenumber: f64) -> Vec<Complex64> {
    let a = panel.element_amplitude(incident, reflect);
    let c = panel.center();
    let s = incident + reflect;
    panel
        .elements()
        .iter()
        .map(|&e| Complex64::from_polar(a, -wavenumber * (e - c).dot(s)))
        .collect()
}

/// Quantized far-field steering configuration.
pub fn steering_config(panel: &RisPanel, incident: Vec3, reflect: Vec3, fc_ghz: f64) -> PhaseConfig {
    let k = 2.0 * PI / wavelength_m(fc_ghz);
    quantized_conjugate(&far_field_terms(panel, incident, reflect, k), panel.bits).0
}

/// Unit vector at local azimuth/elevation offsets in a frame.
pub fn local_direction(frame: &Frame, az_deg: f64, el_deg: f64) -> Vec3 {
    let (sa, ca) = az_deg.to_radians().sin_cos();
    let (se, ce) = el_deg.to_radians().sin_cos();
    frame.boresight * (ce * ca) + frame.horizontal * (ce * sa) + frame.vertical * se
}

/// Approximate half-power beamwidth in degrees of a uniform aperture with
/// `n` elements at `spacing_wl` wavelengths.
pub fn uniform_hpbw_deg(n: usize, spacing_wl: f64) -> f64 {
    (0.886 / (n as f64 * spacing_wl)).min(2.0).to_degrees()
}

/// Far-field steering codebook for illumination from `bs`: reflection
/// directions on an azimuth × elevation grid over ±60°, step HPBW/2,
/// coarsened until at most [`MAX_CODEBOOK_ENTRIES`] entries remain.
pub fn default_codebook(panel: &RisPanel, bs: Vec3, fc_ghz: f64) -> Vec<PhaseConfig> {
    let incident = (bs - panel.center()).normalized();
    let mut step_az = uniform_hpbw_deg(panel.cols, ELEMENT_SPACING_WAVELENGTHS) / 2.0;
    let mut step_el = uniform_hpbw_deg(panel.rows, ELEMENT_SPACING_WAVELENGTHS) / 2.0;
    let count = |s: f64| (120.0 / s).floor() as usize + 1;
    while count(step_az) * count(step_el) > MAX_CODEBOOK_ENTRIES {
        step_az *= 1.05;
        step_el *= 1.05;
    }
    let (n_az, n_el) = (count(step_az), count(step_el));
    let mut book = Vec::with_capacity(n_az * n_el);
    for i in 0..n_el {
        let el = -60.0 + step_el * i as f64;
        for j in 0..n_az {
            let az = -60.0 + step_az * j as f64;
            let reflect = local_direction(panel.frame(), az, el);
            book.push(steering_config(panel, incident, reflect, fc_ghz));
        }
    }
    book
}

/// Codebook entry with the largest coherent power for the given terms
/// (first entry on ties).
pub fn best_codebook_entry(terms: &[Complex64], codebook: &[PhaseConfig], bits: u32) -> Result<(usize, Complex64)> {
    if codebook.is_empty() {
        return Err(SimError::Config("codebook is empty".into()));
    }
    let mut best = (0, coherent_sum(terms, &codebook[0], bits));
    for (i, entry) in codebook.iter().enumerate().skip(1) {
        let s = coherent_sum(terms, entry, bits);
        if s.norm_sqr() > best.1.norm_sqr() {
            best = (i, s);
        }
    }
    Ok(best)
}

/// Beam sweep: index of the codebook entry maximizing the geometric
/// cascaded power between `bs` and `ue`.
pub fn sweep_codebook(
    panel: &RisPanel,
    bs: Vec3,
    ue: Vec3,
    fc_ghz: f64,
    codebook: &[PhaseConfig],
) -> Result<usize> {
    let k = 2.0 * PI / wavelength_m(fc_ghz);
    best_codebook_entry(&geometric_terms(panel, bs, ue, k), codebook, panel.bits).map(|b| b.0)
}

/// Each element fails independently with probability `rate`; a failed
/// element keeps a uniformly random phase index for the rest of the drop.
pub fn inject_failures<R: Rng + ?Sized>(panel: &mut RisPanel, rate: f64, rng: &mut R) {
    let levels = panel.levels() as u32;
    for s in &mut panel.states {
        // Both draws happen for every element so streams line up across rates.
        let u: f64 = rng.random();
        let q = rng.random_range(0..levels) as u8;
        s.failed = u < rate;
        s.failed_index = if s.failed { q } else { 0 };
    }
}

/// 2D far-field Rayleigh distance 2D²/λ over the panel diagonal.
pub fn rayleigh_distance(panel: &RisPanel, fc_ghz: f64) -> f64 {
    2.0 * panel.diagonal_m().powi(2) / wavelength_m(fc_ghz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternCut {
    /// Sweep local azimuth at a fixed elevation offset.
    Azimuth,
    /// Sweep local elevation at a fixed azimuth offset.
    Elevation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub angles_deg: Vec<f64>,
    /// Normalized to the peak (0 dB).
    pub power_db: Vec<f64>,
    /// Linear coherent power at the peak.
    pub peak_power: f64,
    pub peak_angle_deg: f64,
    pub hpbw_deg: Option<f64>,
    /// Peak minus the highest sidelobe, dB. Infinite without sidelobes.
    pub sidelobe_margin_db: f64,
}

/// Reflected far-field power `|Σ aₑ·e^{j(φₑ + geometric phase)}|²` over a
/// one-dimensional cut, using the panel's applied (failure-aware) phases.
pub fn panel_beam_pattern(
    panel: &RisPanel,
    incident: Vec3,
    cut: PatternCut,
    fixed_deg: f64,
    angles_deg: &[f64],
    fc_ghz: f64,
) -> BeamPattern {
    let k = 2.0 * PI / wavelength_m(fc_ghz);
    let applied = panel.applied_config();
    let incident = incident.normalized();
    let power: Vec<f64> = angles_deg
        .iter()
        .map(|&a| {
            let reflect = match cut {
                PatternCut::Azimuth => local_direction(panel.frame(), a, fixed_deg),
                PatternCut::Elevation => local_direction(panel.frame(), fixed_deg, a),
            };
            coherent_sum(&far_field_terms(panel, incident, reflect, k), &applied, panel.bits).norm_sqr()
        })
        .collect();
    analyze_pattern(angles_deg, &power)
}

/// Standalone panel facing +x without tilt, lit at normal incidence and
/// steered toward the local offsets `(steer_az_deg, steer_el_deg)`.
pub fn steered_panel(
    rows: usize,
    cols: usize,
    fc_ghz: f64,
    pattern: PatternParams,
    bits: u32,
    steer_az_deg: f64,
    steer_el_deg: f64,
) -> RisPanel {
    let placement = NodePlacement {
        kind: NodeKind::Ris,
        id: 0,
        sector: 0,
        position: Vec3::new(0.0, 0.0, RIS_HEIGHT_M),
        azimuth_deg: 0.0,
        tilt_deg: 0.0,
    };
    let mut panel = RisPanel::new(placement, rows, cols, fc_ghz, pattern, bits);
    let n = panel.frame().boresight;
    let target = local_direction(panel.frame(), steer_az_deg, steer_el_deg);
    let cfg = steering_config(&panel, n, target, fc_ghz);
    panel.set_config(&cfg);
    panel
}

/// Peak, half-power beamwidth and sidelobe margin of a sampled pattern.
pub fn analyze_pattern(angles_deg: &[f64], power: &[f64]) -> BeamPattern {
    assert_eq!(angles_deg.len(), power.len());
    assert!(!power.is_empty());
    let (ipk, &peak) = power
        .iter()
        .enumerate()
        .fold((0, &power[0]), |b, (i, p)| if *p > *b.1 { (i, p) } else { b });
    let db: Vec<f64> = power.iter().map(|p| 10.0 * (p / peak).log10()).collect();

    let crossing = |range: &mut dyn Iterator<Item = usize>, toward: isize| -> Option<f64> {
        for i in range {
            if db[i] < -3.0 {
                let j = (i as isize - toward) as usize;
                let t = (-3.0 - db[j]) / (db[i] - db[j]);
                return Some(angles_deg[j] + t * (angles_deg[i] - angles_deg[j]));
            }
        }
        None
    };
    let left = crossing(&mut (0..ipk).rev(), -1);
    let right = crossing(&mut (ipk + 1..power.len()), 1);
    let hpbw_deg = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };

    let mut lo = ipk;
    while lo > 0 && power[lo - 1] <= power[lo] {
        lo -= 1;
    }
    let mut hi = ipk;
    while hi + 1 < power.len() && power[hi + 1] <= power[hi] {
        hi += 1;
    }
    let sidelobe = db[..lo]
        .iter()
        .chain(&db[hi + 1..])
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));

    BeamPattern {
        angles_deg: angles_deg.to_vec(),
        power_db: db,
        peak_power: peak,
        peak_angle_deg: angles_deg[ipk],
        hpbw_deg,
        sidelobe_margin_db: -sidelobe,
    }
}
