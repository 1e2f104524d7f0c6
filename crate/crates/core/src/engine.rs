//! One simulated drop: placement, association, RIS pairing and
//! configuration, failures, and per-UE RSRP/SINR. Also the RSRP-gain heat map.
//!
//! All randomness comes from keyed streams (see [`crate::rng`]); the
//! per-UE and per-grid-point stages run on the rayon pool and produce the same
//! bits for any number of threads.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cascaded::{cascade_scalar, coherent_two_hop, element_leg, pair_ris, CascadedGain, Leg};
use crate::config::{PanelSharing, ScenarioConfig};
use crate::geometry::{
    bs_placements, build_layout, drop_ris_panels, drop_ues, Layout, NodeKind, NodePlacement, Vec2, Vec3, RIS_HEIGHT_M,
    UE_HEIGHT_M,
};
use crate::radio::{bs_sector_gain, db_to_lin, lin_to_db, link_gain_with_state, LinkState, RadioModel};
use crate::ris::{
    conjugate_config, default_codebook, inject_failures, level_phasors, sweep_codebook, PhaseConfig, RisPanel,
};
use crate::rng::{grid_key, stream_rng, Stream};
use crate::{Result, SimError};

/// Which interference terms enter the SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterferenceFlags {
    /// Direct links from every non-serving sector.
    pub neighbor_direct: bool,
    /// Reflections of non-serving BS signals by RIS panels.
    pub cross_ris: bool,
}

impl InterferenceFlags {
    pub fn new(cross_ris: bool) -> Self {
        Self {
            neighbor_direct: true,
            cross_ris,
        }
    }
}

/// Received power components of one UE, in mW.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerTerms {
    pub signal_mw: f64,
    pub neighbor_direct_mw: f64,
    pub cross_ris_mw: f64,
}

/// `tx + 10·log10(direct + cascaded)`.
pub fn compute_rsrp(direct: f64, cascaded: f64, tx_power_dbm: f64) -> f64 {
    tx_power_dbm + lin_to_db(direct + cascaded)
}

/// SINR in dB for the selected interference terms.
pub fn compute_sinr(terms: &PowerTerms, flags: InterferenceFlags, noise_dbm: f64) -> f64 {
    let mut i = db_to_lin(noise_dbm);
    if flags.neighbor_direct {
        i += terms.neighbor_direct_mw;
    }
    if flags.cross_ris {
        i += terms.cross_ris_mw;
    }
    lin_to_db(terms.signal_mw / i)
}

/// Serving sector: the sector with the largest direct gain, lowest id on ties.
pub fn associate(direct_gains: &[f64]) -> usize {
    let mut best = 0;
    for (s, &g) in direct_gains.iter().enumerate() {
        if g > direct_gains[best] {
            best = s;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeRecord {
    pub ue_id: usize,
    pub sector: usize,
    pub panel_id: Option<usize>,
    pub position: Vec3,
    /// Linear direct gain from the serving sector.
    pub direct: f64,
    /// Linear cascaded gain through the serving panel (0 when unpaired).
    pub cascaded: f64,
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    /// 3D distance to the serving panel centre.
    pub ris_distance_m: Option<f64>,
    pub baseline_rsrp_dbm: f64,
    pub baseline_sinr_db: f64,
    pub terms: PowerTerms,
}

/// Outputs of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub noise_dbm: f64,
    pub bss: Vec<NodePlacement>,
    pub panels: Vec<NodePlacement>,
    pub ues: Vec<UeRecord>,
}

impl DropResult {
    pub fn rsrp(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.rsrp_dbm).collect()
    }

    pub fn sinr(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.sinr_db).collect()
    }

    pub fn baseline_sinr(&self) -> Vec<f64> {
        self.ues.iter().map(|u| u.baseline_sinr_db).collect()
    }

    /// Distances of paired UEs to their serving panels.
    pub fn ris_distances(&self) -> Vec<f64> {
        self.ues.iter().filter_map(|u| u.ris_distance_m).collect()
    }

    /// Per-UE SINR recomputed for other interference flags.
    pub fn sinr_with(&self, flags: InterferenceFlags) -> Vec<f64> {
        self.ues.iter().map(|u| compute_sinr(&u.terms, flags, self.noise_dbm)).collect()
    }

    pub fn placements(&self) -> impl Iterator<Item = &NodePlacement> {
        self.bss.iter().chain(&self.panels)
    }
}

/// A UE's choice of panel after the pairing test.
#[derive(Debug, Clone)]
struct Proposal {
    panel: usize,
    power: f64,
    config: PhaseConfig,
}

/// A drop after placement, pairing, configuration and failure injection.
pub struct NetworkDrop {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub layout: Layout,
    pub model: RadioModel,
    pub bss: Vec<NodePlacement>,
    pub panels: Vec<RisPanel>,
    pub ues: Vec<NodePlacement>,
    /// Direct linear gains, `[ue][sector]`.
    pub direct: Vec<Vec<f64>>,
    pub serving: Vec<usize>,
    /// Serving panel and its commanded configuration per UE.
    served: Vec<Option<(usize, PhaseConfig)>>,
    sector_panels: Vec<Vec<usize>>,
    /// BS-site → panel hop states, `[site * P + panel]`.
    bs_ris: Vec<LinkState>,
    /// Incident element terms, `[site * P + panel]`.
    incident: Vec<Leg>,
    /// Sector antenna gain toward each panel centre, `[sector * P + panel]`.
    bs_gain_db: Vec<f64>,
}

fn link_state(seed: u64, stream: Stream, a: usize, key: u64, d2d: f64, h_ut: f64, shadowing: bool) -> LinkState {
    let mut rng = stream_rng(seed, stream, a as u64, key);
    LinkState::sample(&mut rng, d2d, h_ut, shadowing)
}

fn ue_node(id: usize, sector: usize, position: Vec3) -> NodePlacement {
    NodePlacement {
        kind: NodeKind::Ue,
        id,
        sector,
        position,
        azimuth_deg: 0.0,
        tilt_deg: 0.0,
    }
}

/// Applied indices for a commanded configuration on a panel's current
/// failure states.
fn applied_with(panel: &RisPanel, config: &PhaseConfig) -> Vec<u8> {
    panel
        .states
        .iter()
        .zip(&config.0)
        .map(|(s, &q)| if s.failed { s.failed_index } else { q })
        .collect()
}

impl NetworkDrop {
    /// Places all nodes, pairs UEs with panels, configures the panels and
    /// injects element failures.
    pub fn prepare(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = build_layout(config.rings, config.isd_m)?;
        let model = config.radio_model();
        let bss = bs_placements(&layout);
        let mut rng = stream_rng(seed, Stream::PanelDrop, 0, 0);
        let placements = drop_ris_panels(&layout, config.panels_per_sector, config.panel_placement, &mut rng)?;
        let panels: Vec<RisPanel> = placements
            .into_iter()
            .map(|p| {
                RisPanel::new(
                    p,
                    config.panel_grid,
                    config.panel_grid,
                    config.carrier_ghz,
                    model.ris_pattern,
                    config.phase_bits,
                )
            })
            .collect();
        let mut rng = stream_rng(seed, Stream::UeDrop, 0, 0);
        let ues = drop_ues(&layout, config.ue_per_sector, config.ue_placement, &mut rng)?;
        let mut sector_panels = vec![Vec::new(); layout.num_sectors()];
        for p in &panels {
            sector_panels[p.placement.sector].push(p.id());
        }

        let np = panels.len();
        let nsites = layout.sites.len();
        let (bs_ris, incident): (Vec<LinkState>, Vec<Leg>) = (0..nsites * np)
            .into_par_iter()
            .map(|k| {
                let (site, r) = (k / np, k % np);
                let panel = &panels[r];
                let c = panel.center();
                let d2d = layout.wrapped_distance(layout.sites[site], c.xy());
                let state = link_state(seed, Stream::BsRis, site, r as u64, d2d, RIS_HEIGHT_M, model.shadowing);
                let bs_pos = layout.wrapped_position(c, bss[site * 3].position);
                let leg = element_leg(panel, bs_pos, state.los, &model, config.near_field_exact);
                (state, leg)
            })
            .unzip();
        let bs_gain_db: Vec<f64> = (0..layout.num_sectors() * np)
            .map(|k| {
                let (s, r) = (k / np, k % np);
                let c = panels[r].center();
                let bs = &bss[s];
                bs_sector_gain(c - layout.wrapped_position(c, bs.position), bs.azimuth_deg, bs.tilt_deg)
            })
            .collect();

        let direct: Vec<Vec<f64>> = ues
            .par_iter()
            .map(|ue| {
                bss.iter()
                    .map(|bs| {
                        let site = layout.sectors[bs.sector].site;
                        let d2d = layout.wrapped_distance(layout.sites[site], ue.position.xy());
                        let state =
                            link_state(seed, Stream::Direct, site, ue.id as u64, d2d, UE_HEIGHT_M, model.shadowing);
                        link_gain_with_state(bs, ue, &layout, &model, state).total
                    })
                    .collect()
            })
            .collect();
        let serving: Vec<usize> = direct.iter().map(|g| associate(g)).collect();

        let mut drop = NetworkDrop {
            config: config.clone(),
            seed,
            layout,
            model,
            bss,
            panels,
            ues,
            direct,
            serving,
            served: Vec::new(),
            sector_panels,
            bs_ris,
            incident,
            bs_gain_db,
        };

        let proposals: Vec<Option<Proposal>> = (0..drop.ues.len())
            .into_par_iter()
            .map(|u| {
                let ue = &drop.ues[u];
                let s = drop.serving[u];
                drop.best_candidate(ue, s, Stream::RisUe, ue.id as u64, drop.direct[u][s])
            })
            .collect();
        drop.assign(proposals)?;

        if config.failure_rate > 0.0 {
            for panel in &mut drop.panels {
                let mut rng = stream_rng(seed, Stream::Failure, panel.id() as u64, 0);
                inject_failures(panel, config.failure_rate, &mut rng);
            }
        }
        Ok(drop)
    }

    fn ris_ue_state(&self, r: usize, stream: Stream, key: u64, p: Vec2) -> LinkState {
        let d2d = self.layout.wrapped_distance(self.panels[r].center().xy(), p);
        link_state(self.seed, stream, r, key, d2d, UE_HEIGHT_M, self.model.shadowing)
    }

    fn out_leg(&self, r: usize, ue: &NodePlacement, state: &LinkState) -> Leg {
        let panel = &self.panels[r];
        let pos = self.layout.wrapped_position(panel.center(), ue.position);
        element_leg(panel, pos, state.los, &self.model, self.config.near_field_exact)
    }

    /// Cascaded gain from sector `s` through panel `r` to `ue` for the given
    /// applied indices.
    fn cascade_via(&self, s: usize, r: usize, out: &Leg, ris_ue: &LinkState, indices: &[u8]) -> CascadedGain {
        let np = self.panels.len();
        let site = self.layout.sectors[s].site;
        let inc = &self.incident[site * np + r];
        let sum = coherent_two_hop(&inc.terms, &out.terms, indices, self.panels[r].bits);
        let scalar = cascade_scalar(self.bs_gain_db[s * np + r], &self.bs_ris[site * np + r], ris_ue);
        CascadedGain::from_sum(sum, scalar, inc.behind || out.behind)
    }

    /// Conjugate configuration of panel `r` toward `ue` for sector `s`.
    fn conjugate_toward(&self, s: usize, r: usize, ue: &NodePlacement) -> PhaseConfig {
        let panel = &self.panels[r];
        let c = panel.center();
        let bs = self.layout.wrapped_position(c, self.bss[s].position);
        let to = self.layout.wrapped_position(c, ue.position);
        conjugate_config(panel, bs, to, self.config.carrier_ghz)
    }

    /// Evaluates every panel of sector `s` conjugately steered toward `ue`
    /// and applies the pairing rule.
    fn best_candidate(&self, ue: &NodePlacement, s: usize, stream: Stream, key: u64, direct: f64) -> Option<Proposal> {
        let mut candidates = Vec::new();
        let mut configs = Vec::new();
        for &r in &self.sector_panels[s] {
            let state = self.ris_ue_state(r, stream, key, ue.position.xy());
            let out = self.out_leg(r, ue, &state);
            let cfg = self.conjugate_toward(s, r, ue);
            let applied = applied_with(&self.panels[r], &cfg);
            candidates.push((r, self.cascade_via(s, r, &out, &state, &applied)));
            configs.push(cfg);
        }
        let (r, g) = pair_ris(&candidates, direct, self.config.pairing_threshold_db)?;
        let k = candidates.iter().position(|c| c.0 == r).expect("chosen panel is a candidate");
        Some(Proposal {
            panel: r,
            power: g.power,
            config: configs.swap_remove(k),
        })
    }

    fn codebook_config(&self, r: usize, ue: &NodePlacement) -> Result<PhaseConfig> {
        let panel = &self.panels[r];
        let s = panel.placement.sector;
        let c = panel.center();
        let bs = self.layout.wrapped_position(c, self.bss[s].position);
        let to = self.layout.wrapped_position(c, ue.position);
        let book = default_codebook(panel, bs, self.config.carrier_ghz);
        let k = sweep_codebook(panel, bs, to, self.config.carrier_ghz, &book)?;
        Ok(book[k].clone())
    }

    /// Resolves competing proposals and sets every panel's configuration.
    fn assign(&mut self, proposals: Vec<Option<Proposal>>) -> Result<()> {
        let mut by_panel: Vec<Vec<usize>> = vec![Vec::new(); self.panels.len()];
        for (u, p) in proposals.iter().enumerate() {
            if let Some(p) = p {
                by_panel[p.panel].push(u);
            }
        }
        let power = |u: usize| proposals[u].as_ref().map(|p| p.power).unwrap_or(0.0);
        for list in &mut by_panel {
            list.sort_by(|&a, &b| power(b).partial_cmp(&power(a)).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        }
        let served_ues: Vec<(usize, usize)> = by_panel
            .iter()
            .enumerate()
            .flat_map(|(r, list)| {
                let n = match self.config.panel_sharing {
                    PanelSharing::Exclusive => list.len().min(1),
                    PanelSharing::TimeShared => list.len(),
                };
                list[..n].iter().map(move |&u| (u, r))
            })
            .collect();
        let configs: Vec<Result<PhaseConfig>> = served_ues
            .par_iter()
            .map(|&(u, r)| {
                if self.config.codebook_mode {
                    self.codebook_config(r, &self.ues[u])
                } else {
                    Ok(proposals[u].as_ref().expect("served UEs proposed").config.clone())
                }
            })
            .collect();
        let mut served = vec![None; self.ues.len()];
        for (&(u, r), cfg) in served_ues.iter().zip(configs) {
            let cfg = cfg?;
            if by_panel[r].first() == Some(&u) {
                self.panels[r].set_config(&cfg);
            }
            served[u] = Some((r, cfg));
        }
        self.served = served;
        Ok(())
    }

    /// Serving panel id of each UE.
    pub fn serving_panel(&self, u: usize) -> Option<usize> {
        self.served[u].as_ref().map(|s| s.0)
    }

    /// Incident terms times each panel's applied phasors, `[site * P + panel]`.
    fn phased_incident(&self) -> Vec<Vec<Complex64>> {
        let np = self.panels.len();
        (0..self.incident.len())
            .into_par_iter()
            .map(|k| {
                let panel = &self.panels[k % np];
                let phasors = level_phasors(panel.bits);
                self.incident[k]
                    .terms
                    .iter()
                    .zip(&panel.states)
                    .map(|(t, st)| t * phasors[st.applied_index() as usize])
                    .collect()
            })
            .collect()
    }

    fn evaluate_ue(&self, u: usize, tx_mw: f64, noise_dbm: f64, phased: &[Vec<Complex64>]) -> UeRecord {
        let ue = &self.ues[u];
        let s = self.serving[u];
        let direct = self.direct[u][s];
        let np = self.panels.len();
        let (cascaded, ris_distance_m) = match &self.served[u] {
            Some((r, cfg)) => {
                let state = self.ris_ue_state(*r, Stream::RisUe, ue.id as u64, ue.position.xy());
                let out = self.out_leg(*r, ue, &state);
                let applied = applied_with(&self.panels[*r], cfg);
                let g = self.cascade_via(s, *r, &out, &state, &applied);
                let c = self.panels[*r].center();
                let d = (self.layout.wrapped_position(c, ue.position) - c).norm();
                (g.power, Some(d))
            }
            None => (0.0, None),
        };
        let neighbor_direct_mw: f64 = self.direct[u]
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != s)
            .map(|(_, &g)| tx_mw * g)
            .sum();
        let mut cross_ris_mw = 0.0;
        if self.config.cross_ris_interference {
            let serving_panel = self.serving_panel(u);
            let nsites = self.layout.sites.len();
            for r in 0..np {
                if Some(r) == serving_panel {
                    continue;
                }
                let state = self.ris_ue_state(r, Stream::RisUe, ue.id as u64, ue.position.xy());
                let out = self.out_leg(r, ue, &state);
                for site in 0..nsites {
                    let sum: Complex64 = phased[site * np + r].iter().zip(&out.terms).map(|(a, b)| a * b).sum();
                    let p = sum.norm_sqr();
                    for k in 0..3 {
                        let s2 = site * 3 + k;
                        if s2 == s {
                            continue;
                        }
                        let scalar = cascade_scalar(self.bs_gain_db[s2 * np + r], &self.bs_ris[site * np + r], &state);
                        cross_ris_mw += tx_mw * p * scalar;
                    }
                }
            }
        }
        let terms = PowerTerms {
            signal_mw: tx_mw * (direct + cascaded),
            neighbor_direct_mw,
            cross_ris_mw,
        };
        let flags = InterferenceFlags::new(self.config.cross_ris_interference);
        let baseline = PowerTerms {
            signal_mw: tx_mw * direct,
            neighbor_direct_mw,
            cross_ris_mw: 0.0,
        };
        UeRecord {
            ue_id: ue.id,
            sector: s,
            panel_id: self.serving_panel(u),
            position: ue.position,
            direct,
            cascaded,
            rsrp_dbm: compute_rsrp(direct, cascaded, self.config.tx_power_dbm),
            sinr_db: compute_sinr(&terms, flags, noise_dbm),
            ris_distance_m,
            baseline_rsrp_dbm: compute_rsrp(direct, 0.0, self.config.tx_power_dbm),
            baseline_sinr_db: compute_sinr(&baseline, InterferenceFlags::new(false), noise_dbm),
            terms,
        }
    }

    /// RSRP and SINR of every UE.
    pub fn evaluate(&self) -> DropResult {
        let tx_mw = db_to_lin(self.config.tx_power_dbm);
        let noise_dbm = self.config.noise_dbm();
        let phased = if self.config.cross_ris_interference {
            self.phased_incident()
        } else {
            Vec::new()
        };
        let ues = (0..self.ues.len())
            .into_par_iter()
            .map(|u| self.evaluate_ue(u, tx_mw, noise_dbm, &phased))
            .collect();
        DropResult {
            config: self.config.clone(),
            seed: self.seed,
            noise_dbm,
            bss: self.bss.clone(),
            panels: self.panels.iter().map(|p| p.placement.clone()).collect(),
            ues,
        }
    }

    /// RSRP gain of a virtual UE at grid index `(ix, iy)`; 0 dB exactly when
    /// no panel passes the pairing rule.
    pub fn grid_gain_db(&self, ix: i64, iy: i64, step: f64) -> f64 {
        let key = grid_key(ix, iy);
        let p = Vec2::new(ix as f64 * step, iy as f64 * step);
        let ue = ue_node(0, 0, p.with_z(UE_HEIGHT_M));
        let direct: Vec<f64> = self
            .bss
            .iter()
            .map(|bs| {
                let site = self.layout.sectors[bs.sector].site;
                let d2d = self.layout.wrapped_distance(self.layout.sites[site], p);
                let state = link_state(self.seed, Stream::GridDirect, site, key, d2d, UE_HEIGHT_M, self.model.shadowing);
                link_gain_with_state(bs, &ue, &self.layout, &self.model, state).total
            })
            .collect();
        let s = associate(&direct);
        match self.best_candidate(&ue, s, Stream::GridRisUe, key, direct[s]) {
            Some(prop) => lin_to_db(direct[s] + prop.power) - lin_to_db(direct[s]),
            None => 0.0,
        }
    }

    /// RSRP-gain map over every grid point `(ix·step, iy·step)` inside the
    /// layout, optionally restricted to the wedge of one sector.
    pub fn heatmap(&self, step: f64, sector: Option<usize>) -> Result<Vec<HeatPoint>> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(SimError::Config(format!("heat-map step {step} must be positive")));
        }
        if let Some(s) = sector {
            if s >= self.layout.num_sectors() {
                return Err(SimError::Config(format!("sector {s} does not exist")));
            }
        }
        let reach = self.layout.cell_radius();
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for s in &self.layout.sites {
            lo = Vec2::new(lo.x.min(s.x - reach), lo.y.min(s.y - reach));
            hi = Vec2::new(hi.x.max(s.x + reach), hi.y.max(s.y + reach));
        }
        let (ix0, ix1) = ((lo.x / step).floor() as i64, (hi.x / step).ceil() as i64);
        let (iy0, iy1) = ((lo.y / step).floor() as i64, (hi.y / step).ceil() as i64);
        let mut cells = Vec::new();
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let p = Vec2::new(ix as f64 * step, iy as f64 * step);
                if self.layout.in_site_hexagon(p) && sector.is_none_or(|s| self.layout.sector_at(p) == s) {
                    cells.push((ix, iy));
                }
            }
        }
        Ok(cells
            .into_par_iter()
            .map(|(ix, iy)| HeatPoint {
                x_m: ix as f64 * step,
                y_m: iy as f64 * step,
                gain_db: self.grid_gain_db(ix, iy, step),
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatPoint {
    pub x_m: f64,
    pub y_m: f64,
    pub gain_db: f64,
}

/// Runs a full drop.
pub fn run_drop(config: &ScenarioConfig, seed: u64) -> Result<DropResult> {
    Ok(NetworkDrop::prepare(config, seed)?.evaluate())
}

/// Builds a drop and its RSRP-gain map at the configured step.
pub fn heatmap(config: &ScenarioConfig, seed: u64, sector: Option<usize>) -> Result<(NetworkDrop, Vec<HeatPoint>)> {
    let drop = NetworkDrop::prepare(config, seed)?;
    let map = drop.heatmap(config.heatmap_step_m, sector)?;
    Ok((drop, map))
}
