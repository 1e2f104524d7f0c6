//! Shared helpers for the integration targets.

#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rissim::geometry::{NodeKind, NodePlacement, Vec3};
use rissim::radio::{LinkState, PatternParams};
use rissim::ris::{PhaseConfig, RisPanel};

/// A random small-panel geometry with arbitrary phases, failures and link states.
pub struct Geometry {
    pub bs: NodePlacement,
    pub ue: NodePlacement,
    pub panel: RisPanel,
    pub bs_ris: LinkState,
    pub ris_ue: LinkState,
    pub fc_ghz: f64,
}

fn node(kind: NodeKind, position: Vec3, azimuth_deg: f64, tilt_deg: f64) -> NodePlacement {
    NodePlacement { kind, id: 0, sector: 0, position, azimuth_deg, tilt_deg }
}

pub fn random_geometry(seed: u64, rows: usize, cols: usize) -> Geometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fc_ghz = rng.random_range(1.0..6.0);
    let bits = rng.random_range(1..=3u32);
    let pos = |rng: &mut ChaCha8Rng, z: std::ops::Range<f64>| {
        Vec3::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0), rng.random_range(z))
    };
    let bs = node(NodeKind::Bs, pos(&mut rng, 20.0..35.0), rng.random_range(-180.0..180.0), rng.random_range(0.0..10.0));
    let ue = node(NodeKind::Ue, pos(&mut rng, 1.0..3.0), 0.0, 0.0);
    let pp = node(NodeKind::Ris, pos(&mut rng, 5.0..30.0), rng.random_range(-180.0..180.0), rng.random_range(-20.0..20.0));
    let mut panel = RisPanel::new(pp, rows, cols, fc_ghz, PatternParams::ris_element(5.0), bits);
    let levels = 1u8 << bits;
    let cfg = PhaseConfig((0..rows * cols).map(|_| rng.random_range(0..levels)).collect());
    panel.set_config(&cfg);
    for s in &mut panel.states {
        if rng.random_bool(0.2) {
            s.failed = true;
            s.failed_index = rng.random_range(0..levels);
        }
    }
    let state = |rng: &mut ChaCha8Rng| LinkState { los: rng.random_bool(0.5), shadow_db: rng.random_range(-10.0..10.0) };
    let bs_ris = state(&mut rng);
    let ris_ue = state(&mut rng);
    Geometry { bs, ue, panel, bs_ris, ris_ue, fc_ghz }
}
