//! Counter-based keyed random streams.
//!
//! Every random quantity in a drop is drawn from a stream keyed by
//! `(seed, stream kind, a, b)`. Results therefore do not depend on the order
//! in which links are evaluated or on how many worker threads are used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifies what a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    PanelDrop = 1,
    UeDrop = 2,
    /// BS site to UE: LOS state and shadowing.
    Direct = 3,
    /// BS site to RIS panel hop.
    BsRis = 4,
    /// RIS panel to UE hop.
    RisUe = 5,
    /// Element failure flags and frozen phases of one panel.
    Failure = 6,
    /// BS site to a heat-map grid point.
    GridDirect = 7,
    /// RIS panel to a heat-map grid point.
    GridRisUe = 8,
}

/// Builds the generator for one keyed stream.
pub fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Packs a signed 2D grid index into one stream key.
pub fn grid_key(ix: i64, iy: i64) -> u64 {
    ((ix as i32 as u32 as u64) << 32) | (iy as i32 as u32 as u64)
}
