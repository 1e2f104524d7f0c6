//! System-level downlink simulator for multi-cell networks aided by
//! reconfigurable intelligent surfaces (RIS).
//!
//! The pipeline of one drop: hexagonal layout with wrap-around, random RIS
//! and UE placement, Urban-Macro large-scale links, near-field coherent
//! summation over RIS elements for the cascaded link, quantized RIS
//! beamforming with optional element failures, and per-UE RSRP/SINR.

pub mod cascaded;
pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod output;
pub mod radio;
pub mod ris;
pub mod rng;
pub mod stats;

pub use error::{Result, SimError};
