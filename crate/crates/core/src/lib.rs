//! Hyperuniform point processes from the fBm-perturbed integer lattice
//! `{n + B_n}`: exact samplers, number-variance scans, structure factor
//! evaluation and mixing checks.

pub mod error;
pub mod ergodicity;
pub mod fgn;
pub mod io;
pub mod pointproc;
pub mod quad;
pub mod rng;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use fgn::{FbmMode, HurstIndex};
pub use pointproc::{ConfigKind, PointConfiguration};
pub use rng::StreamKey;
