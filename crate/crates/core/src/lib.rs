//! Laser Doppler holography processing: hologram reconstruction, short-time
//! Doppler spectra, SVD clutter filtering, band-limited power Doppler
//! movies, composite rendering and a synthetic-scene simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod composite;
pub mod doppler;
pub mod error;
mod fft2;
pub mod model;
pub mod pipeline;
pub mod reconstruct;
pub mod simulator;
pub mod stack;
pub mod stats;
pub mod stft;
pub mod svdfilter;

pub use band::{band_bins, Band};
pub use error::{Error, Result};
pub use model::{PowerDopplerMovie, RoiMask, SpectralCube};
pub use reconstruct::CarrierSpec;
pub use stack::{read_stack, write_stack, DType, FrameStack, HologramStack, Stack, StackMeta};
pub use stft::{Apodization, StftPlan, Window};
pub use svdfilter::SvdFilterSpec;
