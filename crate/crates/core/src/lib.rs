//! Single-tone discovery signals for device-to-device overlays on an OFDMA
//! uplink.
//!
//! A device announces its temporary discovery ID (TDID) by energizing one
//! subcarrier per OFDM symbol. The sequence of subcarrier indices is a
//! codeword of a maximum-distance-separable code built from a Galois-field
//! transform over a prime field, which lets a receiver pull many superposed
//! signals apart, tolerate missed and false tones, and read off integer
//! frequency offsets.
//!
//! Modules, bottom-up:
//!
//! - [`galois`]: prime-field arithmetic and the forward/inverse transform pair.
//! - [`codec`]: TDID encoding, classification, multi-signal lookup decoding.
//! - [`phy`]: tone grid synthesis, energy detection, punctured uplink link.
//! - [`mac`]: discovery schedule, TDID acquisition, neighbor lists.
//! - [`net`]: topology, path loss, baselines, mode/relay selection.

pub mod codec;
pub mod error;
pub mod galois;
pub mod mac;
pub mod net;
pub mod phy;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
