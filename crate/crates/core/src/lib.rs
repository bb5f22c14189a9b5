//! Federated k-means clustering where the per-round centroid updates are
//! summed over a simulated wireless multiple-access channel.
//!
//! Each edge device encodes its local update vector into balanced base-β
//! numerals ([`codec`]), activates one of β resources per numeral, and all
//! devices transmit at once. The server recovers the sum with an energy
//! detector and no channel state information ([`phy`]). [`fed`] runs the
//! full training loop, [`baseline`] is plain centralized k-means,
//! [`scenario`] builds the synthetic shopping-mall dataset and
//! [`experiment`] drives parameter sweeps that write CSV results.

pub mod baseline;
pub mod codec;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fed;
pub mod phy;
pub mod scenario;
pub mod seed;

pub use error::{Error, Result};
