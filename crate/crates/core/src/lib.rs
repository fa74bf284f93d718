//! Geometric phases of discrete quantum trajectories.
//!
//! An open evolution is modelled as a sequence of Kraus channels. Picking one
//! Kraus operator per step gives a trajectory of unnormalized states; each
//! trajectory carries a Pancharatnam phase factor when it starts from a pure
//! state and an Uhlmann holonomy when it starts from a full-rank mixed state.
//!
//! * [`operators`]: complex matrices, Hermitian spectral calculus, phases.
//! * [`channels`]: Kraus channels, presets, representation mixing, dilation.
//! * [`trajectories`]: enumeration and seeded sampling of trajectories.
//! * [`phases`]: Pancharatnam phases, Uhlmann transport and holonomies.
//! * [`interferometry`]: simulated two-arm fringe scans recovering phases.
//! * [`ensemble`]: probability-weighted averages over trajectories.

pub mod channels;
pub mod ensemble;
pub mod error;
pub mod interferometry;
pub mod operators;
pub mod phases;
pub mod random;
pub mod trajectories;

pub use error::{Error, Result};
pub use num_complex::Complex64;
