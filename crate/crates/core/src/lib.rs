//! A laboratory for DRX (discontinuous reception) power saving.
//!
//! * [`traffic`]: Poisson and bursty arrival models in the TTI domain.
//! * [`drx`]: the per-device DRX state machine.
//! * [`analytic`]: the semi-Markov model giving power saving and mean delay.
//! * [`sim`]: a TTI-slotted base-station/device co-simulation with standard,
//!   intelligent and genie inactivity-timer handling.
//! * [`optimizer`]: exhaustive and genetic search over DRX parameters under a
//!   mean-delay budget, and the persisted lookup table of results.
//! * [`config`], [`output`], [`experiment`]: the experiment runner behind the
//!   `drxlab` binary.

pub mod analytic;
pub mod config;
pub mod drx;
pub mod error;
pub mod experiment;
pub mod lut;
pub mod optimizer;
pub mod output;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
