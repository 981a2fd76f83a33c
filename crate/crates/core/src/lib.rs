//! Analysis and simulation of the listen-and-talk (LAT) protocol for
//! full-duplex cognitive radio.
//!
//! A secondary user (SU) senses a licensed channel with one antenna while
//! transmitting on it with another. Residual self-interference (RSI) from
//! its own transmission degrades sensing, which couples transmit power to
//! both the collision ratio imposed on the primary user (PU) and the
//! fraction of spectrum holes the SU wastes.
//!
//! * [`traffic`]: the PU's exponential busy/idle process.
//! * [`sensing`]: energy-detector error probabilities and threshold design.
//! * [`markov`]: the four-state utilization chain, collision and waste ratios.
//! * [`power`]: throughput, its derivative and the optimal transmit power.
//! * [`sim`]: Monte Carlo validation of the closed forms.
//! * [`experiment`]: presets, sweeps and CSV tables used by the `latcr` tool.

pub mod error;
pub mod experiment;
pub mod markov;
pub mod power;
pub mod sensing;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
