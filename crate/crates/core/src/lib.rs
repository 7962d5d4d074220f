//! Unified cellular / cell-free massive MIMO simulator.
//!
//! `M` antennas are spread over `N_AP` access points with `N_t = M / N_AP`
//! antennas each: one AP is a cellular base station, `M` APs is a fully
//! distributed cell-free network. Large-scale statistics are kept per AP and
//! drive closed-form effective SINRs for matched-filter and zero-forcing
//! uplink detection and conjugate-beamforming and zero-forcing downlink
//! precoding. Link-level simulators in [`uplink`] and [`downlink`] check
//! each closed form against brute-force Monte Carlo.

pub mod channel;
pub mod config;
pub mod downlink;
pub mod error;
pub mod link;
pub mod linalg;
pub mod moments;
pub mod montecarlo;
pub mod power;
pub mod rng;
pub mod scenario;
pub mod sinr;
pub mod stats;
pub mod uplink;

pub use config::{ConfigFile, ExperimentPlan, SimulationConfig};
pub use error::{Error, Result};
pub use montecarlo::{Scheme, SchemeSpec, SEReport};
pub use scenario::LargeScaleState;
pub use sinr::SinrVector;
