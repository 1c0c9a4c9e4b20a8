//! Simulation and analysis toolkit for triple-slit Born-rule null experiments.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`] holds the interference hierarchy (probability rules on path
//!   amplitudes, order-k interference terms, and the ε/δ/ρ statistics).
//! * [`optics`] models the slit plate plus moving opening mask and computes
//!   Fraunhofer amplitudes analytically for each of the eight combinations.
//! * [`systematics`] propagates source power fluctuations and Poisson noise,
//!   and sweeps ρ(u) under mask misalignment and detector nonlinearity.
//! * [`experiment`] runs the virtual counting experiment and aggregates ρ
//!   across repetitions.
//! * [`config`] and [`cli`] provide the plain-text configuration and the
//!   command front end used by the `bornlab` binary.

pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod measure;
pub mod optics;
pub(crate) mod rng;
pub mod systematics;

pub use error::{Error, Result};
pub use measure::{
    epsilon, interference_term, rule_probability, sorkin, Combination, PathAmplitudes, PathSet,
    ProbabilityRule, ProbabilityVector, SorkinResult, DEFAULT_GUARD,
};
pub use num_complex::Complex64;
