//! Kernel-based impulse response estimation with amplitude-modulated
//! locally stationary (AMLS) and simulation-induced (SI) kernels.

pub mod analysis;
pub mod benchmark;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod linalg;
pub mod statespace;

pub use error::{Error, Result};
pub use kernel::{gram, DecayEnvelope, HyperParams, KernelSpec, StationaryCorr};
pub use statespace::{SecondOrderNominal, StateSpaceModel};
