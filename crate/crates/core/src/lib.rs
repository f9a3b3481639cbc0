//! Three-photon energy-time entanglement laboratory.
//!
//! * [`gaussian`]: analytic Gaussian tripartite states and mixtures.
//! * [`witness`]: continuous-variable entanglement inequalities and
//!   classification.
//! * [`source`]: Monte Carlo cascaded-downconversion source and detectors.
//! * [`tags`]: time-tag coincidence engine, histograms and timing statistics.
//! * [`pump`]: Fabry-Perot scans of the pump line and bandwidth estimation.
//! * [`cli`]: configuration, reports and the end-to-end commands.

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod pump;
pub mod rng;
pub mod source;
pub mod tags;
pub mod ttag;
pub mod witness;

pub use error::{Error, Result};
