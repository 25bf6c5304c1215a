//! Speed limits on Hilbert-space dynamics.
//!
//! Classical Liouville flow, Fokker-Planck relaxation, detailed-balance master
//! equations and finite-dimensional quantum evolution are all expressed as a
//! self-adjoint generator acting on a weighted inner-product space. The
//! [`bounds`] module turns overlap curves and generator moments into lower
//! bounds on elapsed time; [`scenario`] drives whole runs from a config file.

pub mod bounds;
pub mod error;
pub mod fd;
pub mod fokker_planck;
pub mod hilbert;
pub mod liouville;
pub mod master;
pub mod quantum;
pub mod scenario;

pub use error::{Error, Result};
