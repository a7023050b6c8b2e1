//! Numerical laboratory for Wasserstein convergence of empirical measures of
//! dependent sequences.

pub mod bounds;
pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod transfer_operator;
pub mod transport;

pub use distributions::{Observable, ReferenceLaw};
pub use error::{Error, Result};
pub use transport::{EmpiricalMeasure, TransportCost};
