//! Two-type Lambda-Wright-Fisher processes with frequency-dependent
//! selection, individual and coordinated mutation and random environments,
//! together with their Bernstein coefficient dual.
//!
//! The deterministic parts (rates, operators, distribution laws, generator
//! checks) are generic over [`Scalar`]; the simulators work in `f64` and the
//! aliases below name the concrete types most callers want.

pub mod config;
pub mod distributions;
pub mod dual;
pub mod error;
pub mod forward;
pub mod measures;
pub mod moran;
pub mod num;
pub mod operators;
pub mod selection;
pub mod stats;
pub mod analysis;

pub use error::{Error, Result};
pub use measures::{Allele, AssumptionReport, AtomicMeasure, ModelParams};
pub use num::Scalar;
pub use operators::{CoefficientVector, EventKind};
pub use selection::SelectionKernel;

pub type Model = ModelParams<f64>;
pub type Coefficients = CoefficientVector<f64>;
pub type Kernel = SelectionKernel<f64>;
pub type Measure = AtomicMeasure<f64>;
