//! Corruption-robust Gaussian-process bandits on finite domains.
//!
//! The numerical core is generic over the floating-point type via
//! [`Scalar`] (`f32` or `f64`); the type aliases at the crate root fix it to
//! `f64`, which is what the algorithms are tuned and tested for.

pub mod adversary;
pub mod algorithms;
pub mod audit;
pub mod environment;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod linred;
pub mod posterior;
pub mod scalar;
pub mod trials;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Kernel = kernel::KernelSpec<f64>;
pub type Points = kernel::Domain<f64>;
pub type Dataset = posterior::AggregatedDataset<f64>;
pub type Truth = environment::GroundTruth<f64>;
pub type Trace = environment::RegretTrace<f64>;
pub type Ledger = adversary::AttackLedger<f64>;
pub type Attack = adversary::AttackConfig<f64>;
pub type Basis = linred::NewtonBasis<f64>;
