//! Sampling and approximate counting of triangle-free graphs drawn from
//! `G(n, p)` conditioned on triangle-freeness.

pub mod anneal;
pub mod cluster;
pub mod defect;
pub mod error;
pub mod glauber_low;
pub mod graph;
pub mod hardcore;
pub mod host;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod poly;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use graph::{EdgeId, Graph};
pub use partition::{Partition, Side};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;
pub type ExactDistributionF64 = oracle::ExactDistribution<f64>;
pub type ExactDistributionQ = oracle::ExactDistribution<Rational>;
pub type TruncatedSeriesF64 = cluster::TruncatedSeries<f64>;
pub type TruncatedSeriesQ = cluster::TruncatedSeries<Rational>;
