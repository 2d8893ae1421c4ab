//! Desk-scale domain-generalization laboratory.
//!
//! Exact HΔH-divergence geometry on histogram and finite worlds, target-error
//! bound evaluation, a small manual-backprop network stack, and the
//! source-source DANN trainer with cooperative-example generation.

pub mod bounds;
pub mod dannce;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod nn;
pub mod oracle;
pub mod runner;
pub mod scalar;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Histogram = geometry::HistogramDistribution<f64>;
pub type FiniteDist = geometry::FiniteDistribution<f64>;
pub type Network = nn::DenseNetwork<f64>;
pub type Triple = nn::NetworkTriple<f64>;
pub type Batch = training::LabeledBatch<f64>;
pub type Bound = bounds::BoundReport<f64>;
