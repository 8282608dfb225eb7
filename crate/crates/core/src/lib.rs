//! Random walk ranges, unions of subcritical percolation clusters along a walk, and discrete
//! capacity on lattices and a few special infinite graphs.

pub mod capacity;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod oracle;
pub mod parallel;
pub mod percolation;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod union;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{Edge, GraphFamily, MaxDegree, VertexId};
pub use percolation::{explore_cluster, Cluster, PercolationConfig};
pub use scalar::Real;
pub use stats::BatchStats;

pub type BatchStatsF64 = BatchStats<f64>;
pub type BatchStatsF32 = BatchStats<f32>;
pub type ExactRational = num_rational::BigRational;
pub type CapacityEstimateF64 = capacity::CapacityEstimate<f64>;
pub type CapacityEstimateF32 = capacity::CapacityEstimate<f32>;
