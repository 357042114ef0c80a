//! Spatial aggregation of energy-system input data.
//!
//! The pipeline groups regions by data similarity under a contiguity
//! constraint, aggregates every attribute over the groups, and reduces each
//! region's renewable plant fleet to a handful of representative plants:
//!
//! 1. [`dataset::load_dataset`] reads a dataset directory.
//! 2. [`dataset::normalize`] and [`distance::pairwise_distances`] build the
//!    region distance matrix.
//! 3. [`connectivity::load_connectivity`] builds the adjacency graph.
//! 4. [`hess::solve`] partitions the regions into `k` connected groups.
//! 5. [`aggregate::aggregate_dataset`] merges the grouped data.
//! 6. [`techagg::apply_to_dataset`] clusters plant fleets.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the common double-precision instantiations.

pub mod aggregate;
pub mod connectivity;
pub mod dataset;
pub mod distance;
pub mod hess;
pub mod matrix;
pub mod scalar;
pub mod synth;
pub mod techagg;

pub use scalar::Scalar;

pub type DatasetF64 = dataset::Dataset<f64>;
pub type NormalizedDatasetF64 = dataset::NormalizedDataset<f64>;
pub type DistanceMatrixF64 = distance::DistanceMatrix<f64>;
pub type GroupingF64 = hess::Grouping<f64>;
pub type TechFleetF64 = techagg::TechFleet<f64>;
pub type TechClusterF64 = techagg::TechCluster<f64>;

pub type DatasetF32 = dataset::Dataset<f32>;
pub type DistanceMatrixF32 = distance::DistanceMatrix<f32>;
pub type GroupingF32 = hess::Grouping<f32>;
