//! Consistent multi-image feature matching.
//!
//! [`quickmatch()`] clusters features from many images so that every cluster
//! holds at most one feature per image. [`distributed`] runs the same
//! algorithm across a simulated network of agents that each own a Voronoi
//! region of feature space. [`eval`] scores clusterings, and [`synth`]
//! generates datasets with known correspondences.

pub mod cli;
pub mod clustering;
pub mod density;
pub mod distributed;
pub mod error;
pub mod eval;
pub mod features;
pub mod partition;
pub mod quickmatch;
pub mod synth;

pub use clustering::{load_clustering, save_clustering, Clustering, Provenance};
pub use density::{build_tree, compute_density, compute_distinctiveness, DensityTree, Distinctiveness, Kernel};
pub use distributed::{distributed_quickmatch, distributed_with_partition, DistributedParams, DistributedRun, Execution};
pub use error::{Error, Result};
pub use features::{distance, load_features, parse_features, save_features, FeatureId, FeatureSet};
pub use partition::{build_partition, Partition, Seeding};
pub use quickmatch::{quickmatch, MatchParams, DEFAULT_RHO};
pub use synth::{generate, SynthConfig, SynthData};
