//! Match-quality metrics, clustering comparison, and the pairwise baseline.

pub mod baseline;
pub mod compare;
pub mod detection;
pub mod pr;
pub mod split;

pub use baseline::{baseline_ratio_match, ratio_match, PairMatch, RatioTest, DEFAULT_RATIO};
pub use compare::{compare_clusterings, ClusteringComparison};
pub use detection::{run_detection, DetectionConfig, DetectionResult};
pub use pr::{default_thresholds, pr_curve, PRCurve, PRPoint};
pub use split::{split_quality, SplitReport};
