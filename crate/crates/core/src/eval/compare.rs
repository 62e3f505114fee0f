use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::features::FeatureId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringComparison {
    /// Same clusters up to relabeling.
    pub exact_equal: bool,
    /// F1 of the same-cluster pair relation, `a` scored against `b`.
    pub pairwise_f1: f64,
    pub pairwise_precision: f64,
    pub pairwise_recall: f64,
    pub true_positive_pairs: u64,
    pub pairs_a: u64,
    pub pairs_b: u64,
    /// Clusters of `a` that are not clusters of `b`.
    pub only_in_a: Vec<Vec<FeatureId>>,
    /// Clusters of `b` that are not clusters of `a`.
    pub only_in_b: Vec<Vec<FeatureId>>,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Compares two clusterings of the same features via the contingency table
/// of their labels. When neither has a same-cluster pair the clusterings
/// agree trivially and F1 is 1.
pub fn compare_clusterings(a: &Clustering, b: &Clustering) -> ClusteringComparison {
    let label_b = b.labels();
    let mut tp = 0u64;
    for cluster in a.clusters() {
        let mut counts: HashMap<Option<usize>, u64> = HashMap::new();
        for id in cluster {
            *counts.entry(label_b.get(id).copied()).or_default() += 1;
        }
        tp += counts
            .iter()
            .filter(|(k, _)| k.is_some())
            .map(|(_, &n)| pairs(n))
            .sum::<u64>();
    }
    let pa: u64 = a.clusters().iter().map(|c| pairs(c.len() as u64)).sum();
    let pb: u64 = b.clusters().iter().map(|c| pairs(c.len() as u64)).sum();
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let pairwise_f1 = if pa + pb == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (pa + pb) as f64
    };

    let set_a: BTreeSet<&Vec<FeatureId>> = a.clusters().iter().collect();
    let set_b: BTreeSet<&Vec<FeatureId>> = b.clusters().iter().collect();
    let only_in_a: Vec<_> = set_a.difference(&set_b).map(|c| (*c).clone()).collect();
    let only_in_b: Vec<_> = set_b.difference(&set_a).map(|c| (*c).clone()).collect();

    ClusteringComparison {
        exact_equal: only_in_a.is_empty() && only_in_b.is_empty(),
        pairwise_f1,
        pairwise_precision: ratio(tp, pa),
        pairwise_recall: ratio(tp, pb),
        true_positive_pairs: tp,
        pairs_a: pa,
        pairs_b: pb,
        only_in_a,
        only_in_b,
    }
}
