use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::features::FeatureId;
use crate::partition::Partition;

/// How a partition splits the clusters of a clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// `Q(C_c)`: largest single-agent share of each cluster, in the
    /// clustering's canonical order.
    pub q: Vec<f64>,
    /// Fraction of clusters with `Q < 1`.
    pub p_contested: f64,
    pub contested_cluster_count: usize,
    /// Features in clusters with `Q < 1`.
    pub split_feature_count: usize,
    /// `|S_A| / split_feature_count`, uncapped. Needs a detected set.
    pub p_split: Option<f64>,
    /// `|S_A ∩ split features| / split_feature_count`: the share of truly
    /// split features the detector caught.
    pub contested_recall: Option<f64>,
}

/// Per-agent membership counts `q_a(C_c)` of one cluster.
pub fn agent_counts(cluster: &[FeatureId], labels: &HashMap<FeatureId, usize>, agents: usize) -> Vec<usize> {
    let mut q = vec![0; agents];
    for id in cluster {
        q[labels[id]] += 1;
    }
    q
}

pub fn split_quality(
    clustering: &Clustering,
    partition: &Partition,
    detected: Option<&BTreeSet<FeatureId>>,
) -> Result<SplitReport> {
    let labels = partition.labels();
    if labels.len() != clustering.feature_count()
        || clustering.clusters().iter().flatten().any(|id| !labels.contains_key(id))
    {
        return Err(Error::input(
            "clustering and partition cover different feature sets",
        ));
    }
    let m = partition.agent_count();
    let mut q = Vec::with_capacity(clustering.len());
    let mut split: BTreeSet<FeatureId> = BTreeSet::new();
    for cluster in clustering.clusters() {
        let counts = agent_counts(cluster, &labels, m);
        let share = *counts.iter().max().unwrap() as f64 / cluster.len() as f64;
        if share < 1.0 {
            split.extend(cluster.iter().copied());
        }
        q.push(share);
    }
    let contested_cluster_count = q.iter().filter(|&&v| v < 1.0).count();
    let p_contested = if q.is_empty() {
        0.0
    } else {
        contested_cluster_count as f64 / q.len() as f64
    };
    let denom = split.len();
    let (p_split, contested_recall) = match detected {
        Some(s) if denom > 0 => (
            Some(s.len() as f64 / denom as f64),
            Some(s.intersection(&split).count() as f64 / denom as f64),
        ),
        _ => (None, None),
    };
    Ok(SplitReport {
        q,
        p_contested,
        contested_cluster_count,
        split_feature_count: denom,
        p_split,
        contested_recall,
    })
}
