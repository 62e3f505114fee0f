//! Synthetic multi-image datasets with known correspondences.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::{Clustering, Provenance};
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSet};
use crate::partition::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_clusters: usize,
    /// Samples per cluster. Sample `j` of every cluster lands in image `j`.
    pub per_cluster: usize,
    pub dim: usize,
    /// Gaussian standard deviation around each center.
    pub spread: f64,
    /// Side of the square the center grid spans.
    pub extent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clusters: 25,
            per_cluster: 10,
            dim: 2,
            spread: 0.25,
            extent: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub features: FeatureSet,
    pub truth: Clustering,
    /// Ground-truth cluster of every feature, in feature-set row order.
    pub labels: Vec<usize>,
}

/// Centers on an evenly spaced grid covering `[0, extent]` in the first two
/// coordinates (first one only when `dim == 1`); further coordinates sit at
/// the middle of the range.
pub fn grid_centers(n: usize, dim: usize, extent: f64) -> Vec<Vec<f64>> {
    let axes = dim.min(2);
    let side = if axes == 1 {
        n
    } else {
        (n as f64).sqrt().ceil() as usize
    };
    let step = |k: usize| {
        if side <= 1 {
            extent / 2.0
        } else {
            extent * k as f64 / (side - 1) as f64
        }
    };
    (0..n)
        .map(|c| {
            let mut v = vec![extent / 2.0; dim];
            if axes == 1 {
                v[0] = step(c);
            } else {
                v[0] = step(c % side);
                v[1] = step(c / side);
            }
            v
        })
        .collect()
}

/// Gaussian blobs on a grid. Feature `(j, c)` is sample `j` of cluster `c`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if !(cfg.spread > 0.0 && cfg.spread.is_finite()) {
        return Err(Error::input(format!("spread must be positive, got {}", cfg.spread)));
    }
    if cfg.n_clusters == 0 || cfg.per_cluster == 0 || cfg.dim == 0 {
        return Err(Error::input("n_clusters, per_cluster and dim must be at least 1"));
    }
    if !(cfg.extent > 0.0 && cfg.extent.is_finite()) {
        return Err(Error::input(format!("extent must be positive, got {}", cfg.extent)));
    }
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = rng_from_seed(cfg.seed);
    let centers = grid_centers(cfg.n_clusters, cfg.dim, cfg.extent);
    let mut rows = Vec::with_capacity(cfg.n_clusters * cfg.per_cluster);
    let mut clusters = Vec::with_capacity(cfg.n_clusters);
    for (c, center) in centers.iter().enumerate() {
        let mut members = Vec::with_capacity(cfg.per_cluster);
        for j in 0..cfg.per_cluster {
            let id = FeatureId::new(j as u64, c as u64);
            let v: Vec<f64> = center.iter().map(|&x| x + noise.sample(&mut rng)).collect();
            rows.push((id, v));
            members.push(id);
        }
        clusters.push(members);
    }
    let features = FeatureSet::new(cfg.dim, rows)?;
    let labels = features.ids().iter().map(|id| id.index as usize).collect();
    let truth = Clustering::new(
        clusters,
        Provenance::new("ground-truth")
            .with("n_clusters", cfg.n_clusters)
            .with("per_cluster", cfg.per_cluster)
            .with("spread", cfg.spread)
            .with("seed", cfg.seed),
    );
    Ok(SynthData {
        features,
        truth,
        labels,
    })
}
