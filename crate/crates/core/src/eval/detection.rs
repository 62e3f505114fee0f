//! Object-detection experiment: which images show the reference object?
//!
//! A world holds an object (a set of landmark descriptors) and a background
//! of other landmarks, some of which resemble object landmarks closely, the
//! way windows on a facade resemble each other. Reference images show the
//! whole object. Positive images show part of the object, part of the
//! background and random clutter; negative images show background and
//! clutter only. Every observation is a noisy copy of its landmark.
//!
//! An image is detected when the number of its features matched to the
//! reference images is above a threshold. QuickMatch counts features that
//! share a cluster with a reference feature; the pairwise baseline counts
//! features that pass the ratio test against at least one reference image.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::baseline::{ratio_match, RatioTest};
use super::pr::{default_thresholds, pr_curve, PRCurve};
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSet};
use crate::partition::rng_from_seed;
use crate::quickmatch::{quickmatch, MatchParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Landmarks on the object.
    pub object: usize,
    /// Background landmarks. The first `lookalikes` of them each sit
    /// `lookalike_gap` away from an object landmark.
    pub background: usize,
    pub lookalikes: usize,
    pub lookalike_gap: f64,
    /// Images of the whole object that define what is searched for.
    pub references: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Uniform random features added to every non-reference image.
    pub clutter: usize,
    pub dim: usize,
    /// Std of the observation noise on every landmark observation.
    pub spread: f64,
    /// Probability that an object landmark shows in a positive image.
    pub object_visibility: f64,
    /// Probability that a background landmark shows in a non-reference image.
    pub background_visibility: f64,
    /// Side of the cube landmarks and clutter are drawn from.
    pub extent: f64,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            object: 20,
            background: 20,
            lookalikes: 10,
            lookalike_gap: 2.0,
            references: 3,
            positives: 20,
            negatives: 20,
            clutter: 10,
            dim: 8,
            spread: 0.3,
            object_visibility: 0.3,
            background_visibility: 0.5,
            extent: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionData {
    pub features: FeatureSet,
    /// Image ids `0..references` are the reference images.
    pub references: usize,
    /// Ground truth of the query images, which carry ids
    /// `references..references + is_positive.len()` in order.
    pub is_positive: Vec<bool>,
}

pub fn detection_dataset(cfg: &DetectionConfig) -> Result<DetectionData> {
    if !(cfg.spread > 0.0 && cfg.spread.is_finite()) {
        return Err(Error::input(format!("spread must be positive, got {}", cfg.spread)));
    }
    if !(cfg.lookalike_gap > 0.0 && cfg.lookalike_gap.is_finite()) {
        return Err(Error::input("look-alike gap must be positive"));
    }
    for p in [cfg.object_visibility, cfg.background_visibility] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input("visibilities must lie in [0, 1]"));
        }
    }
    if cfg.object == 0 || cfg.references == 0 || cfg.positives == 0 || cfg.dim == 0 {
        return Err(Error::input("object, references, positives and dim must be at least 1"));
    }
    if cfg.lookalikes > cfg.background.min(cfg.object) {
        return Err(Error::input("more look-alikes than background or object landmarks"));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let noise = Normal::new(0.0, cfg.spread).map_err(|e| Error::input(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let uniform = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..cfg.dim).map(|_| rng.random_range(0.0..cfg.extent)).collect()
    };

    let object: Vec<Vec<f64>> = (0..cfg.object).map(|_| uniform(&mut rng)).collect();
    let background: Vec<Vec<f64>> = (0..cfg.background)
        .map(|b| {
            if b < cfg.lookalikes {
                let dir: Vec<f64> = (0..cfg.dim).map(|_| unit.sample(&mut rng)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                object[b]
                    .iter()
                    .zip(&dir)
                    .map(|(o, d)| o + cfg.lookalike_gap * d / norm)
                    .collect()
            } else {
                uniform(&mut rng)
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut emit = |img: usize, feats: Vec<Vec<f64>>| {
        for (k, v) in feats.into_iter().enumerate() {
            rows.push((FeatureId::new(img as u64, k as u64), v));
        }
    };
    let observe = |rng: &mut rand_chacha::ChaCha8Rng, v: &[f64]| -> Vec<f64> {
        v.iter().map(|&x| x + noise.sample(rng)).collect()
    };
    for r in 0..cfg.references {
        let feats = object.iter().map(|v| observe(&mut rng, v)).collect();
        emit(r, feats);
    }
    let mut is_positive = Vec::new();
    for q in 0..cfg.positives + cfg.negatives {
        let positive = q < cfg.positives;
        let mut feats = Vec::new();
        if positive {
            for v in &object {
                if rng.random_bool(cfg.object_visibility) {
                    feats.push(observe(&mut rng, v));
                }
            }
        }
        for v in &background {
            if rng.random_bool(cfg.background_visibility) {
                feats.push(observe(&mut rng, v));
            }
        }
        for _ in 0..cfg.clutter {
            feats.push(uniform(&mut rng));
        }
        emit(cfg.references + q, feats);
        is_positive.push(positive);
    }
    Ok(DetectionData {
        features: FeatureSet::new(cfg.dim, rows)?,
        references: cfg.references,
        is_positive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub quickmatch_counts: Vec<f64>,
    pub baseline_counts: Vec<f64>,
    pub quickmatch: PRCurve,
    pub baseline: PRCurve,
}

/// Per query image, the number of its features that share a QuickMatch
/// cluster with some reference feature.
pub fn quickmatch_counts(data: &DetectionData, params: &MatchParams) -> Result<Vec<f64>> {
    let clustering = quickmatch(&data.features, params)?;
    let refs = data.references as u64;
    let mut counts = vec![0.0; data.is_positive.len()];
    for cluster in clustering.clusters() {
        if cluster.iter().any(|id| id.image < refs) {
            for id in cluster.iter().filter(|id| id.image >= refs) {
                counts[(id.image - refs) as usize] += 1.0;
            }
        }
    }
    Ok(counts)
}

/// Per query image, the number of its features that pass the ratio test
/// against at least one reference image.
pub fn baseline_counts(data: &DetectionData, test: &RatioTest) -> Vec<f64> {
    let fs = &data.features;
    let by_image = |img: u64| -> Vec<&[f64]> {
        (0..fs.len())
            .filter(|&r| fs.id(r).image == img)
            .map(|r| fs.row(r))
            .collect()
    };
    let references: Vec<Vec<&[f64]>> = (0..data.references as u64).map(by_image).collect();
    (0..data.is_positive.len())
        .map(|q| {
            let query = by_image((data.references + q) as u64);
            let mut matched = vec![false; query.len()];
            for train in &references {
                for m in ratio_match(&query, train, test) {
                    matched[m.query] = true;
                }
            }
            matched.iter().filter(|&&b| b).count() as f64
        })
        .collect()
}

pub fn run_detection(
    cfg: &DetectionConfig,
    params: &MatchParams,
    test: &RatioTest,
) -> Result<DetectionResult> {
    let data = detection_dataset(cfg)?;
    let qm = quickmatch_counts(&data, params)?;
    let bl = baseline_counts(&data, test);
    Ok(DetectionResult {
        quickmatch: pr_curve(&qm, &data.is_positive, &default_thresholds(&qm))?,
        baseline: pr_curve(&bl, &data.is_positive, &default_thresholds(&bl))?,
        quickmatch_counts: qm,
        baseline_counts: bl,
    })
}
