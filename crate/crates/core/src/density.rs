//! Distinctiveness, kernel density and the density-ascent tree.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSet};

/// Lower clamp for distinctiveness so kernels stay defined on duplicate features.
pub const SIGMA_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `exp(-|x1 - x2| / (2 sigma^2))`, unsquared norm.
    Gaussian,
    /// `exp(-|x1 - x2|^2 / (2 sigma^2))`.
    GaussianSquared,
    /// `max(0, 1 - (d / sigma)^2)`: finite support, zero at `d = sigma`.
    Quadratic,
    /// `1 - d^2 / sigma` for `d < sigma`, else 0.
    QuadraticAsPrinted,
}

impl Kernel {
    #[inline]
    pub fn eval(self, d: f64, sigma: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-d / (2.0 * sigma * sigma)).exp(),
            Kernel::GaussianSquared => (-d * d / (2.0 * sigma * sigma)).exp(),
            Kernel::Quadratic => {
                let r = d / sigma;
                if r < 1.0 {
                    1.0 - r * r
                } else {
                    0.0
                }
            }
            Kernel::QuadraticAsPrinted => {
                if d < sigma {
                    1.0 - d * d / sigma
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::GaussianSquared => "gaussian-squared",
            Kernel::Quadratic => "quadratic",
            Kernel::QuadraticAsPrinted => "quadratic-as-printed",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "gaussian-squared" => Ok(Kernel::GaussianSquared),
            "quadratic" => Ok(Kernel::Quadratic),
            "quadratic-as-printed" => Ok(Kernel::QuadraticAsPrinted),
            _ => Err(Error::input(format!("unknown kernel {s:?}"))),
        }
    }
}

/// The finite quadratic kernel, `max(0, 1 - (d/sigma)^2)`.
pub fn quadratic_kernel(d: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::input(format!("kernel width must be positive, got {sigma}")));
    }
    Ok(Kernel::Quadratic.eval(d, sigma))
}

/// Per-image distinctiveness `sigma_i`, indexed by dense image index.
#[derive(Debug, Clone, PartialEq)]
pub struct Distinctiveness {
    sigma: Vec<f64>,
}

impl Distinctiveness {
    pub fn from_values(sigma: Vec<f64>) -> Self {
        Self { sigma }
    }

    pub fn sigma(&self, image: usize) -> f64 {
        self.sigma[image]
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }
}

/// `sigma_i` = minimum distance between two features of image `i`.
///
/// Images with fewer than two features take the minimum `sigma` of the other
/// images; if no image has two features, every image gets the minimum
/// pairwise distance over the whole set (1.0 for a single feature). Values
/// are clamped to [`SIGMA_MIN`].
pub fn compute_distinctiveness(fs: &FeatureSet) -> Result<Distinctiveness> {
    if fs.is_empty() {
        return Err(Error::input("distinctiveness of an empty feature set"));
    }
    let groups = fs.rows_by_image();
    let own: Vec<Option<f64>> = groups
        .par_iter()
        .map(|rows| min_pairwise(fs, rows))
        .collect();
    let fallback = own
        .iter()
        .flatten()
        .copied()
        .reduce(f64::min)
        .or_else(|| min_pairwise(fs, &(0..fs.len()).collect::<Vec<_>>()))
        .unwrap_or(1.0);
    let sigma = own
        .into_iter()
        .map(|s| s.unwrap_or(fallback).max(SIGMA_MIN))
        .collect();
    Ok(Distinctiveness { sigma })
}

fn min_pairwise(fs: &FeatureSet, rows: &[usize]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (n, &a) in rows.iter().enumerate() {
        for &b in &rows[n + 1..] {
            let d = fs.dist(a, b);
            best = Some(best.map_or(d, |m| m.min(d)));
        }
    }
    best
}

/// `D(x) = sum over all features x_ik of h(x, x_ik; sigma_i)`, self term
/// included.
pub fn compute_density(fs: &FeatureSet, dist: &Distinctiveness, kernel: Kernel) -> Vec<f64> {
    (0..fs.len())
        .into_par_iter()
        .map(|x| {
            (0..fs.len())
                .map(|j| kernel.eval(fs.dist(x, j), dist.sigma(fs.image(j))))
                .sum()
        })
        .collect()
}

/// Forest of parent pointers along ascending density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTree {
    pub parent: Vec<Option<usize>>,
    pub edge_length: Vec<Option<f64>>,
    pub density: Vec<f64>,
}

impl DensityTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(r, p)| p.is_none().then_some(r))
    }

    pub fn parent_id(&self, fs: &FeatureSet, row: usize) -> Option<FeatureId> {
        self.parent[row].map(|p| fs.id(p))
    }

    /// Edges `(child, parent, length)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.parent
            .iter()
            .zip(&self.edge_length)
            .enumerate()
            .filter_map(|(c, (p, l))| Some((c, (*p)?, (*l)?)))
    }
}

/// Total order used for the "strictly higher density" test: density first,
/// then feature id.
#[inline]
pub(crate) fn density_order(fs: &FeatureSet, density: &[f64], a: usize, b: usize) -> Ordering {
    density[a]
        .total_cmp(&density[b])
        .then_with(|| fs.id(a).cmp(&fs.id(b)))
}

/// Parent of every feature: the nearest feature that ranks strictly higher
/// under `density_order`, with distance ties going to the lower id. The
/// single top-ranked feature of a non-empty set is the root.
pub fn build_tree(fs: &FeatureSet, density: &[f64]) -> DensityTree {
    assert_eq!(density.len(), fs.len(), "one density per feature");
    let links: Vec<Option<(usize, f64)>> = (0..fs.len())
        .into_par_iter()
        .map(|x| {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..fs.len() {
                if density_order(fs, density, j, x) != Ordering::Greater {
                    continue;
                }
                let d = fs.dist(x, j);
                let better = match best {
                    None => true,
                    Some((b, bd)) => d < bd || (d == bd && fs.id(j) < fs.id(b)),
                };
                if better {
                    best = Some((j, d));
                }
            }
            best
        })
        .collect();
    DensityTree {
        parent: links.iter().map(|l| l.map(|(p, _)| p)).collect(),
        edge_length: links.iter().map(|l| l.map(|(_, d)| d)).collect(),
        density: density.to_vec(),
    }
}
