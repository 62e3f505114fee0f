//! Voronoi partition of feature space among agents.
//!
//! Seeds come from Lloyd's k-means or from a shared integer RNG seed. The
//! distance from a point to the boundary with another agent's region is the
//! distance to the bisector hyperplane of the two seeds, which is the exact
//! solution of the single-constraint projection QP
//!
//! ```text
//! min |x_t - x|^2   s.t.   u . (x - P_t) - |P_e - P_t| / 2 >= 0,   u = (P_e - P_t) / |P_e - P_t|
//! ```

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{euclidean, FeatureId, FeatureSet};

pub const KMEANS_MAX_ITERATIONS: usize = 100;

/// Half-width added to any zero-extent dimension of a bounding box.
pub const BOX_WIDEN: f64 = 1e-6;

/// The portable generator used for every seeded draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    KMeans,
    Random,
}

impl fmt::Display for Seeding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Seeding::KMeans => "kmeans",
            Seeding::Random => "random",
        })
    }
}

impl FromStr for Seeding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Seeding::KMeans),
            "random" => Ok(Seeding::Random),
            _ => Err(Error::input(format!("unknown seeding {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub seeds: Vec<Vec<f64>>,
    /// Feature ids in the row order of the partitioned set.
    pub ids: Vec<FeatureId>,
    /// Agent of each row: `l(x_ik, 0)`.
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistance {
    pub d_min: f64,
    pub nearest_other: usize,
    pub x_min: Vec<f64>,
}

impl Partition {
    /// Assigns every feature of `fs` to its nearest seed.
    pub fn from_seeds(fs: &FeatureSet, seeds: Vec<Vec<f64>>) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::input("a partition needs at least one seed"));
        }
        if let Some(s) = seeds.iter().find(|s| s.len() != fs.dim()) {
            return Err(Error::input(format!(
                "seed has {} components, features have {}",
                s.len(),
                fs.dim()
            )));
        }
        let assignment = fs.rows().map(|x| nearest(&seeds, x)).collect();
        Ok(Self {
            seeds,
            ids: fs.ids().to_vec(),
            assignment,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.seeds.len()
    }

    /// Nearest seed, ties to the lower agent index.
    pub fn nearest_seed(&self, x: &[f64]) -> usize {
        nearest(&self.seeds, x)
    }

    pub fn labels(&self) -> HashMap<FeatureId, usize> {
        self.ids.iter().copied().zip(self.assignment.iter().copied()).collect()
    }

    /// Rows owned by each agent, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.agent_count()];
        for (row, &a) in self.assignment.iter().enumerate() {
            out[a].push(row);
        }
        out
    }

    /// Signed distance from `x` to the bisector of seeds `t` and `e`,
    /// positive on the `t` side.
    pub fn bisector_distance(&self, x: &[f64], t: usize, e: usize) -> f64 {
        let (pt, pe) = (&self.seeds[t], &self.seeds[e]);
        let sep = euclidean(pt, pe);
        let proj: f64 = x
            .iter()
            .zip(pt)
            .zip(pe)
            .map(|((xv, tv), ev)| (ev - tv) * (xv - tv))
            .sum::<f64>()
            / sep;
        sep / 2.0 - proj
    }

    /// Closest point to `x_t` on the boundary between its region and agent
    /// `e`'s region.
    pub fn boundary_distance(&self, x_t: &[f64], e: usize) -> Result<BoundaryDistance> {
        if e >= self.agent_count() {
            return Err(Error::input(format!("agent {e} out of range")));
        }
        let t = self.nearest_seed(x_t);
        if e == t {
            return Err(Error::input(format!("point already lies in region {e}")));
        }
        let d_min = self.bisector_distance(x_t, t, e).max(0.0);
        let (pt, pe) = (&self.seeds[t], &self.seeds[e]);
        let sep = euclidean(pt, pe);
        let x_min = x_t
            .iter()
            .zip(pt)
            .zip(pe)
            .map(|((xv, tv), ev)| xv + d_min * (ev - tv) / sep)
            .collect();
        Ok(BoundaryDistance {
            d_min,
            nearest_other: e,
            x_min,
        })
    }

    /// Minimum boundary distance over every other agent, with that agent.
    /// `(+inf, None)` when there is only one agent.
    pub fn min_boundary_distance(&self, x_t: &[f64]) -> (f64, Option<usize>) {
        let t = self.nearest_seed(x_t);
        let mut best = (f64::INFINITY, None);
        for e in (0..self.agent_count()).filter(|&e| e != t) {
            let d = self.bisector_distance(x_t, t, e).max(0.0);
            if d < best.0 {
                best = (d, Some(e));
            }
        }
        best
    }
}

fn nearest(seeds: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (a, s) in seeds.iter().enumerate() {
        let d = euclidean(s, x);
        if d < best.1 {
            best = (a, d);
        }
    }
    best.0
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means seeds. See [`kmeans_with_trace`].
pub fn kmeans_seeds(fs: &FeatureSet, m: usize, seed: u64) -> Result<Partition> {
    kmeans_with_trace(fs, m, seed).map(|(p, _)| p)
}

/// Lloyd's iterations from `m` distinct features drawn with `seed`, at most
/// [`KMEANS_MAX_ITERATIONS`] rounds, stopping early at a fixed point. An
/// empty cluster is re-seeded at the feature farthest from its current seed.
///
/// Also returns the objective (sum of squared distances to assigned seeds)
/// after every assignment step.
pub fn kmeans_with_trace(fs: &FeatureSet, m: usize, seed: u64) -> Result<(Partition, Vec<f64>)> {
    if m == 0 {
        return Err(Error::input("agent count must be at least 1"));
    }
    if m > fs.len() {
        return Err(Error::input(format!(
            "{m} agents but only {} features",
            fs.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..fs.len()).collect();
    order.shuffle(&mut rng);
    let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &r in &order {
        if seeds.len() == m {
            break;
        }
        if !seeds.iter().any(|s| s.as_slice() == fs.row(r)) {
            seeds.push(fs.row(r).to_vec());
        }
    }
    if seeds.len() < m {
        return Err(Error::input(format!(
            "{m} agents but only {} distinct feature vectors",
            seeds.len()
        )));
    }

    let dim = fs.dim();
    let mut assignment: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..KMEANS_MAX_ITERATIONS {
        let next: Vec<usize> = fs.rows().map(|x| nearest(&seeds, x)).collect();
        trace.push(
            fs.rows()
                .zip(&next)
                .map(|(x, &a)| sq(x, &seeds[a]))
                .sum::<f64>(),
        );
        if next == assignment {
            break;
        }
        assignment = next;

        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (x, &a) in fs.rows().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut taken = vec![false; fs.len()];
        for a in 0..m {
            if counts[a] > 0 {
                continue;
            }
            let far = (0..fs.len())
                .filter(|&r| !taken[r])
                .map(|r| (r, sq(fs.row(r), &seeds[assignment[r]])))
                .fold(None, |best: Option<(usize, f64)>, (r, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((r, d)),
                })
                .expect("m <= feature count");
            taken[far.0] = true;
            sums[a] = fs.row(far.0).to_vec();
            counts[a] = 1;
        }
        for a in 0..m {
            let n = counts[a] as f64;
            seeds[a] = sums[a].iter().map(|s| s / n).collect();
        }
    }
    Ok((Partition::from_seeds(fs, seeds)?, trace))
}

/// `m` seeds drawn uniformly from the bounding box; any zero-width dimension
/// is widened by [`BOX_WIDEN`] on each side.
pub fn random_seed_points(bounds: &[(f64, f64)], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::input("agent count must be at least 1"));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::input("bounding box must be finite with lo <= hi"));
    }
    let bounds: Vec<(f64, f64)> = bounds
        .iter()
        .map(|&(lo, hi)| if hi > lo { (lo, hi) } else { (lo - BOX_WIDEN, hi + BOX_WIDEN) })
        .collect();
    let mut rng = rng_from_seed(seed);
    Ok((0..m)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect()
        })
        .collect())
}

pub fn random_seeds(fs: &FeatureSet, m: usize, seed: u64) -> Result<Partition> {
    if fs.is_empty() {
        return Err(Error::input("cannot partition an empty feature set"));
    }
    Partition::from_seeds(fs, random_seed_points(&fs.bounds(), m, seed)?)
}

pub fn build_partition(fs: &FeatureSet, m: usize, seeding: Seeding, seed: u64) -> Result<Partition> {
    match seeding {
        Seeding::KMeans => kmeans_seeds(fs, m, seed),
        Seeding::Random => random_seeds(fs, m, seed),
    }
}
