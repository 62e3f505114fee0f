//! Centralized QuickMatch: density tree plus the merge-or-break pass.

use serde::{Deserialize, Serialize};

use crate::clustering::{Clustering, Provenance};
use crate::density::{build_tree, compute_density, compute_distinctiveness, DensityTree, Distinctiveness, Kernel};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

pub const DEFAULT_RHO: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Merge threshold multiplier on distinctiveness.
    pub rho: f64,
    pub kernel: Kernel,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            kernel: Kernel::Gaussian,
        }
    }
}

impl MatchParams {
    pub fn new(rho: f64, kernel: Kernel) -> Result<Self> {
        let p = Self { rho, kernel };
        p.check()?;
        Ok(p)
    }

    /// `rho` must be non-negative; `+inf` disables the distance criterion.
    pub fn check(&self) -> Result<()> {
        if self.rho.is_nan() || self.rho < 0.0 {
            return Err(Error::input(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }

    pub(crate) fn provenance(&self, algorithm: &str) -> Provenance {
        let rho = if self.rho.is_finite() {
            serde_json::Value::from(self.rho)
        } else {
            serde_json::Value::from("inf")
        };
        Provenance::new(algorithm)
            .with("rho", rho)
            .with("kernel", self.kernel.name())
    }
}

/// Disjoint-set forest carrying each cluster's image set and its minimum
/// distinctiveness.
struct Clusters {
    parent: Vec<usize>,
    images: Vec<Vec<usize>>,
    min_sigma: Vec<f64>,
}

impl Clusters {
    fn new(fs: &FeatureSet, dist: &Distinctiveness) -> Self {
        let n = fs.len();
        Self {
            parent: (0..n).collect(),
            images: (0..n).map(|r| vec![fs.image(r)]).collect(),
            min_sigma: (0..n).map(|r| dist.sigma(fs.image(r))).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn disjoint_images(&self, a: usize, b: usize) -> bool {
        // both sorted
        let (mut i, mut j) = (0, 0);
        let (x, y) = (&self.images[a], &self.images[b]);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    fn union(&mut self, a: usize, b: usize) {
        let (big, small) = if self.images[a].len() >= self.images[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        let moved = std::mem::take(&mut self.images[small]);
        let mut merged = Vec::with_capacity(self.images[big].len() + moved.len());
        let (mut i, mut j) = (0, 0);
        let x = &self.images[big];
        while i < x.len() || j < moved.len() {
            if j == moved.len() || (i < x.len() && x[i] < moved[j]) {
                merged.push(x[i]);
                i += 1;
            } else {
                merged.push(moved[j]);
                j += 1;
            }
        }
        self.images[big] = merged;
        self.min_sigma[big] = self.min_sigma[big].min(self.min_sigma[small]);
        self.parent[small] = big;
    }

    fn groups(mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for r in 0..n {
            let root = self.find(r);
            by_root[root].push(r);
        }
        by_root.into_iter().filter(|g| !g.is_empty()).collect()
    }
}

/// Row-index clusters from one merge-or-break pass over the tree edges.
///
/// Edges are visited shortest first (equal lengths: lower child id first).
/// The endpoint clusters merge iff their image sets are disjoint and the edge
/// is no longer than `rho` times the smallest `sigma_i` over the images in
/// either cluster.
pub fn merge_rows(
    fs: &FeatureSet,
    tree: &DensityTree,
    dist: &Distinctiveness,
    rho: f64,
) -> Vec<Vec<usize>> {
    let mut edges: Vec<(usize, usize, f64)> = tree.edges().collect();
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| fs.id(a.0).cmp(&fs.id(b.0))));
    let mut clusters = Clusters::new(fs, dist);
    for (child, parent, len) in edges {
        let (a, b) = (clusters.find(child), clusters.find(parent));
        if a == b {
            continue;
        }
        let threshold = rho * clusters.min_sigma[a].min(clusters.min_sigma[b]);
        if len <= threshold && clusters.disjoint_images(a, b) {
            clusters.union(a, b);
        }
    }
    clusters.groups()
}

pub fn break_and_merge(
    fs: &FeatureSet,
    tree: &DensityTree,
    dist: &Distinctiveness,
    params: &MatchParams,
) -> Clustering {
    let rows = merge_rows(fs, tree, dist, params.rho);
    Clustering::from_rows(fs, &rows, params.provenance("quickmatch"))
}

/// Every intermediate product of one QuickMatch run over a feature set.
#[derive(Debug, Clone)]
pub struct LocalRun {
    pub distinctiveness: Distinctiveness,
    pub tree: DensityTree,
    /// Clusters as row indices into the input set.
    pub clusters: Vec<Vec<usize>>,
}

/// Runs the full pipeline, keeping the tree and distinctiveness. Empty input
/// gives an empty run.
pub fn run_local(fs: &FeatureSet, params: &MatchParams) -> Result<LocalRun> {
    params.check()?;
    if fs.is_empty() {
        return Ok(LocalRun {
            distinctiveness: Distinctiveness::from_values(Vec::new()),
            tree: build_tree(fs, &[]),
            clusters: Vec::new(),
        });
    }
    let distinctiveness = compute_distinctiveness(fs)?;
    let density = compute_density(fs, &distinctiveness, params.kernel);
    let tree = build_tree(fs, &density);
    let clusters = merge_rows(fs, &tree, &distinctiveness, params.rho);
    Ok(LocalRun {
        distinctiveness,
        tree,
        clusters,
    })
}

/// Centralized QuickMatch.
pub fn quickmatch(fs: &FeatureSet, params: &MatchParams) -> Result<Clustering> {
    let run = run_local(fs, params)?;
    let c = Clustering::from_rows(fs, &run.clusters, params.provenance("quickmatch"));
    c.validate(fs)
        .map_err(|e| Error::Invariant(format!("quickmatch produced an invalid clustering: {e}")))?;
    Ok(c)
}
