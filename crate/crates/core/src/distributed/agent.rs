use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::density::DensityTree;
use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSet};
use crate::partition::Partition;
use crate::quickmatch::{run_local, MatchParams};

/// Which parent-edge length the contested test compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaPMode {
    /// Each feature's own parent edge; roots use the agent's `sigma_a`.
    PerFeature,
    /// `sigma_a` for every feature. Strictly more conservative.
    AgentMax,
}

impl FromStr for SigmaPMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-feature" => Ok(SigmaPMode::PerFeature),
            "agent-max" => Ok(SigmaPMode::AgentMax),
            _ => Err(Error::input(format!("unknown sigma_p mode {s:?}"))),
        }
    }
}

impl fmt::Display for SigmaPMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaPMode::PerFeature => "per-feature",
            SigmaPMode::AgentMax => "agent-max",
        })
    }
}

/// One agent's local state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub seed: Vec<f64>,
    /// Features currently held, in arrival order.
    pub features: FeatureSet,
    pub tree: DensityTree,
    /// `sigma_a`: longest parent edge in the local tree, `+inf` if the tree
    /// has no edges.
    pub sigma_a: f64,
    /// Local clusters as rows of `features`, each sorted by row, ordered by
    /// smallest member id.
    pub local_clusters: Vec<Vec<usize>>,
    /// `boundary[row][e]`: distance from the feature to the bisector with
    /// agent `e` (`+inf` for the agent itself).
    pub boundary: Vec<Vec<f64>>,
    /// `S_a`: contested rows and the agents that trigger them.
    pub contested: BTreeMap<usize, BTreeSet<usize>>,
    pub timing: AgentTiming,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentTiming {
    pub cluster_s: f64,
    pub boundary_s: f64,
    pub contested_s: f64,
    pub finalize_s: f64,
}

impl AgentState {
    pub fn new(id: usize, seed: Vec<f64>, features: FeatureSet) -> Self {
        let n = features.len();
        Self {
            id,
            seed,
            tree: DensityTree {
                parent: vec![None; n],
                edge_length: vec![None; n],
                density: vec![0.0; n],
            },
            features,
            sigma_a: f64::INFINITY,
            local_clusters: Vec::new(),
            boundary: Vec::new(),
            contested: BTreeMap::new(),
            timing: AgentTiming::default(),
        }
    }

    /// Density, tree and merge-or-break over the agent's own features only.
    pub fn local_cluster(&mut self, params: &MatchParams) -> Result<()> {
        let start = Instant::now();
        let run = run_local(&self.features, params)?;
        self.sigma_a = run
            .tree
            .edge_length
            .iter()
            .flatten()
            .copied()
            .reduce(f64::max)
            .unwrap_or(f64::INFINITY);
        self.tree = run.tree;
        let mut clusters = run.clusters;
        for c in clusters.iter_mut() {
            c.sort_unstable();
        }
        clusters.sort_by_key(|c| self.cluster_key(c));
        self.local_clusters = clusters;
        self.timing.cluster_s += start.elapsed().as_secs_f64();
        Ok(())
    }

    pub(crate) fn cluster_key(&self, rows: &[usize]) -> FeatureId {
        rows.iter().map(|&r| self.features.id(r)).min().expect("clusters are non-empty")
    }

    /// Parent-edge length of a row, `sigma_a` for roots.
    pub fn sigma_p(&self, row: usize, mode: SigmaPMode) -> f64 {
        match mode {
            SigmaPMode::PerFeature => self.tree.edge_length[row].unwrap_or(self.sigma_a),
            SigmaPMode::AgentMax => self.sigma_a,
        }
    }

    /// Distance from every local feature to the bisector with every other
    /// agent.
    pub fn compute_boundaries(&mut self, partition: &Partition) {
        let start = Instant::now();
        let m = partition.agent_count();
        self.boundary = self
            .features
            .rows()
            .map(|x| {
                (0..m)
                    .map(|e| {
                        if e == self.id {
                            f64::INFINITY
                        } else {
                            partition.bisector_distance(x, self.id, e).max(0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        self.timing.boundary_s += start.elapsed().as_secs_f64();
    }

    /// This agent's scalar for `receiver`: the minimum distance from any
    /// local feature to the receiver's region boundary. `None` if empty.
    pub fn scalar_for(&self, receiver: usize) -> Option<f64> {
        self.boundary
            .iter()
            .map(|b| b[receiver])
            .reduce(f64::min)
    }

    /// `S_a`: row `x` is contested with agent `a'` iff
    /// `d(x, boundary a') + d_aa' < sigma_p(x)`, where `incoming[a']` is the
    /// scalar agent `a'` sent to this agent.
    pub fn detect_contested(&mut self, incoming: &[Option<f64>], mode: SigmaPMode) {
        let start = Instant::now();
        self.contested.clear();
        for row in 0..self.features.len() {
            let sp = self.sigma_p(row, mode);
            let triggers: BTreeSet<usize> = (0..incoming.len())
                .filter(|&other| other != self.id)
                .filter(|&other| {
                    let d_aa = incoming[other].unwrap_or(f64::INFINITY);
                    self.boundary[row][other] + d_aa < sp
                })
                .collect();
            if !triggers.is_empty() {
                self.contested.insert(row, triggers);
            }
        }
        self.timing.contested_s += start.elapsed().as_secs_f64();
    }

    /// Lowest agent index triggered by any contested member of a cluster.
    pub fn min_trigger(&self, cluster: &[usize]) -> Option<usize> {
        cluster
            .iter()
            .filter_map(|r| self.contested.get(r))
            .filter_map(|t| t.iter().next().copied())
            .min()
    }

    pub fn contested_ids(&self) -> impl Iterator<Item = (FeatureId, &BTreeSet<usize>)> + '_ {
        self.contested.iter().map(|(&r, t)| (self.features.id(r), t))
    }
}
