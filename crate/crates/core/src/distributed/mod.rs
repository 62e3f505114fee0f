//! Distributed QuickMatch on a simulated network of agents.
//!
//! The pipeline runs in barrier-separated rounds:
//!
//! 1. **route**: every feature goes to the agent whose Voronoi region holds it;
//! 2. **local cluster**: each agent runs QuickMatch on its own features with
//!    a finite kernel;
//! 3. **boundary scalars**: each agent sends every other agent the minimum
//!    distance from its features to that agent's region boundary;
//! 4. **contested detection**: a feature is contested with agent `a'` when
//!    its boundary distance plus `a'`'s scalar is below its parent-edge
//!    length, i.e. a feature of `a'` could be closer than its parent;
//! 5. **transfer**: contested clusters move to the lowest triggering agent,
//!    then agents in decreasing index order forward received clusters whose
//!    nearest local feature is itself contested;
//! 6. **finalize**: every agent re-clusters what it holds, without further
//!    communication.
//!
//! Agents share nothing but the ledger-logged messages. Within a round they
//! may run on a thread pool; results are identical to a sequential run.

mod agent;
pub mod ledger;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use agent::{AgentState, AgentTiming, SigmaPMode};
pub use ledger::{LedgerSummary, NetworkLedger, Payload, Phase, TransferChain, TransferMessage};

use crate::clustering::{Clustering, Provenance};
use crate::density::Kernel;
use crate::error::{Error, Result};
use crate::features::{euclidean, FeatureId, FeatureSet};
use crate::partition::{build_partition, Partition, Seeding};
use crate::quickmatch::{MatchParams, DEFAULT_RHO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl FromStr for Execution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Execution::Sequential),
            "parallel" => Ok(Execution::Parallel),
            _ => Err(Error::input(format!("unknown execution mode {s:?}"))),
        }
    }
}

impl fmt::Display for Execution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Execution::Sequential => "sequential",
            Execution::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributedParams {
    pub rho: f64,
    pub kernel: Kernel,
    pub seeding: Seeding,
    pub sigma_p: SigmaPMode,
    pub execution: Execution,
}

impl Default for DistributedParams {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            kernel: Kernel::Quadratic,
            seeding: Seeding::KMeans,
            sigma_p: SigmaPMode::PerFeature,
            execution: Execution::Parallel,
        }
    }
}

impl DistributedParams {
    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            rho: self.rho,
            kernel: self.kernel,
        }
    }
}

/// Per-agent counts and timings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStats {
    pub agent: usize,
    pub features_routed: usize,
    pub features_final: usize,
    pub local_clusters: usize,
    pub contested_features: usize,
    pub contested_clusters: usize,
    pub staged_features: usize,
    pub clusters_sent: usize,
    pub clusters_kept: usize,
    pub clusters_found: usize,
    pub sigma_a: Option<f64>,
    pub timing: AgentTiming,
}

impl AgentStats {
    /// Total compute time of the agent, seconds.
    pub fn compute_s(&self) -> f64 {
        let t = &self.timing;
        t.cluster_s + t.boundary_s + t.contested_s + t.finalize_s
    }

    /// Time spent on boundary distances, seconds.
    pub fn qp_s(&self) -> f64 {
        self.timing.boundary_s
    }
}

/// Features flagged by the contested test.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContestedSets {
    /// Features satisfying the contested inequality, with their triggering
    /// agents.
    pub features: BTreeMap<FeatureId, BTreeSet<usize>>,
    /// Every member of a local cluster that holds a contested feature. This
    /// is the set staged for transfer.
    pub staged: BTreeSet<FeatureId>,
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub clustering: Clustering,
    pub ledger: NetworkLedger,
    pub partition: Partition,
    pub agents: Vec<AgentStats>,
    pub contested: ContestedSets,
    /// Clustering before any transfer: the union of the agents' local
    /// clusterings.
    pub local_clustering: Clustering,
}

fn for_each_agent<F>(agents: &mut [AgentState], exec: Execution, f: F) -> Result<()>
where
    F: Fn(&mut AgentState) -> Result<()> + Sync + Send,
{
    match exec {
        Execution::Sequential => agents.iter_mut().try_for_each(f),
        Execution::Parallel => agents.par_iter_mut().try_for_each(f),
    }
}

/// Round 0: sends every feature to the agent owning its region. A feature's
/// sender is the agent hosting its image (dense image index mod `m`).
pub fn route_features(
    fs: &FeatureSet,
    partition: &Partition,
    ledger: &mut NetworkLedger,
) -> Result<Vec<AgentState>> {
    if partition.ids.as_slice() != fs.ids() {
        return Err(Error::input("partition was built for a different feature set"));
    }
    let m = partition.agent_count();
    let mut held: Vec<Vec<(FeatureId, Vec<f64>)>> = vec![Vec::new(); m];
    for (row, &owner) in partition.assignment.iter().enumerate() {
        let id = fs.id(row);
        ledger.push(fs.image(row) % m, owner, Phase::Routing, Payload::Route { feature: id });
        held[owner].push((id, fs.row(row).to_vec()));
    }
    held.into_iter()
        .enumerate()
        .map(|(a, rows)| {
            let features = FeatureSet::new(fs.dim(), rows)?;
            Ok(AgentState::new(a, partition.seeds[a].clone(), features))
        })
        .collect()
}

/// Computes every agent's boundary distances and exchanges the `d_aa'`
/// scalars. Returns `scalars[receiver][sender]`.
pub fn exchange_boundary_scalars(
    agents: &mut [AgentState],
    partition: &Partition,
    exec: Execution,
    ledger: &mut NetworkLedger,
) -> Result<Vec<Vec<Option<f64>>>> {
    for_each_agent(agents, exec, |a| {
        a.compute_boundaries(partition);
        Ok(())
    })?;
    let m = agents.len();
    let mut scalars = vec![vec![None; m]; m];
    for sender in agents.iter() {
        for receiver in (0..m).filter(|&r| r != sender.id) {
            let value = sender.scalar_for(receiver);
            ledger.push(sender.id, receiver, Phase::Scalars, Payload::BoundaryScalar { value });
            scalars[receiver][sender.id] = value;
        }
    }
    Ok(scalars)
}

/// A cluster in flight.
#[derive(Debug, Clone)]
struct Parcel {
    key: FeatureId,
    features: Vec<(FeatureId, Vec<f64>)>,
}

/// A cluster's members with their vectors.
pub type ClusterRows = Vec<(FeatureId, Vec<f64>)>;

/// What each agent holds after the transfer rounds.
#[derive(Debug, Clone, Default)]
pub struct Holdings {
    /// Local clusters that stayed home, by index into `local_clusters`.
    pub kept: Vec<usize>,
    pub received: Vec<(FeatureId, ClusterRows)>,
    pub sent: usize,
}

fn parcel_of(agent: &AgentState, cluster: usize) -> Parcel {
    let rows = &agent.local_clusters[cluster];
    Parcel {
        key: agent.cluster_key(rows),
        features: rows
            .iter()
            .map(|&r| (agent.features.id(r), agent.features.row(r).to_vec()))
            .collect(),
    }
}

/// Nearest local row to any feature of the parcel; distance ties go to the
/// lower feature id.
fn nearest_local(agent: &AgentState, parcel: &Parcel) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for row in 0..agent.features.len() {
        let d = parcel
            .features
            .iter()
            .map(|(_, v)| euclidean(agent.features.row(row), v))
            .fold(f64::INFINITY, f64::min);
        let better = match best {
            None => true,
            Some((b, bd)) => d < bd || (d == bd && agent.features.id(row) < agent.features.id(b)),
        };
        if better {
            best = Some((row, d));
        }
    }
    best.map(|(r, _)| r)
}

/// Send phase followed by the decreasing-index receive phase.
///
/// Send: a local cluster holding contested features goes to the lowest agent
/// that triggered any of them, if that agent has a lower index.
///
/// Receive, agents from `m - 1` down to 0: for each received cluster, find
/// the nearest local feature. If that feature is contested, the received
/// cluster and the local cluster containing that feature both go to that
/// cluster's lowest triggering agent, when it is lower than the current
/// agent. Otherwise the received cluster stays. Destinations strictly
/// decrease, so no cluster moves more than `m - 1` times.
pub fn transfer_round(agents: &[AgentState], ledger: &mut NetworkLedger) -> Vec<Holdings> {
    let m = agents.len();
    let mut sent: Vec<Vec<bool>> = agents.iter().map(|a| vec![false; a.local_clusters.len()]).collect();
    let mut inbox: Vec<Vec<Parcel>> = vec![Vec::new(); m];

    for a in agents {
        for (c, rows) in a.local_clusters.iter().enumerate() {
            if let Some(dest) = a.min_trigger(rows).filter(|&d| d < a.id) {
                let p = parcel_of(a, c);
                ledger.push(
                    a.id,
                    dest,
                    Phase::Transfer,
                    Payload::ClusterTransfer { key: p.key, features: p.features.clone() },
                );
                sent[a.id][c] = true;
                inbox[dest].push(p);
            }
        }
    }

    let mut holdings: Vec<Holdings> = (0..m).map(|_| Holdings::default()).collect();
    for a in agents.iter().rev() {
        let cluster_of: HashMap<usize, usize> = a
            .local_clusters
            .iter()
            .enumerate()
            .flat_map(|(c, rows)| rows.iter().map(move |&r| (r, c)))
            .collect();
        let incoming = std::mem::take(&mut inbox[a.id]);
        for parcel in incoming {
            let target = nearest_local(a, &parcel)
                .filter(|r| a.contested.contains_key(r))
                .and_then(|r| {
                    let c = cluster_of[&r];
                    a.min_trigger(&a.local_clusters[c])
                        .filter(|&d| d < a.id)
                        .map(|d| (c, d))
                });
            match target {
                Some((c, dest)) => {
                    ledger.push(
                        a.id,
                        dest,
                        Phase::Forward,
                        Payload::ClusterTransfer { key: parcel.key, features: parcel.features.clone() },
                    );
                    inbox[dest].push(parcel);
                    if !sent[a.id][c] {
                        let local = parcel_of(a, c);
                        ledger.push(
                            a.id,
                            dest,
                            Phase::Forward,
                            Payload::ClusterTransfer { key: local.key, features: local.features.clone() },
                        );
                        sent[a.id][c] = true;
                        inbox[dest].push(local);
                    }
                }
                None => holdings[a.id].received.push((parcel.key, parcel.features)),
            }
        }
    }
    for (a, h) in holdings.iter_mut().enumerate() {
        h.kept = (0..sent[a].len()).filter(|&c| !sent[a][c]).collect();
        h.sent = sent[a].iter().filter(|&&s| s).count();
    }
    holdings
}

/// Re-clusters each agent's final holdings and returns the union.
/// Fails if any feature ended up held by two agents.
pub fn finalize(
    agents: &mut [AgentState],
    holdings: &[Holdings],
    params: &DistributedParams,
) -> Result<Vec<Vec<Vec<FeatureId>>>> {
    let dim = agents.first().map_or(1, |a| a.features.dim());
    let mut finals: Vec<FeatureSet> = Vec::with_capacity(agents.len());
    for (a, h) in agents.iter().zip(holdings) {
        let mut rows: Vec<(FeatureId, Vec<f64>)> = Vec::new();
        let mut kept_rows: Vec<usize> = h.kept.iter().flat_map(|&c| a.local_clusters[c].iter().copied()).collect();
        kept_rows.sort_unstable();
        rows.extend(kept_rows.into_iter().map(|r| (a.features.id(r), a.features.row(r).to_vec())));
        for (_, features) in &h.received {
            rows.extend(features.iter().cloned());
        }
        finals.push(FeatureSet::new(dim, rows).map_err(|e| {
            Error::Invariant(format!("agent {} holds an inconsistent feature set: {e}", a.id))
        })?);
    }

    let mut owner: HashMap<FeatureId, usize> = HashMap::new();
    for (a, fs) in finals.iter().enumerate() {
        for &id in fs.ids() {
            if let Some(prev) = owner.insert(id, a) {
                return Err(Error::Invariant(format!(
                    "feature {id} held by agents {prev} and {a} after transfers"
                )));
            }
        }
    }

    let mp = params.match_params();
    let results: Vec<Result<(f64, Vec<Vec<FeatureId>>)>> = {
        let work = |fs: &FeatureSet| -> Result<(f64, Vec<Vec<FeatureId>>)> {
            let start = Instant::now();
            let run = crate::quickmatch::run_local(fs, &mp)?;
            let clusters = run
                .clusters
                .iter()
                .map(|c| c.iter().map(|&r| fs.id(r)).collect())
                .collect();
            Ok((start.elapsed().as_secs_f64(), clusters))
        };
        match params.execution {
            Execution::Sequential => finals.iter().map(work).collect(),
            Execution::Parallel => finals.par_iter().map(work).collect(),
        }
    };
    let mut out = Vec::with_capacity(agents.len());
    for ((a, fs), r) in agents.iter_mut().zip(finals).zip(results) {
        let (secs, clusters) = r?;
        a.timing.finalize_s += secs;
        a.features = fs;
        out.push(clusters);
    }
    Ok(out)
}

/// Full Distributed QuickMatch over `m` agents.
pub fn distributed_quickmatch(
    fs: &FeatureSet,
    m: usize,
    params: &DistributedParams,
    seed: u64,
) -> Result<DistributedRun> {
    if m == 0 {
        return Err(Error::input("agent count must be at least 1"));
    }
    let partition = build_partition(fs, m, params.seeding, seed)?;
    distributed_with_partition(fs, partition, params)
}

/// Distributed QuickMatch over a given partition.
pub fn distributed_with_partition(
    fs: &FeatureSet,
    partition: Partition,
    params: &DistributedParams,
) -> Result<DistributedRun> {
    let mp = params.match_params();
    mp.check()?;
    let m = partition.agent_count();
    let mut ledger = NetworkLedger::new();

    let mut agents = route_features(fs, &partition, &mut ledger)?;
    for_each_agent(&mut agents, params.execution, |a| a.local_cluster(&mp))?;

    let scalars = exchange_boundary_scalars(&mut agents, &partition, params.execution, &mut ledger)?;
    for_each_agent(&mut agents, params.execution, |a| {
        a.detect_contested(&scalars[a.id], params.sigma_p);
        Ok(())
    })?;

    let mut contested = ContestedSets::default();
    let mut local = Vec::new();
    let mut stats: Vec<AgentStats> = Vec::with_capacity(m);
    for a in &agents {
        for (id, triggers) in a.contested_ids() {
            contested.features.insert(id, triggers.clone());
        }
        let mut contested_clusters = 0;
        let mut staged = 0;
        for rows in &a.local_clusters {
            local.push(rows.iter().map(|&r| a.features.id(r)).collect::<Vec<_>>());
            if rows.iter().any(|r| a.contested.contains_key(r)) {
                contested_clusters += 1;
                staged += rows.len();
                contested.staged.extend(rows.iter().map(|&r| a.features.id(r)));
            }
        }
        stats.push(AgentStats {
            agent: a.id,
            features_routed: a.features.len(),
            features_final: 0,
            local_clusters: a.local_clusters.len(),
            contested_features: a.contested.len(),
            contested_clusters,
            staged_features: staged,
            clusters_sent: 0,
            clusters_kept: 0,
            clusters_found: 0,
            sigma_a: a.sigma_a.is_finite().then_some(a.sigma_a),
            timing: AgentTiming::default(),
        });
    }
    let local_clustering = Clustering::new(local, Provenance::new("local-quickmatch"));

    let holdings = transfer_round(&agents, &mut ledger);
    let before_finalize = ledger.len();
    let per_agent = finalize(&mut agents, &holdings, params)?;
    if ledger.len() != before_finalize {
        return Err(Error::Invariant("finalize sent messages".into()));
    }

    let mut all = Vec::new();
    for ((s, a), (h, clusters)) in stats.iter_mut().zip(&agents).zip(holdings.iter().zip(per_agent)) {
        s.features_final = a.features.len();
        s.clusters_sent = h.sent;
        s.clusters_kept = h.kept.len();
        s.clusters_found = clusters.len();
        s.timing = a.timing;
        all.extend(clusters);
    }

    let meta = params
        .match_params()
        .provenance("distributed-quickmatch")
        .with("agents", m)
        .with("seeding", params.seeding.to_string())
        .with("sigma_p", params.sigma_p.to_string());
    let clustering = Clustering::new(all, meta);
    clustering
        .validate(fs)
        .map_err(|e| Error::Invariant(format!("distributed output: {e}")))?;
    ledger.check_protocol(m, fs.len())?;

    Ok(DistributedRun {
        clustering,
        ledger,
        partition,
        agents: stats,
        contested,
        local_clustering,
    })
}
