//! Append-only log of every message exchanged by the simulated agents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Round 0: each feature goes to the agent owning its region.
    Routing,
    /// One boundary scalar per ordered agent pair.
    Scalars,
    /// Contested clusters sent to their lowest triggering agent.
    Transfer,
    /// Receive-phase forwarding, in decreasing agent order.
    Forward,
    /// Local re-clustering. Never communicates.
    Finalize,
}

impl Phase {
    pub fn round(self) -> u32 {
        self as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Route {
        feature: FeatureId,
    },
    /// `d_aa'`: the sender's minimum distance to the receiver's region
    /// boundary. `None` when the sender holds no features (infinite).
    BoundaryScalar {
        value: Option<f64>,
    },
    ClusterTransfer {
        /// Smallest member id at the time the cluster was staged.
        key: FeatureId,
        features: Vec<(FeatureId, Vec<f64>)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMessage {
    pub from: usize,
    pub to: usize,
    pub round: u32,
    pub phase: Phase,
    pub payload: Payload,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkLedger {
    messages: Vec<TransferMessage>,
}

/// The agents one cluster visited, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferChain {
    pub key: FeatureId,
    pub origin: usize,
    pub hops: Vec<usize>,
    pub features: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub routing_messages: usize,
    pub cross_agent_routes: usize,
    pub scalar_messages: usize,
    pub transfer_messages: usize,
    pub forward_messages: usize,
    pub finalize_messages: usize,
    /// Feature vectors moved by transfers and forwards.
    pub features_transferred: usize,
    /// `"from->to"` -> message count.
    pub per_pair: BTreeMap<String, usize>,
    pub longest_chain: usize,
    pub hash: String,
}

impl NetworkLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, from: usize, to: usize, phase: Phase, payload: Payload) {
        self.messages.push(TransferMessage {
            from,
            to,
            round: phase.round(),
            phase,
            payload,
        });
    }

    pub fn messages(&self) -> &[TransferMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.messages.iter().filter(|m| m.phase == phase).count()
    }

    /// Transfer chains keyed by cluster, in first-hop order.
    pub fn chains(&self) -> Vec<TransferChain> {
        let mut chains: Vec<TransferChain> = Vec::new();
        let mut index: BTreeMap<FeatureId, usize> = BTreeMap::new();
        for m in &self.messages {
            if let Payload::ClusterTransfer { key, features } = &m.payload {
                match index.get(key) {
                    Some(&c) => chains[c].hops.push(m.to),
                    None => {
                        index.insert(*key, chains.len());
                        chains.push(TransferChain {
                            key: *key,
                            origin: m.from,
                            hops: vec![m.to],
                            features: features.len(),
                        });
                    }
                }
            }
        }
        chains
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("ledger serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn summary(&self) -> LedgerSummary {
        let mut s = LedgerSummary {
            routing_messages: self.count(Phase::Routing),
            scalar_messages: self.count(Phase::Scalars),
            transfer_messages: self.count(Phase::Transfer),
            forward_messages: self.count(Phase::Forward),
            finalize_messages: self.count(Phase::Finalize),
            hash: self.hash(),
            ..Default::default()
        };
        for m in &self.messages {
            match &m.payload {
                Payload::Route { .. } if m.from != m.to => s.cross_agent_routes += 1,
                Payload::ClusterTransfer { features, .. } => s.features_transferred += features.len(),
                _ => {}
            }
            *s.per_pair.entry(format!("{}->{}", m.from, m.to)).or_default() += 1;
        }
        s.longest_chain = self.chains().iter().map(|c| c.hops.len()).max().unwrap_or(0);
        s
    }

    /// Protocol checks: one routing message per feature, `m(m-1)` boundary
    /// scalars, transfers only toward lower agent indices along contiguous
    /// chains of at most `m - 1` hops, and silence during finalize.
    pub fn check_protocol(&self, agents: usize, features: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Invariant(format!("ledger: {msg}")));
        let routes = self.count(Phase::Routing);
        if routes != features {
            return fail(format!("{routes} routing messages for {features} features"));
        }
        let scalars = self.count(Phase::Scalars);
        if scalars != agents * agents.saturating_sub(1) {
            return fail(format!("{scalars} boundary scalars for {agents} agents"));
        }
        if self.count(Phase::Finalize) != 0 {
            return fail("messages sent during finalize".into());
        }
        let mut last_round = 0;
        for (n, m) in self.messages.iter().enumerate() {
            if m.round < last_round {
                return fail(format!("message {n} goes back to round {}", m.round));
            }
            last_round = m.round;
            if m.from >= agents || m.to >= agents {
                return fail(format!("message {n} names an unknown agent"));
            }
            let kind_ok = match (&m.payload, m.phase) {
                (Payload::Route { .. }, Phase::Routing) => true,
                (Payload::BoundaryScalar { .. }, Phase::Scalars) => m.from != m.to,
                (Payload::ClusterTransfer { .. }, Phase::Transfer | Phase::Forward) => m.to < m.from,
                _ => false,
            };
            if !kind_ok {
                return fail(format!("message {n} ({:?} {}->{}) breaks the protocol", m.phase, m.from, m.to));
            }
        }
        for chain in self.chains() {
            if chain.hops.len() > agents.saturating_sub(1) {
                return fail(format!("cluster {} moved {} times", chain.key, chain.hops.len()));
            }
            let mut at = chain.origin;
            for &to in &chain.hops {
                if to >= at {
                    return fail(format!("cluster {} chain does not strictly decrease", chain.key));
                }
                at = to;
            }
        }
        // each hop must leave from where the previous one arrived
        let mut location: BTreeMap<FeatureId, usize> = BTreeMap::new();
        for m in &self.messages {
            if let Payload::ClusterTransfer { key, .. } = &m.payload {
                if let Some(&at) = location.get(key) {
                    if at != m.from {
                        return fail(format!("cluster {key} sent from {} but held by {at}", m.from));
                    }
                }
                location.insert(*key, m.to);
            }
        }
        Ok(())
    }
}
