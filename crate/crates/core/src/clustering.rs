//! Multi-image match sets and their canonical JSON form.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{FeatureId, FeatureSet};

/// Which algorithm and parameters produced a clustering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl Provenance {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// A set of clusters `M = {C_c}`.
///
/// Always held in canonical order: members sorted within each cluster and
/// clusters sorted by their smallest member. Two clusterings with the same
/// clusters therefore compare equal and serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Wire", into = "Wire")]
pub struct Clustering {
    clusters: Vec<Vec<FeatureId>>,
    meta: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    clusters: Vec<Vec<FeatureId>>,
    #[serde(default)]
    meta: Provenance,
}

impl TryFrom<Wire> for Clustering {
    type Error = Error;

    fn try_from(w: Wire) -> Result<Self> {
        let c = Clustering::new(w.clusters, w.meta);
        c.check_self_consistent()?;
        Ok(c)
    }
}

impl From<Clustering> for Wire {
    fn from(c: Clustering) -> Self {
        Wire {
            clusters: c.clusters,
            meta: c.meta,
        }
    }
}

impl Clustering {
    pub fn new(mut clusters: Vec<Vec<FeatureId>>, meta: Provenance) -> Self {
        for c in clusters.iter_mut() {
            c.sort_unstable();
        }
        clusters.sort_unstable();
        Self { clusters, meta }
    }

    /// Builds a clustering from row-index clusters over `fs`.
    pub fn from_rows(fs: &FeatureSet, clusters: &[Vec<usize>], meta: Provenance) -> Self {
        let clusters = clusters
            .iter()
            .map(|c| c.iter().map(|&r| fs.id(r)).collect())
            .collect();
        Self::new(clusters, meta)
    }

    /// One singleton cluster per feature.
    pub fn singletons(fs: &FeatureSet, meta: Provenance) -> Self {
        Self::new(fs.ids().iter().map(|&id| vec![id]).collect(), meta)
    }

    pub fn clusters(&self) -> &[Vec<FeatureId>] {
        &self.clusters
    }

    pub fn meta(&self) -> &Provenance {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: Provenance) {
        self.meta = meta;
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Same clusters, ignoring provenance.
    pub fn same_clusters(&self, other: &Clustering) -> bool {
        self.clusters == other.clusters
    }

    /// Cluster index of every member.
    pub fn labels(&self) -> HashMap<FeatureId, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(c, members)| members.iter().map(move |&id| (id, c)))
            .collect()
    }

    /// Checks that clusters are non-empty, hold at most one feature per image
    /// and never share a feature.
    pub fn check_self_consistent(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (c, members) in self.clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Validation(format!("cluster {c} is empty")));
            }
            let mut images = HashSet::new();
            for &id in members {
                if !seen.insert(id) {
                    return Err(Error::Validation(format!(
                        "feature {id} appears in more than one cluster (again in cluster {c})"
                    )));
                }
                if !images.insert(id.image) {
                    return Err(Error::Validation(format!(
                        "cluster {c} holds two features of image {} (second is {id})",
                        id.image
                    )));
                }
            }
        }
        Ok(())
    }

    /// Full check against the source feature set: the clusters partition it
    /// and hold at most one feature per image.
    pub fn validate(&self, fs: &FeatureSet) -> Result<()> {
        self.check_self_consistent()?;
        for (c, members) in self.clusters.iter().enumerate() {
            if let Some(id) = members.iter().find(|id| fs.position(**id).is_none()) {
                return Err(Error::Validation(format!(
                    "cluster {c} holds unknown feature {id}"
                )));
            }
        }
        if self.feature_count() != fs.len() {
            let covered: HashSet<_> = self.clusters.iter().flatten().collect();
            let missing = fs.ids().iter().find(|id| !covered.contains(id)).unwrap();
            return Err(Error::Validation(format!("feature {missing} is in no cluster")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("clustering serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn save_clustering(c: &Clustering, path: impl AsRef<Path>) -> Result<()> {
    c.check_self_consistent()?;
    let path = path.as_ref();
    std::fs::write(path, c.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Clustering::from_json(&text)
}
