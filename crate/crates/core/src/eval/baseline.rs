//! Pairwise brute-force matcher with the nearest/second-nearest ratio test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{euclidean, FeatureId, FeatureSet};

pub const DEFAULT_RATIO: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTest {
    /// Accept iff `d1 / d2 < ratio`.
    pub ratio: f64,
    /// With a single train feature there is no second neighbor; the match is
    /// then accepted iff `d1 <= single_max_distance`.
    pub single_max_distance: f64,
}

impl Default for RatioTest {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_RATIO,
            single_max_distance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMatch {
    pub query: usize,
    pub train: usize,
    pub distance: f64,
}

/// Exhaustive ratio-test matching of every query descriptor against the
/// train descriptors. Indices refer to positions in the two slices.
pub fn ratio_match(query: &[&[f64]], train: &[&[f64]], test: &RatioTest) -> Vec<PairMatch> {
    let mut out = Vec::new();
    if train.is_empty() {
        return out;
    }
    for (q, x) in query.iter().enumerate() {
        // (index, distance) of nearest and second nearest; ties keep the
        // lower train index first
        let mut first: Option<(usize, f64)> = None;
        let mut second: Option<f64> = None;
        for (t, y) in train.iter().enumerate() {
            let d = euclidean(x, y);
            match first {
                Some((_, d1)) if d >= d1 => {
                    if second.is_none_or(|d2| d < d2) {
                        second = Some(d);
                    }
                }
                _ => {
                    second = first.map(|(_, d1)| d1);
                    first = Some((t, d));
                }
            }
        }
        let (t, d1) = first.expect("train is non-empty");
        let accept = match second {
            Some(d2) => d1 < test.ratio * d2,
            None => d1 <= test.single_max_distance,
        };
        if accept {
            out.push(PairMatch {
                query: q,
                train: t,
                distance: d1,
            });
        }
    }
    out
}

/// Ratio-test matches from every feature of `query_image` to the features of
/// `train_image` (original image ids).
pub fn baseline_ratio_match(
    fs: &FeatureSet,
    query_image: u64,
    train_image: u64,
    test: &RatioTest,
) -> Result<Vec<(FeatureId, FeatureId, f64)>> {
    let rows_of = |image: u64| -> Vec<usize> {
        (0..fs.len()).filter(|&r| fs.id(r).image == image).collect()
    };
    let (q, t) = (rows_of(query_image), rows_of(train_image));
    if q.is_empty() || t.is_empty() {
        return Err(Error::input(format!(
            "images {query_image} and {train_image} must both have features"
        )));
    }
    let qv: Vec<&[f64]> = q.iter().map(|&r| fs.row(r)).collect();
    let tv: Vec<&[f64]> = t.iter().map(|&r| fs.row(r)).collect();
    Ok(ratio_match(&qv, &tv, test)
        .into_iter()
        .map(|m| (fs.id(q[m.query]), fs.id(t[m.train]), m.distance))
        .collect())
}
