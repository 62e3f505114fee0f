//! Feature descriptors and the descriptor text format.
//!
//! A [`FeatureSet`] holds every descriptor `x_ik` of every image, stored as
//! dense rows. Image ids in input files may be arbitrary non-negative
//! integers; internally they are remapped to `0..N` in ascending id order,
//! and the original ids are what every output carries.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies feature `k` of image `i`. Ordered lexicographically by
/// `(image, index)`, which is the order every tie-break in the crate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u64, u64)", into = "(u64, u64)")]
pub struct FeatureId {
    pub image: u64,
    pub index: u64,
}

impl FeatureId {
    pub const fn new(image: u64, index: u64) -> Self {
        Self { image, index }
    }
}

impl From<(u64, u64)> for FeatureId {
    fn from((image, index): (u64, u64)) -> Self {
        Self { image, index }
    }
}

impl From<FeatureId> for (u64, u64) {
    fn from(id: FeatureId) -> Self {
        (id.image, id.index)
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.image, self.index)
    }
}

/// Euclidean distance between two descriptors.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite component"));
    }
    Ok(euclidean(a, b))
}

/// The metric seam. Every distance in the crate goes through here.
#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// All descriptors of all images.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    ids: Vec<FeatureId>,
    /// Dense image index per row.
    images: Vec<usize>,
    /// Dense image index -> original image id.
    image_ids: Vec<u64>,
    data: Vec<f64>,
    lookup: HashMap<FeatureId, usize>,
}

impl FeatureSet {
    pub fn new(dim: usize, rows: Vec<(FeatureId, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("feature dimension must be at least 1"));
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut lookup = HashMap::with_capacity(rows.len());
        for (row, (id, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::input(format!(
                    "feature {id} has {} components, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("feature {id} has a non-finite component")));
            }
            if lookup.insert(id, row).is_some() {
                return Err(Error::DuplicateFeature(id));
            }
            ids.push(id);
            data.extend_from_slice(&v);
        }
        let mut dense: BTreeMap<u64, usize> = ids.iter().map(|id| (id.image, 0)).collect();
        for (i, slot) in dense.values_mut().enumerate() {
            *slot = i;
        }
        let images = ids.iter().map(|id| dense[&id.image]).collect();
        let image_ids = dense.keys().copied().collect();
        Ok(Self {
            dim,
            ids,
            images,
            image_ids,
            data,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of distinct images, `N`.
    pub fn image_count(&self) -> usize {
        self.image_ids.len()
    }

    pub fn ids(&self) -> &[FeatureId] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> FeatureId {
        self.ids[row]
    }

    /// Dense image index of a row, in `0..image_count()`.
    pub fn image(&self, row: usize) -> usize {
        self.images[row]
    }

    /// Original id of a dense image index.
    pub fn image_id(&self, image: usize) -> u64 {
        self.image_ids[image]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn position(&self, id: FeatureId) -> Option<usize> {
        self.lookup.get(&id).copied()
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        euclidean(self.row(a), self.row(b))
    }

    /// A new set holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> FeatureSet {
        let rows = rows.iter().map(|&r| (self.ids[r], self.row(r).to_vec())).collect();
        FeatureSet::new(self.dim, rows).expect("subset of a valid set is valid")
    }

    /// Per-dimension `(min, max)` over all features.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for row in self.rows() {
            for (slot, &v) in b.iter_mut().zip(row) {
                slot.0 = slot.0.min(v);
                slot.1 = slot.1.max(v);
            }
        }
        b
    }

    /// Rows grouped by dense image index.
    pub fn rows_by_image(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.image_count()];
        for (row, &img) in self.images.iter().enumerate() {
            groups[img].push(row);
        }
        groups
    }
}

/// Parses the descriptor text format: one feature per line,
/// `image_id feature_id v1 ... vF`, `#` starts a comment. The dimension is
/// taken from the first data row.
pub fn parse_features(text: &str, source: &str) -> Result<FeatureSet> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    let mut dim = None;
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut int_field = |what: &str| -> Result<u64> {
            let tok = fields
                .next()
                .ok_or_else(|| err(line_no, format!("missing {what}")))?;
            tok.parse::<u64>()
                .map_err(|_| err(line_no, format!("bad {what} {tok:?}")))
        };
        let image = int_field("image id")?;
        let index = int_field("feature id")?;
        let values = fields
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line_no, format!("bad component {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *dim.get_or_insert(values.len());
        if values.is_empty() {
            return Err(err(line_no, "row has no components".into()));
        }
        if values.len() != expected {
            return Err(err(
                line_no,
                format!("row has {} components, expected {expected}", values.len()),
            ));
        }
        let id = FeatureId::new(image, index);
        if let Some(first) = seen.insert(id, line_no) {
            return Err(err(
                line_no,
                format!("duplicate feature id {id} (first seen on line {first})"),
            ));
        }
        rows.push((id, values));
    }
    match dim {
        None => Err(err(0, "no features".into())),
        Some(dim) => FeatureSet::new(dim, rows),
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, &path.display().to_string())
}

/// Inverse of [`parse_features`]. Components use the shortest decimal form
/// that round-trips exactly.
pub fn format_features(fs: &FeatureSet) -> String {
    let mut out = String::new();
    for (id, row) in fs.ids().iter().zip(fs.rows()) {
        write!(out, "{} {}", id.image, id.index).unwrap();
        for v in row {
            write!(out, " {v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_features(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_features(fs)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fid(i: u64, k: u64) -> FeatureId {
        FeatureId::new(i, k)
    }

    #[test]
    fn distance_trivial_cases() {
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn distance_rejects_mismatched_dims() {
        assert!(matches!(distance(&[0.0], &[0.0, 1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn distance_matches_componentwise_oracle_128d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut ss = 0.0;
            for k in 0..128 {
                ss += (a[k] - b[k]).powi(2);
            }
            assert!((distance(&a, &b).unwrap() - ss.sqrt()).abs() <= 1e-12);
        }
    }

    #[test]
    fn parse_two_rows_with_comments() {
        let fs = parse_features("# header\n0 0 1.0 2.0\n3 1 4 5 # trailing\n\n", "t").unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs.dim(), 2);
        assert_eq!(fs.image_count(), 2);
        assert_eq!(fs.id(1), fid(3, 1));
        // image 3 is remapped to dense index 1
        assert_eq!(fs.image(1), 1);
        assert_eq!(fs.image_id(1), 3);
        assert_eq!(fs.row(1), &[4.0, 5.0]);
    }

    #[test]
    fn parse_empty_is_an_error() {
        let e = parse_features("# nothing\n", "t").unwrap_err();
        assert!(e.to_string().contains("no features"), "{e}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = parse_features("0 0 1 2\n0 1 1\n", "f.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_features("0 0 1 2\n0 0 3 4\n", "f.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_features("0 x 1 2\n", "f.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
        let e = parse_features("0 0 1 nan\n", "f.txt").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    }

    #[test]
    fn new_rejects_duplicates() {
        let rows = vec![(fid(0, 0), vec![1.0]), (fid(0, 0), vec![2.0])];
        assert!(matches!(FeatureSet::new(1, rows), Err(Error::DuplicateFeature(_))));
    }

    proptest! {
        #[test]
        fn text_round_trip(rows in prop::collection::vec(
            (0u64..5, prop::collection::vec(-1e6f64..1e6, 3)), 1..30)
        ) {
            let rows: Vec<_> = rows.into_iter().enumerate()
                .map(|(k, (i, v))| (fid(i, k as u64), v)).collect();
            let fs = FeatureSet::new(3, rows).unwrap();
            let back = parse_features(&format_features(&fs), "rt").unwrap();
            prop_assert_eq!(fs, back);
        }

        #[test]
        fn triangle_inequality(
            a in prop::collection::vec(-100f64..100.0, 4),
            b in prop::collection::vec(-100f64..100.0, 4),
            c in prop::collection::vec(-100f64..100.0, 4),
        ) {
            let ab = euclidean(&a, &b);
            let bc = euclidean(&b, &c);
            let ac = euclidean(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab, euclidean(&b, &a));
            prop_assert!(ab >= 0.0);
        }
    }
}
