//! Brute-force reference implementations and instance generators shared by
//! the integration tests. Nothing here calls into the library's numeric
//! code: every quantity is recomputed from its definition.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use ::quickmatch::distributed::{NetworkLedger, Payload, Phase};
use ::quickmatch::{Clustering, FeatureId, FeatureSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

/// Random instance: `images` images with 1..=`per_image` features each,
/// drawn around a few shared centers so that clusters exist.
pub fn random_instance(seed: u64, images: u64, per_image: usize, dim: usize) -> FeatureSet {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..per_image)
        .map(|_| (0..dim).map(|_| r.random_range(0.0..10.0)).collect())
        .collect();
    let mut rows = Vec::new();
    for i in 0..images {
        let n = r.random_range(1..=per_image);
        for k in 0..n {
            let c = &centers[r.random_range(0..centers.len())];
            let v = c.iter().map(|x| x + r.random_range(-0.5..0.5)).collect();
            rows.push((FeatureId::new(i * 3 + 1, k as u64 * 2), v));
        }
    }
    FeatureSet::new(dim, rows).unwrap()
}

/// Rows of `fs` as (id, vector) pairs.
pub fn rows(fs: &FeatureSet) -> Vec<(FeatureId, Vec<f64>)> {
    fs.ids().iter().enumerate().map(|(r, &id)| (id, fs.row(r).to_vec())).collect()
}

/// Per-image minimum pairwise distance keyed by image id, with the
/// documented fallback for images holding a single feature.
pub fn oracle_sigma(fs: &FeatureSet) -> BTreeMap<u64, f64> {
    let data = rows(fs);
    let mut by_image: BTreeMap<u64, Vec<&Vec<f64>>> = BTreeMap::new();
    for (id, v) in &data {
        by_image.entry(id.image).or_default().push(v);
    }
    let mut own: BTreeMap<u64, Option<f64>> = BTreeMap::new();
    for (&img, vs) in &by_image {
        let mut best: Option<f64> = None;
        for a in 0..vs.len() {
            for b in 0..vs.len() {
                if a != b {
                    let d = l2(vs[a], vs[b]);
                    best = Some(best.map_or(d, |x: f64| x.min(d)));
                }
            }
        }
        own.insert(img, best);
    }
    let mut fallback = own.values().flatten().copied().fold(f64::INFINITY, f64::min);
    if fallback.is_infinite() {
        for a in 0..data.len() {
            for b in 0..data.len() {
                if a != b {
                    fallback = fallback.min(l2(&data[a].1, &data[b].1));
                }
            }
        }
        if fallback.is_infinite() {
            fallback = 1.0;
        }
    }
    own.into_iter()
        .map(|(img, s)| (img, s.unwrap_or(fallback).max(1e-12)))
        .collect()
}

pub fn gaussian(d: f64, s: f64) -> f64 {
    (-d / (2.0 * s * s)).exp()
}

pub fn quadratic(d: f64, s: f64) -> f64 {
    if d >= s {
        0.0
    } else {
        1.0 - (d / s) * (d / s)
    }
}

/// `D(x) = sum_j h(|x - x_j|; sigma of x_j's image)` including `j = x`.
pub fn oracle_density(fs: &FeatureSet, h: fn(f64, f64) -> f64) -> HashMap<FeatureId, f64> {
    let sigma = oracle_sigma(fs);
    let data = rows(fs);
    data.iter()
        .map(|(id, x)| {
            let total = data
                .iter()
                .map(|(jid, y)| h(l2(x, y), sigma[&jid.image]))
                .sum();
            (*id, total)
        })
        .collect()
}

/// Nearest feature of strictly higher (density, id); ties on distance go to
/// the lower id.
pub fn oracle_parents(
    fs: &FeatureSet,
    density: &HashMap<FeatureId, f64>,
) -> HashMap<FeatureId, Option<FeatureId>> {
    let data = rows(fs);
    let rank = |id: &FeatureId| (density[id], *id);
    data.iter()
        .map(|(id, x)| {
            let mut best: Option<(f64, FeatureId)> = None;
            for (jid, y) in &data {
                let (dj, ij) = rank(jid);
                let (dx, ix) = rank(id);
                let higher = dj > dx || (dj == dx && ij > ix);
                if !higher {
                    continue;
                }
                let cand = (l2(x, y), *jid);
                if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                    best = Some(cand);
                }
            }
            (*id, best.map(|b| b.1))
        })
        .collect()
}

/// Index of the nearest seed, ties to the lower index.
pub fn oracle_owner(seeds: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..seeds.len() {
        if l2(&seeds[a], x) < l2(&seeds[best], x) {
            best = a;
        }
    }
    best
}

/// Distance from `y` to the bisector hyperplane of `p` and `q`, via the
/// difference of squared distances.
pub fn oracle_bisector(p: &[f64], q: &[f64], y: &[f64]) -> f64 {
    let dp: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let dq: f64 = q.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (dq - dp).abs() / (2.0 * l2(p, q))
}

/// `d_aa'` for every ordered pair: min over features owned by `a'` of their
/// distance to the bisector with `a`. `out[a][a']`; `None` on the diagonal
/// and for agents without features.
pub fn oracle_scalars(fs: &FeatureSet, seeds: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let m = seeds.len();
    let mut out = vec![vec![None; m]; m];
    for (_, y) in rows(fs) {
        let owner = oracle_owner(seeds, &y);
        for a in (0..m).filter(|&a| a != owner) {
            let d = oracle_bisector(&seeds[owner], &seeds[a], &y);
            let slot: &mut Option<f64> = &mut out[a][owner];
            *slot = Some(slot.map_or(d, |s| s.min(d)));
        }
    }
    out
}

/// Closest point of the half-space `{y : a.y >= b}` to `x` by Uzawa dual
/// ascent on the Lagrangian of `min |y - x|^2 / 2`. Returns the distance.
pub fn qp_oracle(x: &[f64], a: &[f64], b: f64) -> f64 {
    let aa: f64 = a.iter().map(|v| v * v).sum();
    let step = 0.5 / aa;
    let mut lambda = 0.0f64;
    let mut y = x.to_vec();
    for _ in 0..10_000 {
        for k in 0..x.len() {
            y[k] = x[k] + lambda * a[k];
        }
        let g: f64 = a.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() - b;
        let next = (lambda - step * g).max(0.0);
        if (next - lambda).abs() <= 1e-18 * (1.0 + lambda) {
            break;
        }
        lambda = next;
    }
    l2(&y, x)
}

/// Pairwise F1 by enumerating every pair of features.
pub fn oracle_f1(a: &Clustering, b: &Clustering) -> f64 {
    let la = a.labels();
    let lb = b.labels();
    let ids: Vec<FeatureId> = la.keys().copied().collect();
    let (mut tp, mut pa, mut pb) = (0u64, 0u64, 0u64);
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let sa = la[&ids[i]] == la[&ids[j]];
            let sb = lb.contains_key(&ids[i]) && lb.get(&ids[i]) == lb.get(&ids[j]);
            pa += u64::from(sa);
            pb += u64::from(sb);
            tp += u64::from(sa && sb);
        }
    }
    if pa + pb == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (pa + pb) as f64
    }
}

/// Two smallest distances from `q` to `train` and the nearest index.
pub fn oracle_ratio_match(query: &[Vec<f64>], train: &[Vec<f64>], ratio: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (qi, q) in query.iter().enumerate() {
        let mut d: Vec<(f64, usize)> = train.iter().enumerate().map(|(t, y)| (l2(q, y), t)).collect();
        d.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        if d.len() >= 2 && d[0].0 < ratio * d[1].0 {
            out.push((qi, d[0].1));
        }
    }
    out
}

/// Protocol checks re-derived from the raw message log.
pub fn oracle_protocol(ledger: &NetworkLedger, m: usize, n: usize) -> Result<(), String> {
    let msgs = ledger.messages();
    let count = |p: Phase| msgs.iter().filter(|x| x.phase == p).count();
    if count(Phase::Routing) != n {
        return Err(format!("{} routing messages for {n} features", count(Phase::Routing)));
    }
    if count(Phase::Scalars) != m * (m - 1) {
        return Err(format!("{} scalar messages for m = {m}", count(Phase::Scalars)));
    }
    if count(Phase::Finalize) != 0 {
        return Err("messages during finalize".into());
    }
    let mut chains: BTreeMap<FeatureId, Vec<(usize, usize)>> = BTreeMap::new();
    for x in msgs {
        if let Payload::ClusterTransfer { key, .. } = &x.payload {
            chains.entry(*key).or_default().push((x.from, x.to));
        }
    }
    for (key, hops) in chains {
        if hops.len() > m.saturating_sub(1) {
            return Err(format!("chain {key} has {} hops", hops.len()));
        }
        let mut at = hops[0].0;
        for (from, to) in hops {
            if from != at || to >= from {
                return Err(format!("chain {key} is not strictly decreasing"));
            }
            at = to;
        }
    }
    Ok(())
}

/// Merge-or-break by relabeling: edges shortest first (ties by child id);
/// two groups join iff no image appears in both and the edge is at most
/// `rho` times the smallest sigma of any image in either group.
pub fn oracle_merge(
    fs: &FeatureSet,
    parents: &HashMap<FeatureId, Option<FeatureId>>,
    sigma: &BTreeMap<u64, f64>,
    rho: f64,
) -> Vec<Vec<FeatureId>> {
    let data = rows(fs);
    let pos: HashMap<FeatureId, usize> = data.iter().enumerate().map(|(k, (id, _))| (*id, k)).collect();
    let mut label: Vec<usize> = (0..data.len()).collect();
    let mut edges: Vec<(f64, FeatureId, FeatureId)> = parents
        .iter()
        .filter_map(|(c, p)| p.map(|p| (l2(&data[pos[c]].1, &data[pos[&p]].1), *c, p)))
        .collect();
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (len, c, p) in edges {
        let (lc, lp) = (label[pos[&c]], label[pos[&p]]);
        if lc == lp {
            continue;
        }
        let members = |l: usize| -> Vec<FeatureId> {
            (0..data.len()).filter(|&k| label[k] == l).map(|k| data[k].0).collect()
        };
        let (a, b) = (members(lc), members(lp));
        let clash = a.iter().any(|x| b.iter().any(|y| x.image == y.image));
        let smallest = a.iter().chain(&b).map(|x| sigma[&x.image]).fold(f64::INFINITY, f64::min);
        if !clash && len <= rho * smallest {
            for l in label.iter_mut() {
                if *l == lp {
                    *l = lc;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<FeatureId>> = BTreeMap::new();
    for (k, l) in label.into_iter().enumerate() {
        groups.entry(l).or_default().push(data[k].0);
    }
    let mut out: Vec<Vec<FeatureId>> = groups.into_values().collect();
    for g in out.iter_mut() {
        g.sort();
    }
    out.sort();
    out
}
