//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ::quickmatch::distributed::{exchange_boundary_scalars, route_features, NetworkLedger, SigmaPMode};
use ::quickmatch::eval::{compare_clusterings, run_detection, split_quality, DetectionConfig, RatioTest};
use ::quickmatch::{
    build_tree, compute_density, compute_distinctiveness, distributed_quickmatch, distributed_with_partition,
    generate, quickmatch, save_features, Clustering, DistributedParams, Execution, FeatureId, FeatureSet, Kernel,
    MatchParams, Partition, Provenance, Seeding, SynthConfig,
};
use common::*;
use rand::Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn synthetic() -> ::quickmatch::SynthData {
    generate(&SynthConfig::default()).expect("default synthetic data")
}

fn quadratic_central(fs: &FeatureSet) -> Clustering {
    quickmatch(fs, &MatchParams::new(1.1, Kernel::Quadratic).unwrap()).unwrap()
}

fn synthetic_equivalence() -> Outcome {
    let start = Instant::now();
    let data = synthetic();
    let mut notes = Vec::new();
    for kernel in [Kernel::Gaussian, Kernel::GaussianSquared] {
        let c = quickmatch(&data.features, &MatchParams::new(1.1, kernel).unwrap()).map_err(|e| e.to_string())?;
        if !c.same_clusters(&data.truth) {
            return Err(format!("{} kernel: {} clusters, truth has 25", kernel.name(), c.len()));
        }
        notes.push(format!("{} = truth", kernel.name()));
    }
    let central = quadratic_central(&data.features);
    let run = distributed_quickmatch(&data.features, 4, &DistributedParams::default(), 0).map_err(|e| e.to_string())?;
    let f1 = compare_clusterings(&run.clustering, &central).pairwise_f1;
    let secs = start.elapsed().as_secs_f64();
    check(
        f1 == 1.0 && secs < 10.0,
        format!("{}; m=4 F1 vs centralized quadratic = {f1}; {secs:.2}s", notes.join(", ")),
    )
}

fn degenerate_equivalence() -> Outcome {
    let mut worst = String::new();
    for seed in 0..5 {
        let data = generate(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        let central = quadratic_central(&data.features);
        let run = distributed_quickmatch(&data.features, 1, &DistributedParams::default(), seed).map_err(|e| e.to_string())?;
        let a = serde_json::to_string(central.clusters()).unwrap();
        let b = serde_json::to_string(run.clustering.clusters()).unwrap();
        let transfers = run.ledger.summary().transfer_messages;
        if a != b || transfers != 0 {
            worst = format!("seed {seed}: identical = {}, transfers = {transfers}", a == b);
            break;
        }
    }
    check(worst.is_empty(), if worst.is_empty() { "5 seeds byte-identical cluster lists, 0 transfers".into() } else { worst })
}

fn boundary_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for dim in [2usize, 8, 128] {
        let mut r = rng(7000 + dim as u64);
        for _ in 0..1000 {
            let m = r.random_range(2..=6);
            let seeds: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| r.random_range(-10.0..10.0)).collect()).collect();
            let x: Vec<f64> = (0..dim).map(|_| r.random_range(-12.0..12.0)).collect();
            let fs = FeatureSet::new(dim, vec![(FeatureId::new(0, 0), x.clone())]).unwrap();
            let p = Partition::from_seeds(&fs, seeds.clone()).unwrap();
            let t = oracle_owner(&seeds, &x);
            let e = (t + r.random_range(1..m)) % m;
            let d = p.boundary_distance(&x, e).map_err(|e| e.to_string())?.d_min;
            let a: Vec<f64> = seeds[e].iter().zip(&seeds[t]).map(|(u, v)| u - v).collect();
            let b = (seeds[e].iter().map(|v| v * v).sum::<f64>() - seeds[t].iter().map(|v| v * v).sum::<f64>()) / 2.0;
            worst = worst.max((d - qp_oracle(&x, &a, b)).abs());
            count += 1;
        }
    }
    check(worst < 1e-9, format!("{count} instances, max |d_min - qp| = {worst:.2e}"))
}

fn brute_force_oracles() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    for t in 0..50u64 {
        let fs = random_instance(9000 + t, 5 + t % 20, 8, [2, 3, 8][t as usize % 3]);
        if fs.len() > 200 {
            return Err(format!("trial {t} has {} features", fs.len()));
        }
        let sigma = compute_distinctiveness(&fs).unwrap();
        let want_sigma = oracle_sigma(&fs);
        for (dense, s) in want_sigma.values().enumerate() {
            if !close(sigma.sigma(dense), *s) {
                return Err(format!("trial {t}: sigma of image {dense}"));
            }
        }
        let density = compute_density(&fs, &sigma, Kernel::Quadratic);
        let want_density = oracle_density(&fs, quadratic);
        if fs.ids().iter().enumerate().any(|(r, id)| !close(density[r], want_density[id])) {
            return Err(format!("trial {t}: density"));
        }
        let tree = build_tree(&fs, &density);
        let by_id: HashMap<FeatureId, f64> = fs.ids().iter().copied().zip(density.iter().copied()).collect();
        let parents = oracle_parents(&fs, &by_id);
        if (0..fs.len()).any(|r| tree.parent_id(&fs, r) != parents[&fs.id(r)]) {
            return Err(format!("trial {t}: parent map"));
        }
        let m = 2 + t as usize % 5;
        let partition = ::quickmatch::partition::kmeans_seeds(&fs, m, t).unwrap();
        let mut ledger = NetworkLedger::new();
        let mut agents = route_features(&fs, &partition, &mut ledger).unwrap();
        let scalars = exchange_boundary_scalars(&mut agents, &partition, Execution::Sequential, &mut ledger).unwrap();
        let want = oracle_scalars(&fs, &partition.seeds);
        for a in 0..m {
            for b in (0..m).filter(|&b| b != a) {
                let ok = match (scalars[a][b], want[a][b]) {
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    (x, y) => x == y,
                };
                if !ok {
                    return Err(format!("trial {t}: d_aa' for {b}->{a}"));
                }
            }
        }
        let c = quickmatch(&fs, &MatchParams::default()).unwrap();
        let other = Clustering::new(
            c.clusters().chunks(2).map(|w| w.concat()).collect(),
            Provenance::new("paired"),
        );
        let f1 = compare_clusterings(&other, &c).pairwise_f1;
        if !close(f1, oracle_f1(&other, &c)) {
            return Err(format!("trial {t}: pairwise F1"));
        }
    }
    Ok("50 trials: sigma, density, parents, d_aa', pairwise F1 all match".into())
}

fn invariants() -> Outcome {
    let mut runs = 0;
    for seed in 0..4 {
        let data = generate(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        let inst = random_instance(seed, 15, 8, 4);
        for fs in [&data.features, &inst] {
            for kernel in [Kernel::Gaussian, Kernel::Quadratic] {
                let c = quickmatch(fs, &MatchParams::new(1.1, kernel).unwrap()).map_err(|e| e.to_string())?;
                c.validate(fs).map_err(|e| format!("centralized: {e}"))?;
                runs += 1;
            }
            for m in 1..=8 {
                for (seeding, sigma_p) in [(Seeding::KMeans, SigmaPMode::PerFeature), (Seeding::Random, SigmaPMode::AgentMax)] {
                    let p = DistributedParams { seeding, sigma_p, ..DistributedParams::default() };
                    let run = distributed_quickmatch(fs, m, &p, seed).map_err(|e| e.to_string())?;
                    run.clustering.validate(fs).map_err(|e| format!("m={m}: {e}"))?;
                    run.ledger.check_protocol(m, fs.len()).map_err(|e| format!("m={m}: {e}"))?;
                    oracle_protocol(&run.ledger, m, fs.len()).map_err(|e| format!("m={m}: {e}"))?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} clusterings valid, every ledger passes the protocol checks"))
}

fn contested_recall() -> Outcome {
    let data = synthetic();
    let central = quadratic_central(&data.features);
    let mut lines = Vec::new();
    let mut ok = true;
    for seeds in [
        vec![vec![3.75, 5.0], vec![6.25, 5.0]],
        vec![vec![3.75, 3.75], vec![6.25, 3.75], vec![3.75, 6.25], vec![6.25, 6.25]],
    ] {
        let m = seeds.len();
        let partition = Partition::from_seeds(&data.features, seeds).unwrap();
        let run = distributed_with_partition(&data.features, partition.clone(), &DistributedParams::default())
            .map_err(|e| e.to_string())?;
        // oracle: a cluster is split when its members carry different agent labels
        let labels = partition.labels();
        let split: Vec<&Vec<FeatureId>> = central
            .clusters()
            .iter()
            .filter(|c| c.iter().any(|id| labels[id] != labels[&c[0]]))
            .collect();
        let total: usize = split.iter().map(|c| c.len()).sum();
        let found: usize = split.iter().flat_map(|c| c.iter()).filter(|id| run.contested.staged.contains(id)).count();
        let flagged = split.iter().flat_map(|c| c.iter()).filter(|id| run.contested.features.contains_key(id)).count();
        ok &= split.len() >= 3 && found == total;
        lines.push(format!(
            "m={m}: {} split clusters, {found}/{total} features staged ({flagged} flagged individually)",
            split.len()
        ));
    }
    check(ok, lines.join("; "))
}

fn p_contested(seed: u64) -> Result<Vec<f64>, String> {
    let data = generate(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
    let central = quadratic_central(&data.features);
    let mut p = Vec::new();
    for m in [2, 4, 8] {
        let run = distributed_quickmatch(&data.features, m, &DistributedParams::default(), seed).map_err(|e| e.to_string())?;
        p.push(split_quality(&central, &run.partition, None).map_err(|e| e.to_string())?.p_contested);
    }
    Ok(p)
}

fn contested_trend() -> Outcome {
    let p = p_contested(0)?;
    // context only: the same sweep averaged over ten data/partition seeds
    let mut mean = [0.0; 3];
    for seed in 0..10 {
        for (acc, v) in mean.iter_mut().zip(p_contested(seed)?) {
            *acc += v / 10.0;
        }
    }
    check(
        p[2] >= p[0],
        format!(
            "seed 0 p_contested m=2: {:.1}%, m=4: {:.1}%, m=8: {:.1}% (mean of seeds 0-9: {:.1}%, {:.1}%, {:.1}%)",
            100.0 * p[0],
            100.0 * p[1],
            100.0 * p[2],
            100.0 * mean[0],
            100.0 * mean[1],
            100.0 * mean[2]
        ),
    )
}

fn baseline_comparison() -> Outcome {
    let cfg = DetectionConfig::default();
    let r = run_detection(&cfg, &MatchParams::default(), &RatioTest::default()).map_err(|e| e.to_string())?;
    let errors = r.quickmatch.auc < 1.0 || r.baseline.auc < 1.0;
    check(
        errors && r.quickmatch.auc >= r.baseline.auc,
        format!("spread {}: QuickMatch AUC {:.4}, ratio test AUC {:.4}", cfg.spread, r.quickmatch.auc, r.baseline.auc),
    )
}

fn dmatch_once(input: &Path, out: &Path, execution: &str) -> Result<(Vec<u8>, String), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_qm"))
        .args(["dmatch", "--agents", "4", "--seed", "5", "--execution", execution, "--input"])
        .arg(input)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let clustering = std::fs::read(out.join("clustering.json")).map_err(|e| e.to_string())?;
    let ledger = std::fs::read(out.join("ledger.json")).map_err(|e| e.to_string())?;
    Ok((clustering, hex::encode(Sha256::digest(&ledger))))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("features.txt");
    save_features(&synthetic().features, &input).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for (k, mode) in ["sequential", "sequential", "parallel", "parallel"].into_iter().enumerate() {
        results.push(dmatch_once(&input, &dir.path().join(format!("run{k}")), mode)?);
    }
    let same = results.windows(2).all(|w| w[0] == w[1]);
    check(same, format!("4 runs (2 sequential, 2 parallel) agree; ledger {}", &results[0].1[..16]))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("synthetic equivalence", synthetic_equivalence),
        ("degenerate equivalence", degenerate_equivalence),
        ("boundary-distance oracle", boundary_oracle),
        ("brute-force oracles", brute_force_oracles),
        ("invariant suite", invariants),
        ("contested-detection recall", contested_recall),
        ("contested-cluster trend", contested_trend),
        ("baseline comparison", baseline_comparison),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (n, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("criterion {}: PASS {name}: {msg}", n + 1),
            Err(msg) => {
                println!("criterion {}: FAIL {name}: {msg}", n + 1);
                failed.push(n + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
