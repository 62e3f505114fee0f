//! The `qm` command-line front end.
//!
//! Exit codes: 0 on success, 1 on invalid input (including bad flags), 2 when
//! an internal invariant fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::clustering::{load_clustering, save_clustering, Clustering};
use crate::density::Kernel;
use crate::distributed::{
    distributed_quickmatch, AgentStats, DistributedParams, DistributedRun, Execution, LedgerSummary,
    SigmaPMode, TransferChain,
};
use crate::error::Error;
use crate::eval::{
    compare_clusterings, run_detection, split_quality, DetectionConfig, RatioTest, DEFAULT_RATIO,
};
use crate::features::{load_features, save_features, FeatureId, FeatureSet};
use crate::partition::{Partition, Seeding};
use crate::quickmatch::{quickmatch, MatchParams, DEFAULT_RHO};
use crate::synth::{generate, SynthConfig};

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "qm", version, about = "Consistent multi-image feature matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of Gaussian blobs on a grid.
    Generate(GenerateArgs),
    /// Run centralized QuickMatch.
    Match(MatchArgs),
    /// Run Distributed QuickMatch on a simulated agent network.
    Dmatch(DmatchArgs),
    /// Score a clustering against ground truth or a partition.
    Eval(EvalArgs),
    /// Sweep the agent count and emit a table plus plot data.
    Compare(CompareArgs),
    /// Image detection precision/recall: QuickMatch vs the ratio test.
    Detect(DetectArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 25, env = "QM_CLUSTERS")]
    pub clusters: usize,
    #[arg(long, default_value_t = 10, env = "QM_PER_CLUSTER")]
    pub per_cluster: usize,
    #[arg(long, default_value_t = 2, env = "QM_DIM")]
    pub dim: usize,
    /// Standard deviation of each blob.
    #[arg(long, default_value_t = 0.25, env = "QM_SPREAD", allow_negative_numbers = true)]
    pub spread: f64,
    /// Side of the square the blob centers span.
    #[arg(long, default_value_t = 10.0, env = "QM_EXTENT")]
    pub extent: f64,
    #[arg(long, default_value_t = 0, env = "QM_SEED")]
    pub seed: u64,
    /// Output directory; receives features.txt, truth.json and labels.csv.
    #[arg(long, env = "QM_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Feature file: `image feature v1 ... vF` per line.
    #[arg(long, env = "QM_INPUT")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RHO, env = "QM_RHO", allow_negative_numbers = true)]
    pub rho: f64,
    /// gaussian | gaussian-squared | quadratic | quadratic-as-printed
    #[arg(long, default_value = "gaussian", env = "QM_KERNEL")]
    pub kernel: Kernel,
    /// Output directory; receives clustering.json and report.json.
    #[arg(long, env = "QM_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DistributedArgs {
    #[arg(long, default_value_t = DEFAULT_RHO, env = "QM_RHO", allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value = "quadratic", env = "QM_KERNEL")]
    pub kernel: Kernel,
    /// Seed of the partition RNG.
    #[arg(long, default_value_t = 0, env = "QM_SEED")]
    pub seed: u64,
    /// kmeans | random
    #[arg(long, default_value = "kmeans", env = "QM_SEEDING")]
    pub seeding: Seeding,
    /// per-feature | agent-max
    #[arg(long, default_value = "per-feature", env = "QM_SIGMA_P")]
    pub sigma_p: SigmaPMode,
    /// sequential runs on one thread; parallel uses a thread pool.
    #[arg(long, default_value = "parallel", env = "QM_EXECUTION")]
    pub execution: Execution,
}

impl DistributedArgs {
    fn params(&self) -> DistributedParams {
        DistributedParams {
            rho: self.rho,
            kernel: self.kernel,
            seeding: self.seeding,
            sigma_p: self.sigma_p,
            execution: self.execution,
        }
    }
}

#[derive(Debug, Args)]
pub struct DmatchArgs {
    #[arg(long, env = "QM_INPUT")]
    pub input: PathBuf,
    #[arg(long, env = "QM_AGENTS")]
    pub agents: usize,
    #[command(flatten)]
    pub dist: DistributedArgs,
    /// Output directory; receives clustering.json, report.json, ledger.json,
    /// partition.json and contested.json.
    #[arg(long, env = "QM_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Compare two clusterings.
    Compare,
    /// Split quality of a clustering under a partition.
    Split,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Clustering to score.
    #[arg(long)]
    pub pred: PathBuf,
    /// A clustering (mode compare) or a partition.json (mode split).
    #[arg(long)]
    pub against: PathBuf,
    #[arg(long, value_enum, default_value = "compare")]
    pub mode: EvalMode,
    /// contested.json of the distributed run, for split detection metrics.
    #[arg(long)]
    pub contested: Option<PathBuf>,
    /// Also write the metric report here.
    #[arg(long, env = "QM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, env = "QM_INPUT")]
    pub input: PathBuf,
    /// Comma-separated agent counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8", env = "QM_AGENTS")]
    pub agents: Vec<usize>,
    #[command(flatten)]
    pub dist: DistributedArgs,
    /// Output directory; receives sweep.csv, points_m<M>.csv and
    /// seeds_m<M>.csv.
    #[arg(long, env = "QM_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, default_value_t = DetectionConfig::default().spread, env = "QM_SPREAD", allow_negative_numbers = true)]
    pub spread: f64,
    #[arg(long, default_value_t = 0, env = "QM_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_RHO, env = "QM_RHO", allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value = "gaussian", env = "QM_KERNEL")]
    pub kernel: Kernel,
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
    /// Output directory; receives pr.csv and detect.json.
    #[arg(long, env = "QM_OUT")]
    pub out: PathBuf,
}

/// Everything a run reports. Timings are excluded from `determinism_hash`,
/// so two runs with the same flags and seed share the hash.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub input: InputSummary,
    pub metrics: Metrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<LedgerSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<TransferChain>,
    /// Wall-clock seconds per phase.
    pub timing: BTreeMap<String, f64>,
    pub determinism_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: String,
    pub features: usize,
    pub images: usize,
    pub dim: usize,
}

impl InputSummary {
    fn of(path: &Path, fs: &FeatureSet) -> Self {
        Self {
            path: path.display().to_string(),
            features: fs.len(),
            images: fs.image_count(),
            dim: fs.dim(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub clusters_found: usize,
    pub largest_cluster: usize,
    pub singleton_clusters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributed: Option<DistributedMetrics>,
}

impl Metrics {
    fn of(c: &Clustering) -> Self {
        Self {
            clusters_found: c.len(),
            largest_cluster: c.clusters().iter().map(Vec::len).max().unwrap_or(0),
            singleton_clusters: c.clusters().iter().filter(|c| c.len() == 1).count(),
            distributed: None,
        }
    }
}

/// Summary figures of a distributed run. The centralized run with the
/// same kernel and `rho` serves as reference clustering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributedMetrics {
    pub agents: usize,
    pub centralized_clusters: usize,
    pub percent_contested_clusters: f64,
    pub split_features: usize,
    pub contested_features: usize,
    pub staged_features: usize,
    /// Share of features in split clusters that were staged for transfer,
    /// in percent. `None` when no cluster is split.
    pub percent_contested_features_found: Option<f64>,
    /// `|S_A| / split_features`, uncapped.
    pub p_split: Option<f64>,
    pub pairwise_f1_vs_centralized: f64,
    pub exact_equal_centralized: bool,
    pub transfer_messages: usize,
    pub forward_messages: usize,
    pub mean_compute_time_per_agent_s: f64,
    pub mean_qp_time_per_agent_s: f64,
}

/// Contested sets in a JSON-friendly shape.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ContestedFile {
    pub features: Vec<(FeatureId, Vec<usize>)>,
    pub staged: Vec<FeatureId>,
}

impl RunReport {
    /// SHA-256 over the report without its timing fields.
    pub fn compute_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip_nondeterministic(&mut v);
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    fn seal(mut self) -> Self {
        self.determinism_hash = self.compute_hash();
        self
    }
}

fn strip_nondeterministic(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| k != "timing" && k != "determinism_hash" && !k.ends_with("_time_per_agent_s"));
            map.values_mut().for_each(strip_nondeterministic);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_nondeterministic),
        _ => {}
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

fn out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Runs `f` on the thread budget of `exec`: one thread for sequential.
fn with_execution<T: Send>(exec: Execution, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match exec {
        Execution::Parallel => Ok(f()),
        Execution::Sequential => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
            Ok(pool.install(f))
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_clusters: a.clusters,
        per_cluster: a.per_cluster,
        dim: a.dim,
        spread: a.spread,
        extent: a.extent,
        seed: a.seed,
    };
    let data = generate(&cfg)?;
    out_dir(&a.out)?;
    save_features(&data.features, a.out.join("features.txt"))?;
    save_clustering(&data.truth, a.out.join("truth.json"))?;
    let mut labels = String::from("image,feature,cluster\n");
    for (id, c) in data.features.ids().iter().zip(&data.labels) {
        writeln!(labels, "{},{},{c}", id.image, id.index)?;
    }
    write(&a.out.join("labels.csv"), labels)?;
    say!(
        "{} features in {} images, {} clusters -> {}",
        data.features.len(),
        data.features.image_count(),
        data.truth.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_match(a: &MatchArgs) -> anyhow::Result<()> {
    let t0 = Instant::now();
    let fs = load_features(&a.input)?;
    let load_s = t0.elapsed().as_secs_f64();
    let params = MatchParams::new(a.rho, a.kernel)?;
    let t1 = Instant::now();
    let clustering = quickmatch(&fs, &params)?;
    let match_s = t1.elapsed().as_secs_f64();

    out_dir(&a.out)?;
    save_clustering(&clustering, a.out.join("clustering.json"))?;
    let report = RunReport {
        command: "match".into(),
        version: version(),
        config: serde_json::json!({
            "input": a.input.display().to_string(),
            "rho": rho_value(a.rho),
            "kernel": a.kernel.name(),
        }),
        input: InputSummary::of(&a.input, &fs),
        metrics: Metrics::of(&clustering),
        agents: Vec::new(),
        ledger: None,
        chains: Vec::new(),
        timing: BTreeMap::from([("load_s".into(), load_s), ("match_s".into(), match_s)]),
        determinism_hash: String::new(),
    }
    .seal();
    write_json(&a.out.join("report.json"), &report)?;
    say!("{} clusters -> {}", clustering.len(), a.out.display());
    Ok(())
}

fn rho_value(rho: f64) -> Value {
    if rho.is_finite() {
        rho.into()
    } else {
        "inf".into()
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Runs the distributed pipeline together with the centralized reference and
/// derives the summary metrics.
fn distributed_with_metrics(
    fs: &FeatureSet,
    m: usize,
    dist: &DistributedArgs,
) -> anyhow::Result<(DistributedRun, DistributedMetrics, BTreeMap<String, f64>)> {
    let params = dist.params();
    let t0 = Instant::now();
    let run = with_execution(dist.execution, || distributed_quickmatch(fs, m, &params, dist.seed))??;
    let distributed_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let central = with_execution(dist.execution, || quickmatch(fs, &params.match_params()))??;
    let centralized_s = t1.elapsed().as_secs_f64();

    let split = split_quality(&central, &run.partition, Some(&run.contested.staged))?;
    let cmp = compare_clusterings(&run.clustering, &central);
    let summary = run.ledger.summary();
    let metrics = DistributedMetrics {
        agents: m,
        centralized_clusters: central.len(),
        percent_contested_clusters: 100.0 * split.p_contested,
        split_features: split.split_feature_count,
        contested_features: run.contested.features.len(),
        staged_features: run.contested.staged.len(),
        percent_contested_features_found: split.contested_recall.map(|r| 100.0 * r),
        p_split: split.p_split,
        pairwise_f1_vs_centralized: cmp.pairwise_f1,
        exact_equal_centralized: cmp.exact_equal,
        transfer_messages: summary.transfer_messages,
        forward_messages: summary.forward_messages,
        mean_compute_time_per_agent_s: mean(run.agents.iter().map(AgentStats::compute_s)),
        mean_qp_time_per_agent_s: mean(run.agents.iter().map(AgentStats::qp_s)),
    };
    let timing = BTreeMap::from([
        ("distributed_s".to_string(), distributed_s),
        ("centralized_reference_s".to_string(), centralized_s),
    ]);
    Ok((run, metrics, timing))
}

fn contested_file(run: &DistributedRun) -> ContestedFile {
    ContestedFile {
        features: run
            .contested
            .features
            .iter()
            .map(|(id, t)| (*id, t.iter().copied().collect()))
            .collect(),
        staged: run.contested.staged.iter().copied().collect(),
    }
}

fn cmd_dmatch(a: &DmatchArgs) -> anyhow::Result<()> {
    if a.agents == 0 {
        return Err(Error::Input("--agents must be at least 1".into()).into());
    }
    let t0 = Instant::now();
    let fs = load_features(&a.input)?;
    let load_s = t0.elapsed().as_secs_f64();
    let (run, dm, mut timing) = distributed_with_metrics(&fs, a.agents, &a.dist)?;
    timing.insert("load_s".into(), load_s);

    out_dir(&a.out)?;
    save_clustering(&run.clustering, a.out.join("clustering.json"))?;
    write(&a.out.join("ledger.json"), serde_json::to_vec(&run.ledger)?)?;
    write_json(&a.out.join("partition.json"), &run.partition)?;
    write_json(&a.out.join("contested.json"), &contested_file(&run))?;

    let mut metrics = Metrics::of(&run.clustering);
    metrics.distributed = Some(dm);
    let report = RunReport {
        command: "dmatch".into(),
        version: version(),
        config: serde_json::json!({
            "input": a.input.display().to_string(),
            "agents": a.agents,
            "rho": rho_value(a.dist.rho),
            "kernel": a.dist.kernel.name(),
            "seed": a.dist.seed,
            "seeding": a.dist.seeding.to_string(),
            "sigma_p": a.dist.sigma_p.to_string(),
            "execution": a.dist.execution.to_string(),
        }),
        input: InputSummary::of(&a.input, &fs),
        metrics,
        agents: run.agents.clone(),
        ledger: Some(run.ledger.summary()),
        chains: run.ledger.chains(),
        timing,
        determinism_hash: String::new(),
    }
    .seal();
    write_json(&a.out.join("report.json"), &report)?;
    say!(
        "{} clusters, {} agents, ledger {} -> {}",
        run.clustering.len(),
        a.agents,
        run.ledger.hash(),
        a.out.display()
    );
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())).into())
}

fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let pred = load_clustering(&a.pred)?;
    let report: Value = match a.mode {
        EvalMode::Compare => {
            let other = load_clustering(&a.against)?;
            let pred_ids: std::collections::BTreeSet<_> = pred.clusters().iter().flatten().collect();
            let other_ids: std::collections::BTreeSet<_> = other.clusters().iter().flatten().collect();
            if pred_ids != other_ids {
                return Err(Error::input("the two clusterings cover different features").into());
            }
            serde_json::to_value(compare_clusterings(&pred, &other))?
        }
        EvalMode::Split => {
            let partition: Partition = read_json(&a.against)?;
            let contested: Option<ContestedFile> = a.contested.as_deref().map(read_json).transpose()?;
            let staged = contested.map(|c| c.staged.into_iter().collect());
            serde_json::to_value(split_quality(&pred, &partition, staged.as_ref())?)?
        }
    };
    let text = serde_json::to_string_pretty(&report)?;
    say!("{text}");
    if let Some(out) = &a.out {
        write(out, text + "\n")?;
    }
    Ok(())
}

/// Columns of the agent-count sweep, one row per agent count.
pub const SWEEP_HEADER: &str = "number_of_agents,compute_time_per_agent_s,post_qp_compute_time_per_agent_s,\
qp_time_per_agent_s,percent_contested_clusters,number_of_clusters_found,percent_contested_features_found,\
pairwise_f1_vs_centralized,exact_equal_centralized,transfer_messages,forward_messages,ledger_hash";

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn points_csv(fs: &FeatureSet, run: &DistributedRun) -> String {
    let agent = run.partition.labels();
    let local = run.local_clustering.labels();
    let fin = run.clustering.labels();
    let mut s = String::from("image,feature");
    for d in 0..fs.dim() {
        write!(s, ",x{d}").unwrap();
    }
    s.push_str(",agent,local_cluster,final_cluster,contested,staged,min_trigger\n");
    for (row, id) in fs.ids().iter().enumerate() {
        write!(s, "{},{}", id.image, id.index).unwrap();
        for v in fs.row(row) {
            write!(s, ",{v:?}").unwrap();
        }
        let triggers = run.contested.features.get(id);
        writeln!(
            s,
            ",{},{},{},{},{},{}",
            agent[id],
            local[id],
            fin[id],
            u8::from(triggers.is_some()),
            u8::from(run.contested.staged.contains(id)),
            triggers
                .and_then(|t| t.first())
                .map_or_else(String::new, |t| t.to_string()),
        )
        .unwrap();
    }
    s
}

fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    if a.agents.is_empty() || a.agents.contains(&0) {
        return Err(Error::input("--agents needs counts of at least 1").into());
    }
    let fs = load_features(&a.input)?;
    out_dir(&a.out)?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for &m in &a.agents {
        let (run, dm, _) = distributed_with_metrics(&fs, m, &a.dist)?;
        let compute = dm.mean_compute_time_per_agent_s;
        let qp = dm.mean_qp_time_per_agent_s;
        writeln!(
            csv,
            "{m},{compute:.6},{:.6},{},{:.4},{},{},{:.6},{},{},{},{}",
            compute - qp,
            if m == 1 { "NA".to_string() } else { format!("{qp:.6}") },
            dm.percent_contested_clusters,
            run.clustering.len(),
            na(dm.percent_contested_features_found),
            dm.pairwise_f1_vs_centralized,
            dm.exact_equal_centralized,
            dm.transfer_messages,
            dm.forward_messages,
            run.ledger.hash(),
        )?;
        write(&a.out.join(format!("points_m{m}.csv")), points_csv(&fs, &run))?;
        let mut seeds = String::from("agent");
        for d in 0..fs.dim() {
            write!(seeds, ",x{d}")?;
        }
        seeds.push('\n');
        for (k, s) in run.partition.seeds.iter().enumerate() {
            write!(seeds, "{k}")?;
            for v in s {
                write!(seeds, ",{v:?}")?;
            }
            seeds.push('\n');
        }
        write(&a.out.join(format!("seeds_m{m}.csv")), seeds)?;
    }
    write(&a.out.join("sweep.csv"), &csv)?;
    say!("{}", csv.trim_end());
    Ok(())
}

fn cmd_detect(a: &DetectArgs) -> anyhow::Result<()> {
    let cfg = DetectionConfig {
        spread: a.spread,
        seed: a.seed,
        ..DetectionConfig::default()
    };
    let params = MatchParams::new(a.rho, a.kernel)?;
    if !(a.ratio > 0.0 && a.ratio.is_finite()) {
        bail!(Error::input("--ratio must be positive"));
    }
    let test = RatioTest {
        ratio: a.ratio,
        ..RatioTest::default()
    };
    let r = run_detection(&cfg, &params, &test)?;
    out_dir(&a.out)?;
    let mut csv = String::from("method,threshold,precision,recall\n");
    for (name, curve) in [("quickmatch", &r.quickmatch), ("ratio_test", &r.baseline)] {
        for p in &curve.points {
            writeln!(csv, "{name},{},{:.6},{:.6}", p.threshold, p.precision, p.recall)?;
        }
    }
    write(&a.out.join("pr.csv"), csv)?;
    write_json(
        &a.out.join("detect.json"),
        &serde_json::json!({
            "config": cfg,
            "rho": rho_value(a.rho),
            "kernel": a.kernel.name(),
            "ratio": a.ratio,
            "quickmatch_auc": r.quickmatch.auc,
            "ratio_test_auc": r.baseline.auc,
            "quickmatch_counts": r.quickmatch_counts,
            "ratio_test_counts": r.baseline_counts,
        }),
    )?;
    say!(
        "PR AUC: quickmatch {:.4}, ratio test {:.4}",
        r.quickmatch.auc, r.baseline.auc
    );
    Ok(())
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Match(a) => cmd_match(a),
        Command::Dmatch(a) => cmd_dmatch(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Detect(a) => cmd_detect(a),
    }
}

/// Exit code for a failed run: 2 if an internal invariant broke, else 1.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let invariant = err
        .chain()
        .any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_invariant));
    if invariant {
        2
    } else {
        1
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return 1;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("error: invalid arguments"));
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os())
}
