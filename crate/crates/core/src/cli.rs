//! The `relclean` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration (including
//! usage errors), 3 for numerical failures. `--json` prints a machine-readable
//! summary on stdout; progress goes to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifier::{
    compute_prototypes, concat_all_classes, predict_batch, train_cosine, ClassifierWeights, TrainConfig, TrainingSet,
};
use crate::cleaners::{GcnTrainConfig, LinearConfig, LpConfig};
use crate::error::{Error, Result};
use crate::eval::{
    cumulative_histogram, format_histogram_csv, format_report_csv, format_summary_csv, relevance_report, run_episode,
    run_episodes, sweep_beta, sweep_lambda, Benchmark, ClassifierKind, EpisodeSpec, EvalConfig,
};
use crate::graph::{build_affinity, write_edge_csv};
use crate::io::{
    decode_feature_store, decode_weights, parse_flags, parse_labels, parse_relevance, read_feature_store, read_flags,
    read_labels, read_relevance, read_weights, write_feature_store, write_flags, write_labels, write_relevance,
    write_weights, FeatureStore, LabelTable, FEATURE_MAGIC, WEIGHTS_MAGIC,
};
use crate::pipeline::{clean_dataset, CleaningConfig, Dataset, Method};
use crate::synth::{generate, NegativeSource, SynthSpec};

pub const SEED_ENV: &str = "RELCLEAN_SEED";
const MISSING_PATH: &str = "missing required path";

/// λ values of the validation sweep.
pub const DEFAULT_LAMBDA_GRID: [f64; 8] = [0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0];
pub const DEFAULT_BETA_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Parser)]
#[command(name = "relclean", version, about = "Relevance estimation for noisy labels and few-shot classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate relevance of every noisy example, per class.
    Clean(CleanArgs),
    /// Build relevance-weighted class prototypes.
    Proto(ProtoArgs),
    /// Train a cosine classifier initialized from prototypes.
    Train(TrainArgs),
    /// Rank classes for each feature vector.
    Predict(PredictArgs),
    /// Episodic few-shot evaluation.
    Eval(EvalArgs),
    /// Sweep λ (GCN) or β (constant relevance) over a grid.
    Sweep(SweepArgs),
    /// Generate a synthetic benchmark.
    Synth(SynthArgs),
    /// Describe a feature store, weights file or CSV; optionally dump a class graph.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random choice [fallback: $RELCLEAN_SEED, then config, then 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: number of processors].
    #[arg(long)]
    jobs: Option<usize>,
    /// Print a JSON summary on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct CleanerArgs {
    /// Cleaning method [default: gcn].
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Weight of the noisy term of the GCN loss [default: 1.0].
    #[arg(long)]
    lambda: Option<f64>,
    /// Reciprocal nearest neighbors per example [default: 50].
    #[arg(long)]
    k_nn: Option<usize>,
    /// GCN training iterations [default: 100].
    #[arg(long)]
    iterations: Option<usize>,
    /// GCN Adam learning rate [default: 0.1].
    #[arg(long)]
    gcn_lr: Option<f64>,
    /// GCN dropout probability [default: 0.5].
    #[arg(long)]
    dropout: Option<f64>,
    /// GCN hidden width m [default: 16].
    #[arg(long)]
    hidden: Option<usize>,
    /// Label-propagation α [default: 0.9].
    #[arg(long)]
    alpha: Option<f64>,
    /// Constant noisy relevance for `--method beta` [default: 1.0].
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainerArgs {
    /// Training epochs [default: 30].
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate, cosine-annealed [default: 0.1].
    #[arg(long)]
    lr_start: Option<f64>,
    /// Final learning rate [default: 0.001].
    #[arg(long)]
    lr_end: Option<f64>,
    /// Examples with relevance below this are ignored [default: 0.1].
    #[arg(long)]
    floor: Option<f64>,
    /// Cosine logit scale s [default: 10].
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Gcn,
    Mlp,
    Lp,
    Similarity,
    Beta,
    Linear,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gcn => Method::Gcn,
            MethodArg::Mlp => Method::Mlp,
            MethodArg::Lp => Method::Lp,
            MethodArg::Similarity => Method::Similarity,
            MethodArg::Beta => Method::Beta,
            MethodArg::Linear => Method::Linear,
        }
    }
}

#[derive(Debug, Args)]
struct CleanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cleaner: CleanerArgs,
    /// Feature store (FSTO).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Label CSV `id,class,source`.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Relevance CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProtoArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Relevance CSV from `clean`.
    #[arg(long)]
    relevance: Option<PathBuf>,
    /// Classifier weights (WCLS) to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cosine logit scale s [default: 10].
    #[arg(long)]
    scale: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trainer: TrainerArgs,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    relevance: Option<PathBuf>,
    /// Initial weights [default: prototypes from the relevance file].
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Novel-class weights.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Base-class weights, placed before the novel classes.
    #[arg(long)]
    base_weights: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Restrict to the ids of this label CSV [default: every id in the store].
    #[arg(long)]
    ids: Option<PathBuf>,
    /// Ranked classes per example [default: 5].
    #[arg(long)]
    top_k: Option<usize>,
    /// Prediction CSV `id,rank,class,score` to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Feature store holding training and test examples.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Training labels: clean pool and noisy examples.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Test labels.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Clean examples per class, comma separated [default: 1].
    #[arg(long, value_delimiter = ',')]
    k_shots: Option<Vec<usize>>,
    /// Episodes per setting [default: 5].
    #[arg(long)]
    episodes: Option<usize>,
    /// Top-k accuracy [default: 5].
    #[arg(long)]
    top_k: Option<usize>,
    /// Classifier built from the relevance maps [default: prototype].
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Prototype,
    Cosine,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cleaner: CleanerArgs,
    #[command(flatten)]
    trainer: TrainerArgs,
    #[command(flatten)]
    bench: BenchArgs,
    /// Ground-truth flags CSV; adds a relevance report for the first episode.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Per-episode report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary CSV to write.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Cumulative histogram of first-episode noisy relevance to write.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    Lambda,
    Beta,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cleaner: CleanerArgs,
    #[command(flatten)]
    trainer: TrainerArgs,
    #[command(flatten)]
    bench: BenchArgs,
    /// Parameter to sweep.
    #[arg(long, value_enum, default_value = "lambda")]
    param: SweepParam,
    /// Sweep on this many classes held out by a seeded split instead of all of them.
    #[arg(long)]
    validation_classes: Option<usize>,
    /// Grid values, comma separated [default λ: 0.001,0.01,0.05,0.1,0.5,1.0,2.0,5.0; β: 0,0.1,…,1].
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Per-episode report CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory for features.fsto, labels.csv, test.csv and flags.csv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Clean candidates per class.
    #[arg(long)]
    clean: Option<usize>,
    /// Noisy examples per class.
    #[arg(long)]
    noisy: Option<usize>,
    /// Fraction of noisy examples that are negatives.
    #[arg(long)]
    noise_ratio: Option<f64>,
    /// Test examples per class.
    #[arg(long)]
    test: Option<usize>,
    /// Concentration; larger is tighter.
    #[arg(long)]
    kappa: Option<f64>,
    /// Classes each class borrows negatives from.
    #[arg(long, conflicts_with = "uniform_negatives")]
    confusers: Option<usize>,
    /// Draw negatives uniformly on the sphere.
    #[arg(long)]
    uniform_negatives: bool,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[command(flatten)]
    common: Common,
    /// File to describe.
    path: PathBuf,
    /// With a feature store: label CSV used to select `--class`.
    #[arg(long, requires = "class")]
    labels: Option<PathBuf>,
    /// Class whose affinity graph is dumped.
    #[arg(long, requires = "edges")]
    class: Option<String>,
    /// Edge CSV `src_id,dst_id,weight` to write.
    #[arg(long, requires = "labels")]
    edges: Option<PathBuf>,
    /// Reciprocal nearest neighbors [default: 50].
    #[arg(long)]
    k_nn: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub relevance: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanerSection {
    pub method: Method,
    pub k_nn: usize,
    pub beta: f64,
}

impl Default for CleanerSection {
    fn default() -> Self {
        let c = CleaningConfig::default();
        Self {
            method: c.method,
            k_nn: c.k_nn,
            beta: c.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k_shots: usize,
    pub episodes: usize,
    pub top_k: usize,
    pub classifier: ClassifierKind,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EpisodeSpec::default();
        Self {
            k_shots: e.k_shots,
            episodes: e.episodes,
            top_k: EvalConfig::default().top_k,
            classifier: ClassifierKind::Prototype,
        }
    }
}

/// Contents of `--config`: one flat section per module.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub cleaner: CleanerSection,
    pub gcn: GcnTrainConfig,
    pub lp: LpConfig,
    pub linear: LinearConfig,
    pub train: TrainConfig,
    pub episode: EvalSection,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::contract(format!("{}: {e}", path.display())))
    }

    pub fn cleaning(&self) -> CleaningConfig {
        CleaningConfig {
            method: self.cleaner.method,
            k_nn: self.cleaner.k_nn,
            gcn: self.gcn,
            lp: self.lp,
            linear: self.linear,
            beta: self.cleaner.beta,
        }
    }
}

/// Resolved per-invocation context.
struct Ctx {
    cfg: PipelineConfig,
    seed: u64,
    json: bool,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::contract(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let seed = common.seed.or(env).or(cfg.seed).unwrap_or(0);
        Ok(Self {
            cfg,
            seed,
            json: common.json,
        })
    }

    fn path(&self, flag: &Option<PathBuf>, from_cfg: impl Fn(&Paths) -> &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| from_cfg(&self.cfg.paths).clone())
            .ok_or_else(|| Error::contract(format!("{MISSING_PATH} --{name}")))
    }

    fn cleaning(&self, a: &CleanerArgs) -> Result<CleaningConfig> {
        let mut c = self.cfg.cleaning();
        if let Some(m) = a.method {
            c.method = m.into();
        }
        set(&mut c.gcn.lambda, a.lambda);
        set(&mut c.k_nn, a.k_nn);
        set(&mut c.gcn.iterations, a.iterations);
        set(&mut c.gcn.lr, a.gcn_lr);
        set(&mut c.gcn.dropout, a.dropout);
        set(&mut c.gcn.hidden, a.hidden);
        set(&mut c.lp.alpha, a.alpha);
        set(&mut c.beta, a.beta);
        c.gcn.validate()?;
        c.lp.validate()?;
        if !(0.0..=1.0).contains(&c.beta) {
            return Err(Error::contract(format!("beta must be in [0, 1], got {}", c.beta)));
        }
        Ok(c)
    }

    fn train(&self, a: &TrainerArgs) -> Result<TrainConfig> {
        let mut t = self.cfg.train;
        set(&mut t.epochs, a.epochs);
        set(&mut t.batch_size, a.batch_size);
        set(&mut t.lr_start, a.lr_start);
        set(&mut t.lr_end, a.lr_end);
        set(&mut t.floor, a.floor);
        set(&mut t.scale, a.scale);
        t.seed = self.seed;
        t.validate()?;
        Ok(t)
    }

    fn emit(&self, summary: Value) {
        if self.json {
            println!("{summary}");
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("relclean: {}", msg.as_ref());
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let jobs = common(&cli.command).jobs;
    let name = subcommand_name(&cli.command);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(Error::contract(format!("cannot start worker pool: {e}"))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("relclean: error: {e}");
            if matches!(&e, Error::Contract(m) if m.starts_with(MISSING_PATH)) {
                print_usage(name);
            }
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Clean(_) => "clean",
        Command::Proto(_) => "proto",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Eval(_) => "eval",
        Command::Sweep(_) => "sweep",
        Command::Synth(_) => "synth",
        Command::Inspect(_) => "inspect",
    }
}

fn print_usage(name: &str) {
    use clap::CommandFactory;
    let mut cmd = Cli::command();
    cmd.build();
    if let Some(sub) = cmd.find_subcommand_mut(name) {
        eprintln!("{}", sub.render_usage());
    }
}

fn common(c: &Command) -> &Common {
    match c {
        Command::Clean(a) => &a.common,
        Command::Proto(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Predict(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Inspect(a) => &a.common,
    }
}

fn dispatch(command: Command) -> Result<()> {
    let ctx = Ctx::new(common(&command))?;
    match command {
        Command::Clean(a) => clean(&ctx, a),
        Command::Proto(a) => proto(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Inspect(a) => inspect(&ctx, a),
    }
}

fn clean(ctx: &Ctx, a: CleanArgs) -> Result<()> {
    let cfg = ctx.cleaning(&a.cleaner)?;
    let store = read_feature_store(ctx.path(&a.features, |p| &p.features, "features")?)?;
    let labels = read_labels(ctx.path(&a.labels, |p| &p.labels, "labels")?)?;
    let out = ctx.path(&a.out, |p| &p.out, "out")?;
    let dataset = Dataset::new(store, labels)?;
    progress(format!(
        "cleaning {} classes with {} (seed {})",
        dataset.classes().len(),
        cfg.method,
        ctx.seed
    ));
    let maps = clean_dataset(&dataset, &cfg, ctx.seed)?;
    write_relevance(&out, &maps, Some(ctx.seed))?;
    let classes: Vec<Value> = maps
        .iter()
        .map(|m| json!({"class": m.class(), "examples": m.len(), "mean_noisy": m.mean_noisy()}))
        .collect();
    ctx.emit(json!({
        "command": "clean",
        "method": cfg.method,
        "param": cfg.param(),
        "seed": ctx.seed,
        "out": out,
        "classes": classes,
    }));
    Ok(())
}

fn proto(ctx: &Ctx, a: ProtoArgs) -> Result<()> {
    let store = read_feature_store(ctx.path(&a.features, |p| &p.features, "features")?)?;
    let maps = read_relevance(ctx.path(&a.relevance, |p| &p.relevance, "relevance")?)?;
    let out = ctx.path(&a.out, |p| &p.out, "out")?;
    let scale = a.scale.unwrap_or(ctx.cfg.train.scale);
    let weights = compute_prototypes(&store, &maps, scale)?;
    write_weights(&out, &weights)?;
    progress(format!("wrote {} prototypes to {}", weights.num_classes(), out.display()));
    ctx.emit(json!({
        "command": "proto",
        "classes": weights.class_ids(),
        "dim": weights.dim(),
        "scale": weights.scale(),
        "out": out,
    }));
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let cfg = ctx.train(&a.trainer)?;
    let store = read_feature_store(ctx.path(&a.features, |p| &p.features, "features")?)?;
    let maps = read_relevance(ctx.path(&a.relevance, |p| &p.relevance, "relevance")?)?;
    let out = ctx.path(&a.out, |p| &p.out, "out")?;
    let init = match &a.init {
        Some(p) => read_weights(p)?,
        None => compute_prototypes(&store, &maps, cfg.scale)?,
    };
    let set = TrainingSet::from_maps(&store, &maps, init.class_ids())?;
    progress(format!(
        "training {} classes on {} examples for {} epochs (seed {})",
        init.num_classes(),
        set.len(),
        cfg.epochs,
        ctx.seed
    ));
    let weights = train_cosine(&set, &cfg, &init)?;
    write_weights(&out, &weights)?;
    ctx.emit(json!({
        "command": "train",
        "classes": weights.num_classes(),
        "examples": set.len(),
        "epochs": cfg.epochs,
        "seed": ctx.seed,
        "out": out,
    }));
    Ok(())
}

fn predict(ctx: &Ctx, a: PredictArgs) -> Result<()> {
    let novel = read_weights(ctx.path(&a.weights, |p| &p.weights, "weights")?)?;
    let weights: ClassifierWeights = match &a.base_weights {
        Some(p) => concat_all_classes(Some(&read_weights(p)?), &novel)?,
        None => novel,
    };
    let store = read_feature_store(ctx.path(&a.features, |p| &p.features, "features")?)?;
    let out = ctx.path(&a.out, |p| &p.out, "out")?;
    let idx: Vec<usize> = match &a.ids {
        Some(p) => {
            let table = read_labels(p)?;
            let mut seen = std::collections::HashSet::new();
            table
                .rows()
                .iter()
                .filter(|r| seen.insert(r.id.clone()))
                .map(|r| {
                    store
                        .index_of(&r.id)
                        .ok_or_else(|| Error::contract(format!("id {} not in feature store", r.id)))
                })
                .collect::<Result<_>>()?
        }
        None => (0..store.len()).collect(),
    };
    let top_k = a.top_k.unwrap_or(ctx.cfg.episode.top_k).clamp(1, weights.num_classes());
    let ranked = predict_batch(&weights, &store.select(&idx), top_k)?;
    let mut text = String::from("id,rank,class,score\n");
    for (&i, row) in idx.iter().zip(&ranked) {
        for (rank, (c, score)) in row.iter().enumerate() {
            text.push_str(&format!(
                "{},{},{},{:.6}\n",
                store.ids()[i],
                rank + 1,
                weights.class_ids()[*c],
                score
            ));
        }
    }
    write_text(&out, &text)?;
    progress(format!("ranked {} examples over {} classes", idx.len(), weights.num_classes()));
    ctx.emit(json!({
        "command": "predict",
        "examples": idx.len(),
        "classes": weights.num_classes(),
        "top_k": top_k,
        "out": out,
    }));
    Ok(())
}

fn load_bench(ctx: &Ctx, a: &BenchArgs) -> Result<Benchmark> {
    let store = read_feature_store(ctx.path(&a.features, |p| &p.features, "features")?)?;
    let labels = read_labels(ctx.path(&a.labels, |p| &p.labels, "labels")?)?;
    let test = read_labels(ctx.path(&a.test, |p| &p.test, "test")?)?;
    Benchmark::new(Dataset::new(store, labels)?, test)
}

fn eval_config(ctx: &Ctx, cleaner: &CleanerArgs, trainer: &TrainerArgs, b: &BenchArgs) -> Result<EvalConfig> {
    Ok(EvalConfig {
        cleaning: ctx.cleaning(cleaner)?,
        classifier: match b.classifier {
            Some(ClassifierArg::Prototype) => ClassifierKind::Prototype,
            Some(ClassifierArg::Cosine) => ClassifierKind::Cosine,
            None => ctx.cfg.episode.classifier,
        },
        train: ctx.train(trainer)?,
        top_k: b.top_k.unwrap_or(ctx.cfg.episode.top_k),
    })
}

fn shots(ctx: &Ctx, b: &BenchArgs) -> Vec<usize> {
    b.k_shots.clone().unwrap_or_else(|| vec![ctx.cfg.episode.k_shots])
}

fn episode_spec(ctx: &Ctx, b: &BenchArgs) -> EpisodeSpec {
    EpisodeSpec {
        k_shots: ctx.cfg.episode.k_shots,
        episodes: b.episodes.unwrap_or(ctx.cfg.episode.episodes),
        seed: ctx.seed,
    }
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let cfg = eval_config(ctx, &a.cleaner, &a.trainer, &a.bench)?;
    let bench = load_bench(ctx, &a.bench)?;
    let spec = episode_spec(ctx, &a.bench);
    let k_shots = shots(ctx, &a.bench);
    progress(format!(
        "evaluating {} over k = {:?}, {} episodes (seed {})",
        cfg.cleaning.method, k_shots, spec.episodes, ctx.seed
    ));
    let reports = k_shots
        .iter()
        .map(|&k| run_episodes(&bench, &EpisodeSpec { k_shots: k, ..spec }, &cfg))
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        progress(format!("k={}: {:.4} ± {:.4}", r.k_shots, r.mean, r.std));
    }
    if let Some(out) = a.out.as_ref().or(ctx.cfg.paths.out.as_ref()) {
        write_text(out, &format_report_csv(&reports, Some(ctx.seed)))?;
    }
    if let Some(path) = &a.summary {
        write_text(path, &format_summary_csv(&reports, Some(ctx.seed)))?;
    }
    let truth_path = a.truth.as_ref().or(ctx.cfg.paths.truth.as_ref());
    let mut relevance = Value::Null;
    if truth_path.is_some() || a.histogram.is_some() {
        let first = run_episode(&bench, k_shots[0], &cfg, spec.episode_seed(0))?;
        if let Some(p) = truth_path {
            relevance = serde_json::to_value(relevance_report(&first.relevance, &read_flags(p)?)?)
                .expect("report serializes");
        }
        if let Some(p) = &a.histogram {
            write_text(p, &format_histogram_csv(&cumulative_histogram(&first.relevance, 20), Some(ctx.seed)))?;
        }
    }
    ctx.emit(json!({
        "command": "eval",
        "seed": ctx.seed,
        "top_k": cfg.top_k,
        "reports": reports,
        "relevance": relevance,
    }));
    Ok(())
}

fn sweep(ctx: &Ctx, a: SweepArgs) -> Result<()> {
    let cfg = eval_config(ctx, &a.cleaner, &a.trainer, &a.bench)?;
    let mut bench = load_bench(ctx, &a.bench)?;
    if let Some(n) = a.validation_classes {
        bench = bench.split_classes(n, ctx.seed)?.0;
    }
    let spec = episode_spec(ctx, &a.bench);
    let k_shots = shots(ctx, &a.bench);
    let (name, result) = match a.param {
        SweepParam::Lambda => {
            let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec());
            let mut c = cfg;
            c.cleaning.method = Method::Gcn;
            progress(format!("sweeping λ over {grid:?}, k = {k_shots:?}"));
            ("lambda", sweep_lambda(&bench, &k_shots, &grid, &spec, &c)?)
        }
        SweepParam::Beta => {
            let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_BETA_GRID.to_vec());
            progress(format!("sweeping β over {grid:?}, k = {k_shots:?}"));
            ("beta", sweep_beta(&bench, &k_shots, &grid, &spec, &cfg)?)
        }
    };
    if let Some(out) = a.out.as_ref().or(ctx.cfg.paths.out.as_ref()) {
        write_text(out, &format_report_csv(&result.reports, Some(ctx.seed)))?;
    }
    if let Some(path) = &a.summary {
        write_text(path, &format_summary_csv(&result.reports, Some(ctx.seed)))?;
    }
    let best: Vec<Value> = result
        .best
        .iter()
        .map(|(k, p)| if name == "beta" { json!({"value": p}) } else { json!({"k_shots": k, "value": p}) })
        .collect();
    for b in &best {
        progress(format!("best {name}: {b}"));
    }
    ctx.emit(json!({
        "command": "sweep",
        "param": name,
        "seed": ctx.seed,
        "best": best,
        "reports": result.reports,
    }));
    Ok(())
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec {
        seed: ctx.seed,
        ..SynthSpec::default()
    };
    set(&mut spec.classes, a.classes);
    set(&mut spec.dim, a.dim);
    set(&mut spec.clean_per_class, a.clean);
    set(&mut spec.noisy_per_class, a.noisy);
    set(&mut spec.noise_ratio, a.noise_ratio);
    set(&mut spec.test_per_class, a.test);
    set(&mut spec.kappa, a.kappa);
    if a.uniform_negatives {
        spec.negatives = NegativeSource::Uniform;
    } else if let Some(c) = a.confusers {
        spec.negatives = NegativeSource::OtherClasses { confusers: c };
    }
    let data = generate(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let dir = &a.out_dir;
    write_feature_store(dir.join("features.fsto"), &data.store)?;
    write_labels(dir.join("labels.csv"), &data.labels, Some(ctx.seed))?;
    write_labels(dir.join("test.csv"), &data.test_labels, Some(ctx.seed))?;
    write_flags(dir.join("flags.csv"), &data.truth, Some(ctx.seed))?;
    progress(format!(
        "wrote {} examples of {} classes in {} dimensions to {}",
        data.store.len(),
        spec.classes,
        spec.dim,
        dir.display()
    ));
    ctx.emit(json!({
        "command": "synth",
        "spec": spec,
        "examples": data.store.len(),
        "out_dir": dir,
    }));
    Ok(())
}

fn describe_store(store: &FeatureStore) -> Value {
    let norms: Vec<f64> = (0..store.len()).map(|i| crate::numerics::norm(&store.vector(i))).collect();
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({
        "format": "fsto",
        "examples": store.len(),
        "dim": store.dim(),
        "min_norm": min,
        "max_norm": max,
        "first_ids": store.ids().iter().take(5).collect::<Vec<_>>(),
    })
}

fn describe_csv(text: &str) -> Result<Value> {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::contract("empty file"))?;
    let summary = match header {
        "id,class,source" => {
            let t: LabelTable = parse_labels(text.as_bytes())?;
            json!({"format": "labels", "rows": t.len(), "classes": t.classes().len()})
        }
        "id,class,relevance,provenance" => {
            let maps = parse_relevance(text.as_bytes())?;
            let means: Vec<Value> = maps
                .iter()
                .map(|m| json!({"class": m.class(), "examples": m.len(), "mean_noisy": m.mean_noisy()}))
                .collect();
            json!({"format": "relevance", "classes": means})
        }
        "id,class,truth" => {
            let t = parse_flags(text.as_bytes())?;
            json!({"format": "flags", "rows": t.len()})
        }
        other => {
            let rows = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count() - 1;
            match other {
                "src_id,dst_id,weight" => json!({"format": "edges", "rows": rows}),
                "method,k_shots,param,episode,accuracy" => json!({"format": "eval report", "rows": rows}),
                "method,k_shots,param,mean,std" => json!({"format": "eval summary", "rows": rows}),
                "id,rank,class,score" => json!({"format": "predictions", "rows": rows}),
                "bin_upper,count" => json!({"format": "histogram", "rows": rows}),
                _ => return Err(Error::contract(format!("unrecognized CSV header {other:?}"))),
            }
        }
    };
    Ok(summary)
}

fn inspect(ctx: &Ctx, a: InspectArgs) -> Result<()> {
    let bytes = fs::read(&a.path).map_err(|e| Error::io(&a.path, e))?;
    let summary = if bytes.starts_with(&FEATURE_MAGIC) {
        let store = decode_feature_store(&bytes)?;
        let mut s = describe_store(&store);
        if let (Some(labels), Some(class), Some(edges)) = (&a.labels, &a.class, &a.edges) {
            let dataset = Dataset::new(store, read_labels(labels)?)?;
            let problem = dataset.problem(class)?;
            let k_nn = a.k_nn.unwrap_or(ctx.cfg.cleaner.k_nn);
            let graph = build_affinity(problem.features(), problem.ids(), k_nn)?;
            let file = fs::File::create(edges).map_err(|e| Error::io(edges, e))?;
            write_edge_csv(std::io::BufWriter::new(file), &graph, problem.ids()).map_err(|e| Error::io(edges, e))?;
            s["graph"] = json!({"class": class, "nodes": graph.n(), "edges": graph.edge_count(), "k_nn": k_nn});
        }
        s
    } else if bytes.starts_with(&WEIGHTS_MAGIC) {
        let w = decode_weights(&bytes)?;
        json!({"format": "wcls", "classes": w.class_ids(), "dim": w.dim(), "scale": w.scale()})
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::contract(format!("{}: not a feature store, weights file or CSV", a.path.display())))?;
        describe_csv(text)?
    };
    if ctx.json {
        ctx.emit(summary);
    } else {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    }
    Ok(())
}
