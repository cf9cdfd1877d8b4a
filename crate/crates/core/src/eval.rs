//! Episodic few-shot evaluation, λ/β sweeps and relevance-quality reports.
//!
//! An episode samples `k` clean examples per class (seeded), cleans every
//! class with the chosen method, builds a classifier from the relevance
//! maps and measures top-k accuracy on a held-out test set. Episodes are
//! keyed by seed only, so every method sees the same clean subsets.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{compute_prototypes, predict_batch, train_cosine, TrainConfig, TrainingSet};
use crate::cleaners::RelevanceMap;
use crate::error::{Error, Result};
use crate::io::{LabelTable, Truth, TruthTable};
use crate::numerics::{derive_seed, Rng};
use crate::pipeline::{clean_dataset, sample_clean_subset, CleaningConfig, Dataset, Method};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSpec {
    pub k_shots: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            k_shots: 1,
            episodes: 5,
            seed: 0,
        }
    }
}

impl EpisodeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::contract("need at least one episode"));
        }
        if self.k_shots == 0 {
            return Err(Error::contract("need at least one clean example per class"));
        }
        Ok(())
    }

    /// Seed of episode `e`.
    pub fn episode_seed(&self, e: usize) -> u64 {
        derive_seed(self.seed, e as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Fixed relevance-weighted prototypes.
    Prototype,
    /// Cosine classifier trained from the prototypes.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub cleaning: CleaningConfig,
    pub classifier: ClassifierKind,
    pub train: TrainConfig,
    /// Clamped to the number of classes.
    pub top_k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cleaning: CleaningConfig::default(),
            classifier: ClassifierKind::Prototype,
            train: TrainConfig::default(),
            top_k: 5,
        }
    }
}

/// Training pool (all clean candidates plus noisy examples) and a test set.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub pool: Dataset,
    pub test: LabelTable,
}

impl Benchmark {
    pub fn new(pool: Dataset, test: LabelTable) -> Result<Self> {
        if let Some(row) = test.rows().iter().find(|r| pool.store().index_of(&r.id).is_none()) {
            return Err(Error::contract(format!("test id {} not in feature store", row.id)));
        }
        Ok(Self { pool, test })
    }

    /// Seeded split into disjoint class sets: `(validation, evaluation)`, the
    /// first holding `validation_classes` classes. Each side keeps only its
    /// classes' training and test rows.
    pub fn split_classes(&self, validation_classes: usize, seed: u64) -> Result<(Benchmark, Benchmark)> {
        let mut classes = self.pool.classes();
        if validation_classes == 0 || validation_classes >= classes.len() {
            return Err(Error::contract(format!(
                "cannot hold out {validation_classes} of {} classes",
                classes.len()
            )));
        }
        Rng::new(seed).shuffle(&mut classes);
        let val: HashSet<&str> = classes[..validation_classes].iter().map(String::as_str).collect();
        let side = |keep_val: bool| -> Result<Benchmark> {
            let pick = |t: &LabelTable| {
                LabelTable::new(
                    t.rows()
                        .iter()
                        .filter(|r| val.contains(r.class.as_str()) == keep_val)
                        .cloned()
                        .collect(),
                )
            };
            Benchmark::new(self.pool.with_labels(pick(self.pool.labels())?)?, pick(&self.test)?)
        };
        Ok((side(true)?, side(false)?))
    }
}

/// Fraction of examples whose true label is among the first `top_k` ranked classes.
pub fn topk_accuracy(rankings: &[Vec<usize>], labels: &[usize], top_k: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = rankings
        .iter()
        .zip(labels)
        .filter(|(ranked, y)| ranked.iter().take(top_k).any(|c| c == *y))
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub accuracy: f64,
    pub relevance: Vec<RelevanceMap>,
}

/// One episode: sample, clean, classify, score.
pub fn run_episode(bench: &Benchmark, k_shots: usize, cfg: &EvalConfig, seed: u64) -> Result<EpisodeOutcome> {
    let labels = sample_clean_subset(bench.pool.labels(), k_shots, seed)?;
    let episode = bench.pool.with_labels(labels)?;
    let maps = clean_dataset(&episode, &cfg.cleaning, derive_seed(seed, 0x636c_6561))?;
    let store = episode.store();

    let protos = compute_prototypes(store, &maps, cfg.train.scale)?;
    let weights = match cfg.classifier {
        ClassifierKind::Prototype => protos,
        ClassifierKind::Cosine => {
            let set = TrainingSet::from_maps(store, &maps, protos.class_ids())?;
            let train = TrainConfig {
                seed: derive_seed(seed, 0x7472_6169),
                ..cfg.train
            };
            train_cosine(&set, &train, &protos)?
        }
    };

    let mut idx = Vec::with_capacity(bench.test.len());
    let mut truth = Vec::with_capacity(bench.test.len());
    for row in bench.test.rows() {
        let Some(label) = weights.class_index(&row.class) else {
            return Err(Error::contract(format!("test class {} has no training data", row.class)));
        };
        idx.push(store.index_of(&row.id).expect("validated"));
        truth.push(label);
    }
    let top_k = cfg.top_k.clamp(1, weights.num_classes());
    let ranked: Vec<Vec<usize>> = predict_batch(&weights, &store.select(&idx), top_k)?
        .into_iter()
        .map(|r| r.into_iter().map(|(c, _)| c).collect())
        .collect();
    Ok(EpisodeOutcome {
        accuracy: topk_accuracy(&ranked, &truth, top_k),
        relevance: maps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: Method,
    pub k_shots: usize,
    pub param: f64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_accuracies(method: Method, k_shots: usize, param: f64, accuracies: Vec<f64>) -> Self {
        let n = accuracies.len().max(1) as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        Self {
            method,
            k_shots,
            param,
            accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

/// All episodes of `spec`, run concurrently; results are in episode order.
pub fn run_episodes(bench: &Benchmark, spec: &EpisodeSpec, cfg: &EvalConfig) -> Result<EvalReport> {
    spec.validate()?;
    let accuracies = (0..spec.episodes)
        .into_par_iter()
        .map(|e| run_episode(bench, spec.k_shots, cfg, spec.episode_seed(e)).map(|o| o.accuracy))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_accuracies(
        cfg.cleaning.method,
        spec.k_shots,
        cfg.cleaning.param(),
        accuracies,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub reports: Vec<EvalReport>,
    /// `(k_shots, selected parameter)`; one entry per k for λ, a single shared value for β.
    pub best: Vec<(usize, f64)>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::contract("sweep grid is empty"));
    }
    Ok(())
}

/// Highest score wins; ties go to the smaller parameter.
fn select(candidates: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    candidates
        .fold(None, |best: Option<(f64, f64)>, (param, score)| match best {
            Some((bp, bs)) if bs > score || (bs == score && bp <= param) => Some((bp, bs)),
            _ => Some((param, score)),
        })
        .map(|(p, _)| p)
}

fn sweep(
    bench: &Benchmark,
    k_shots: &[usize],
    grid: &[f64],
    spec: &EpisodeSpec,
    cfg: &EvalConfig,
    set_param: impl Fn(&mut EvalConfig, f64),
) -> Result<Vec<EvalReport>> {
    check_grid(grid)?;
    let mut reports = Vec::with_capacity(grid.len() * k_shots.len());
    for &k in k_shots {
        for &p in grid {
            let mut c = *cfg;
            set_param(&mut c, p);
            let s = EpisodeSpec { k_shots: k, ..*spec };
            reports.push(run_episodes(bench, &s, &c)?);
        }
    }
    Ok(reports)
}

/// Evaluates the GCN for every λ in `grid` and every k; picks the best λ per k.
pub fn sweep_lambda(
    bench: &Benchmark,
    k_shots: &[usize],
    grid: &[f64],
    spec: &EpisodeSpec,
    cfg: &EvalConfig,
) -> Result<SweepResult> {
    let reports = sweep(bench, k_shots, grid, spec, cfg, |c, p| c.cleaning.gcn.lambda = p)?;
    let best = k_shots
        .iter()
        .map(|&k| {
            let pick = select(reports.iter().filter(|r| r.k_shots == k).map(|r| (r.param, r.mean)));
            (k, pick.expect("grid is non-empty"))
        })
        .collect();
    Ok(SweepResult { reports, best })
}

/// Evaluates β-relevance for every β in `grid`; picks a single β* maximizing
/// the accuracy averaged over all k.
pub fn sweep_beta(
    bench: &Benchmark,
    k_shots: &[usize],
    grid: &[f64],
    spec: &EpisodeSpec,
    cfg: &EvalConfig,
) -> Result<SweepResult> {
    let mut base = *cfg;
    base.cleaning.method = Method::Beta;
    let reports = sweep(bench, k_shots, grid, spec, &base, |c, p| c.cleaning.beta = p)?;
    let pick = select(grid.iter().map(|&p| {
        let rows: Vec<f64> = reports.iter().filter(|r| r.param == p).map(|r| r.mean).collect();
        (p, rows.iter().sum::<f64>() / rows.len().max(1) as f64)
    }))
    .expect("grid is non-empty");
    Ok(SweepResult {
        reports,
        best: vec![(0, pick)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelevanceReport {
    pub positives: usize,
    pub negatives: usize,
    /// `None` when there are no positives.
    pub mean_positive: Option<f64>,
    /// `None` when there are no negatives.
    pub mean_negative: Option<f64>,
    /// `None` when there are no flagged noisy examples at all.
    pub noise_ratio: Option<f64>,
}

/// Mean relevance of ground-truth positive and negative noisy examples.
/// Noisy entries without a flag are an error.
pub fn relevance_report(maps: &[RelevanceMap], truth: &TruthTable) -> Result<RelevanceReport> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for map in maps {
        for e in map.noisy() {
            match truth.get(&e.id, map.class()) {
                Some(Truth::Positive) => pos.push(e.relevance),
                Some(Truth::Negative) => neg.push(e.relevance),
                None => {
                    return Err(Error::contract(format!(
                        "no ground truth for noisy example ({}, {})",
                        e.id,
                        map.class()
                    )))
                }
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let total = pos.len() + neg.len();
    Ok(RelevanceReport {
        positives: pos.len(),
        negatives: neg.len(),
        mean_positive: mean(&pos),
        mean_negative: mean(&neg),
        noise_ratio: (total > 0).then(|| neg.len() as f64 / total as f64),
    })
}

/// Cumulative counts of noisy relevance values at `bins` equal-width upper
/// edges over `[0, 1]`.
pub fn cumulative_histogram(maps: &[RelevanceMap], bins: usize) -> Vec<(f64, usize)> {
    let bins = bins.max(1);
    let mut values: Vec<f64> = maps.iter().flat_map(|m| m.noisy().map(|e| e.relevance)).collect();
    values.sort_by(f64::total_cmp);
    (1..=bins)
        .map(|b| {
            let upper = b as f64 / bins as f64;
            (upper, values.partition_point(|&v| v <= upper))
        })
        .collect()
}

fn comment(seed: Option<u64>) -> String {
    seed.map(|s| format!("# seed={s}\n")).unwrap_or_default()
}

/// `method,k_shots,param,episode,accuracy`
pub fn format_report_csv(reports: &[EvalReport], seed: Option<u64>) -> String {
    let mut out = comment(seed);
    out.push_str("method,k_shots,param,episode,accuracy\n");
    for r in reports {
        for (e, a) in r.accuracies.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{:.6}", r.method, r.k_shots, r.param, e, a);
        }
    }
    out
}

/// `method,k_shots,param,mean,std`
pub fn format_summary_csv(reports: &[EvalReport], seed: Option<u64>) -> String {
    let mut out = comment(seed);
    out.push_str("method,k_shots,param,mean,std\n");
    for r in reports {
        let _ = writeln!(out, "{},{},{},{:.6},{:.6}", r.method, r.k_shots, r.param, r.mean, r.std);
    }
    out
}

/// `bin_upper,count`
pub fn format_histogram_csv(hist: &[(f64, usize)], seed: Option<u64>) -> String {
    let mut out = comment(seed);
    out.push_str("bin_upper,count\n");
    for (upper, count) in hist {
        let _ = writeln!(out, "{upper:.6},{count}");
    }
    out
}
