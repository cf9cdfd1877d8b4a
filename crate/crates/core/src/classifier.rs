//! Relevance-weighted class prototypes and the cosine classifier.
//!
//! A classifier is a `d × K` matrix `W` plus a scale `s`. Prediction picks
//! the class whose normalized column has the largest cosine with the
//! normalized feature. Training minimizes a cross-entropy over
//! `softmax(s Ŵᵀ x̂)` in which every example is weighted by its relevance
//! divided by the total relevance of its class.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cleaners::RelevanceMap;
use crate::error::{Error, Result};
use crate::io::FeatureStore;
use crate::numerics::{dot, norm, normalized, softmax, DenseMatrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierWeights {
    weights: DenseMatrix,
    class_ids: Vec<String>,
    scale: f64,
}

impl ClassifierWeights {
    pub fn new(weights: DenseMatrix, class_ids: Vec<String>, scale: f64) -> Result<Self> {
        if weights.cols() == 0 || weights.rows() == 0 {
            return Err(Error::contract("classifier needs K ≥ 1 classes and d ≥ 1"));
        }
        if class_ids.len() != weights.cols() {
            return Err(Error::contract(format!(
                "{} class ids for {} weight columns",
                class_ids.len(),
                weights.cols()
            )));
        }
        let mut seen = HashSet::new();
        for id in &class_ids {
            if id.is_empty() || !seen.insert(id.as_str()) {
                return Err(Error::contract(format!("class id {id:?} is empty or duplicated")));
            }
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::contract(format!("scale must be finite and positive, got {scale}")));
        }
        weights.check_finite("classifier weights")?;
        Ok(Self {
            weights,
            class_ids,
            scale,
        })
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn class_index(&self, id: &str) -> Option<usize> {
        self.class_ids.iter().position(|c| c == id)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_classes(&self) -> usize {
        self.weights.cols()
    }

    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    fn unit_columns(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.num_classes())
            .map(|c| {
                normalized(&self.weights.column(c)).ok_or_else(|| {
                    Error::contract(format!("class {} has a zero weight vector", self.class_ids[c]))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Examples with relevance below this are dropped before training.
    pub floor: f64,
    pub scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr_start: 0.1,
            lr_end: 0.001,
            floor: 0.1,
            scale: 10.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.floor) {
            return Err(Error::contract(format!("relevance floor must be in [0, 1), got {}", self.floor)));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0 && self.lr_start.is_finite() && self.lr_end.is_finite()) {
            return Err(Error::contract("learning rates must be finite and positive"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::contract(format!("scale must be finite and positive, got {}", self.scale)));
        }
        Ok(())
    }

    /// Cosine-annealed learning rate for step `t` of `total`.
    pub fn lr_at(&self, t: usize, total: usize) -> f64 {
        let phase = std::f64::consts::PI * t as f64 / total.max(1) as f64;
        self.lr_end + 0.5 * (self.lr_start - self.lr_end) * (1.0 + phase.cos())
    }
}

/// Relevance-weighted mean of the raw feature columns.
pub fn prototype(features: &DenseMatrix, relevance: &[f64]) -> Result<Vec<f64>> {
    if relevance.len() != features.cols() {
        return Err(Error::contract(format!(
            "{} relevance values for {} examples",
            relevance.len(),
            features.cols()
        )));
    }
    let total: f64 = relevance.iter().sum();
    if !(total > 0.0) {
        return Err(Error::contract("total relevance must be positive"));
    }
    let mut w = vec![0.0; features.rows()];
    for (j, &r) in relevance.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        for (i, wi) in w.iter_mut().enumerate() {
            *wi += r * features.get(i, j);
        }
    }
    w.iter_mut().for_each(|wi| *wi /= total);
    Ok(w)
}

/// One prototype column per relevance map, in the given order.
pub fn compute_prototypes(store: &FeatureStore, maps: &[RelevanceMap], scale: f64) -> Result<ClassifierWeights> {
    let mut columns = Vec::with_capacity(maps.len());
    let mut ids = Vec::with_capacity(maps.len());
    for map in maps {
        let idx: Vec<usize> = map
            .entries()
            .iter()
            .map(|e| {
                store
                    .index_of(&e.id)
                    .ok_or_else(|| Error::contract(format!("example {} not in feature store", e.id)))
            })
            .collect::<Result<_>>()?;
        let w = prototype(&store.select(&idx), &map.values())
            .map_err(|_| Error::contract(format!("class {} has zero total relevance", map.class())))?;
        columns.push(w);
        ids.push(map.class().to_owned());
    }
    if columns.is_empty() {
        return Err(Error::contract("no classes to build prototypes for"));
    }
    ClassifierWeights::new(DenseMatrix::from_columns(&columns)?, ids, scale)
}

/// Classes ranked by descending cosine with `x`, ties to the lower index.
/// Returns the first `top_k` `(class index, cosine)` pairs.
pub fn cosine_predict(weights: &ClassifierWeights, x: &[f64], top_k: usize) -> Result<Vec<(usize, f64)>> {
    if x.len() != weights.dim() {
        return Err(Error::contract(format!(
            "feature of dimension {} for classifier of dimension {}",
            x.len(),
            weights.dim()
        )));
    }
    if top_k > weights.num_classes() {
        return Err(Error::contract(format!(
            "top_k = {top_k} exceeds {} classes",
            weights.num_classes()
        )));
    }
    let xh = normalized(x).ok_or_else(|| Error::contract("cannot classify a zero-norm feature"))?;
    let cols = weights.unit_columns()?;
    Ok(rank(&cols, &xh, top_k))
}

fn rank(unit_cols: &[Vec<f64>], xh: &[f64], top_k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = unit_cols.iter().map(|w| dot(w, xh)).enumerate().collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(top_k);
    scored
}

/// Ranks every column of `features` (`d × n`), normalizing the weights once.
pub fn predict_batch(weights: &ClassifierWeights, features: &DenseMatrix, top_k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if features.rows() != weights.dim() {
        return Err(Error::contract(format!(
            "features of dimension {} for classifier of dimension {}",
            features.rows(),
            weights.dim()
        )));
    }
    if top_k > weights.num_classes() {
        return Err(Error::contract(format!(
            "top_k = {top_k} exceeds {} classes",
            weights.num_classes()
        )));
    }
    let cols = weights.unit_columns()?;
    (0..features.cols())
        .map(|j| {
            let xh = normalized(&features.column(j))
                .ok_or_else(|| Error::contract(format!("feature column {j} has zero norm")))?;
            Ok(rank(&cols, &xh, top_k))
        })
        .collect()
}

/// Labeled, relevance-weighted examples for classifier training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub relevance: Vec<f64>,
}

impl TrainingSet {
    pub fn new(features: DenseMatrix, labels: Vec<usize>, relevance: Vec<f64>) -> Result<Self> {
        if labels.len() != features.cols() || relevance.len() != features.cols() {
            return Err(Error::contract(format!(
                "{} examples, {} labels, {} relevance values",
                features.cols(),
                labels.len(),
                relevance.len()
            )));
        }
        if let Some(r) = relevance.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::contract(format!("relevance {r} outside [0, 1]")));
        }
        Ok(Self {
            features,
            labels,
            relevance,
        })
    }

    /// Gathers every entry of every map, labeled by the class's position in `class_ids`.
    pub fn from_maps(store: &FeatureStore, maps: &[RelevanceMap], class_ids: &[String]) -> Result<Self> {
        let mut idx = Vec::new();
        let mut labels = Vec::new();
        let mut relevance = Vec::new();
        for map in maps {
            let label = class_ids
                .iter()
                .position(|c| c == map.class())
                .ok_or_else(|| Error::contract(format!("class {} not in classifier", map.class())))?;
            for e in map.entries() {
                idx.push(
                    store
                        .index_of(&e.id)
                        .ok_or_else(|| Error::contract(format!("example {} not in feature store", e.id)))?,
                );
                labels.push(label);
                relevance.push(e.relevance);
            }
        }
        Self::new(store.select(&idx), labels, relevance)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn class_totals(&self, k: usize) -> Result<Vec<f64>> {
        let mut totals = vec![0.0; k];
        for (&y, &r) in self.labels.iter().zip(&self.relevance) {
            if y >= k {
                return Err(Error::contract(format!("label {y} outside {k} classes")));
            }
            totals[y] += r;
        }
        Ok(totals)
    }
}

/// Training examples with normalized features and per-example loss weights
/// `r(x) / r(X_c)`.
struct Prepared {
    unit: Vec<Vec<f64>>,
    labels: Vec<usize>,
    coef: Vec<f64>,
}

fn prepare(set: &TrainingSet, k: usize) -> Result<Prepared> {
    let totals = set.class_totals(k)?;
    let unit = (0..set.len())
        .map(|j| {
            normalized(&set.features.column(j))
                .ok_or_else(|| Error::contract(format!("training example {j} has zero norm")))
        })
        .collect::<Result<_>>()?;
    let coef = set
        .labels
        .iter()
        .zip(&set.relevance)
        .map(|(&y, &r)| if totals[y] > 0.0 { r / totals[y] } else { 0.0 })
        .collect();
    Ok(Prepared {
        unit,
        labels: set.labels.clone(),
        coef,
    })
}

/// Loss and `∂L/∂W` over `batch`, each example's term multiplied by `factor`.
fn loss_and_grad(
    weights: &DenseMatrix,
    scale: f64,
    data: &Prepared,
    batch: impl Iterator<Item = usize>,
    factor: f64,
    want_grad: bool,
) -> Result<(f64, DenseMatrix)> {
    let (d, k) = (weights.rows(), weights.cols());
    let norms: Vec<f64> = (0..k).map(|c| norm(&weights.column(c))).collect();
    if let Some(c) = norms.iter().position(|&n| !(n > 0.0)) {
        return Err(Error::contract(format!("weight column {c} has zero norm")));
    }
    let unit_w: Vec<Vec<f64>> = (0..k)
        .map(|c| weights.column(c).iter().map(|v| v / norms[c]).collect())
        .collect();

    let mut loss = 0.0;
    // ∂L/∂ŵ_c, accumulated per class column.
    let mut d_unit = vec![vec![0.0; d]; k];
    for j in batch {
        let a = data.coef[j] * factor;
        if a == 0.0 {
            continue;
        }
        let x = &data.unit[j];
        let y = data.labels[j];
        let logits: Vec<f64> = unit_w.iter().map(|w| scale * dot(w, x)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss -= a * (logits[y] - lse);
        if want_grad {
            let p = softmax(&logits);
            for c in 0..k {
                let dz = a * (p[c] - if c == y { 1.0 } else { 0.0 });
                if dz != 0.0 {
                    d_unit[c].iter_mut().zip(x).for_each(|(g, xi)| *g += scale * dz * xi);
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::numerical("classifier loss is not finite"));
    }

    let mut grad = DenseMatrix::zeros(d, k);
    if want_grad {
        // ŵ = w/‖w‖  ⇒  ∂L/∂w = (I − ŵŵᵀ) ∂L/∂ŵ / ‖w‖
        for c in 0..k {
            let proj = dot(&unit_w[c], &d_unit[c]);
            for i in 0..d {
                grad.set(i, c, (d_unit[c][i] - unit_w[c][i] * proj) / norms[c]);
            }
        }
        grad.check_finite("classifier gradient")?;
    }
    Ok((loss, grad))
}

fn check_labels(weights: &ClassifierWeights, set: &TrainingSet) -> Result<()> {
    if set.features.rows() != weights.dim() {
        return Err(Error::contract(format!(
            "training features of dimension {} for classifier of dimension {}",
            set.features.rows(),
            weights.dim()
        )));
    }
    Ok(())
}

/// Relevance-weighted cross-entropy of the whole set, each class normalized
/// by its total relevance.
pub fn classifier_loss(weights: &ClassifierWeights, set: &TrainingSet) -> Result<f64> {
    check_labels(weights, set)?;
    let data = prepare(set, weights.num_classes())?;
    loss_and_grad(weights.weights(), weights.scale(), &data, 0..set.len(), 1.0, false).map(|(l, _)| l)
}

/// Gradient of [`classifier_loss`] with respect to `W` (features fixed).
pub fn classifier_grad(weights: &ClassifierWeights, set: &TrainingSet) -> Result<DenseMatrix> {
    check_labels(weights, set)?;
    let data = prepare(set, weights.num_classes())?;
    loss_and_grad(weights.weights(), weights.scale(), &data, 0..set.len(), 1.0, true).map(|(_, g)| g)
}

/// Mini-batch gradient descent from `init` with seeded shuffling and a
/// cosine-annealed learning rate. Examples below `cfg.floor` are ignored.
/// The scale of `init` is kept.
pub fn train_cosine(set: &TrainingSet, cfg: &TrainConfig, init: &ClassifierWeights) -> Result<ClassifierWeights> {
    cfg.validate()?;
    check_labels(init, set)?;
    let keep: Vec<usize> = (0..set.len()).filter(|&j| set.relevance[j] >= cfg.floor).collect();
    if cfg.epochs == 0 || keep.is_empty() {
        return Ok(init.clone());
    }
    let kept = TrainingSet {
        features: set.features.select_columns(&keep),
        labels: keep.iter().map(|&j| set.labels[j]).collect(),
        relevance: keep.iter().map(|&j| set.relevance[j]).collect(),
    };
    let data = prepare(&kept, init.num_classes())?;
    let n = kept.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total = cfg.epochs * steps_per_epoch;

    let mut rng = Rng::new(cfg.seed);
    let mut w = init.weights().clone();
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0;
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let factor = n as f64 / batch.len() as f64;
            let (_, grad) = loss_and_grad(&w, init.scale(), &data, batch.iter().copied(), factor, true)
                .map_err(|e| match e {
                    Error::Numerical(msg) => Error::numerical(format!("epoch {epoch}, batch {b}: {msg}")),
                    other => other,
                })?;
            let lr = cfg.lr_at(t, total);
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                *wi -= lr * gi;
            }
            w.check_finite("classifier weights")
                .map_err(|_| Error::numerical(format!("non-finite weights at epoch {epoch}, batch {b}")))?;
            t += 1;
        }
    }
    ClassifierWeights::new(w, init.class_ids().to_vec(), init.scale())
}

/// `W_A = [W_B, W]`: base classes first, then novel ones.
pub fn concat_all_classes(base: Option<&ClassifierWeights>, novel: &ClassifierWeights) -> Result<ClassifierWeights> {
    let Some(base) = base else {
        return Ok(novel.clone());
    };
    if base.dim() != novel.dim() {
        return Err(Error::contract(format!(
            "cannot concatenate classifiers of dimension {} and {}",
            base.dim(),
            novel.dim()
        )));
    }
    if base.scale() != novel.scale() {
        return Err(Error::contract(format!(
            "cannot concatenate classifiers with scales {} and {}",
            base.scale(),
            novel.scale()
        )));
    }
    let base_ids: HashMap<&str, ()> = base.class_ids().iter().map(|c| (c.as_str(), ())).collect();
    if let Some(dup) = novel.class_ids().iter().find(|c| base_ids.contains_key(c.as_str())) {
        return Err(Error::contract(format!("class {dup} is both a base and a novel class")));
    }
    let columns: Vec<Vec<f64>> = (0..base.num_classes())
        .map(|c| base.weights().column(c))
        .chain((0..novel.num_classes()).map(|c| novel.weights().column(c)))
        .collect();
    let ids = base.class_ids().iter().chain(novel.class_ids()).cloned().collect();
    ClassifierWeights::new(DenseMatrix::from_columns(&columns)?, ids, base.scale())
}
