//! Non-graph relevance baselines: constant β, scaled cosine similarity to
//! the clean prototype, and a linear (logistic) clean-vs-other-classes classifier.

use serde::{Deserialize, Serialize};

use crate::cleaners::{ClassProblem, RelevanceMap};
use crate::error::{Error, Result};
use crate::numerics::{dot, normalized, sigmoid, DenseMatrix};

/// Every noisy example gets `beta`, clean ones get 1.
pub fn beta_relevance(problem: &ClassProblem, beta: f64) -> Result<RelevanceMap> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::contract(format!("beta must be in [0, 1], got {beta}")));
    }
    RelevanceMap::from_scores(problem, &vec![beta; problem.n()])
}

/// `r = (1 + v̂ᵀx) / 2` with `x` the normalized mean of the normalized clean features.
pub fn similarity_relevance(problem: &ClassProblem) -> Result<RelevanceMap> {
    let unit = problem.unit_features()?;
    let k = problem.clean_count();
    let mut mean = vec![0.0; problem.dim()];
    for j in 0..k {
        for (m, v) in mean.iter_mut().zip(unit.column(j)) {
            *m += v;
        }
    }
    let proto = normalized(&mean).ok_or_else(|| {
        Error::contract(format!(
            "class {}: clean features cancel out, prototype has zero norm",
            problem.class()
        ))
    })?;
    let scores: Vec<f64> = (0..problem.n())
        .map(|j| ((1.0 + dot(&unit.column(j), &proto)) / 2.0).clamp(0.0, 1.0))
        .collect();
    RelevanceMap::from_scores(problem, &scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub lr: f64,
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    pub l2: f64,
    /// Negatives drawn per class: `max(min_negatives, negatives_per_clean · k)`.
    pub min_negatives: usize,
    pub negatives_per_clean: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            lr: 1.0,
            max_iterations: 2000,
            tolerance: 1e-6,
            l2: 1e-3,
            min_negatives: 100,
            negatives_per_clean: 10,
            seed: 0,
        }
    }
}

impl LinearConfig {
    pub fn negative_count(&self, clean: usize) -> usize {
        self.min_negatives.max(self.negatives_per_clean * clean)
    }
}

/// Logistic regression of the clean examples (positives) against
/// `negatives` (`d × M`, features of other classes), fit by full-batch
/// gradient descent from zero on a class-balanced loss. Noisy relevance is
/// `σ(wᵀv̂ + b)`.
pub fn linear_relevance(problem: &ClassProblem, negatives: &DenseMatrix, cfg: &LinearConfig) -> Result<RelevanceMap> {
    if negatives.cols() == 0 {
        return Err(Error::contract("linear baseline needs at least one negative"));
    }
    if negatives.rows() != problem.dim() {
        return Err(Error::contract(format!(
            "negatives have dimension {}, class features {}",
            negatives.rows(),
            problem.dim()
        )));
    }
    let unit = problem.unit_features()?;
    let positives: Vec<Vec<f64>> = (0..problem.clean_count()).map(|j| unit.column(j)).collect();
    let negs: Vec<Vec<f64>> = (0..negatives.cols())
        .map(|j| {
            normalized(&negatives.column(j))
                .ok_or_else(|| Error::contract(format!("negative {j} has zero norm")))
        })
        .collect::<Result<_>>()?;

    let d = problem.dim();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (np, nn) = (positives.len() as f64, negs.len() as f64);
    for it in 0..cfg.max_iterations {
        let mut gw: Vec<f64> = w.iter().map(|wi| cfg.l2 * wi).collect();
        let mut gb = 0.0;
        for x in &positives {
            let c = (sigmoid(dot(&w, x) + b) - 1.0) / np;
            gb += c;
            gw.iter_mut().zip(x).for_each(|(g, xi)| *g += c * xi);
        }
        for x in &negs {
            let c = sigmoid(dot(&w, x) + b) / nn;
            gb += c;
            gw.iter_mut().zip(x).for_each(|(g, xi)| *g += c * xi);
        }
        let gnorm = (dot(&gw, &gw) + gb * gb).sqrt();
        if !gnorm.is_finite() {
            return Err(Error::numerical(format!(
                "class {}: non-finite gradient at iteration {it}",
                problem.class()
            )));
        }
        if gnorm <= cfg.tolerance {
            break;
        }
        w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= cfg.lr * g);
        b -= cfg.lr * gb;
    }

    let scores: Vec<f64> = (0..problem.n()).map(|j| sigmoid(dot(&w, &unit.column(j)) + b)).collect();
    RelevanceMap::from_scores(problem, &scores)
}
