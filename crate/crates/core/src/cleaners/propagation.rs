use serde::{Deserialize, Serialize};

use crate::cleaners::{ClassProblem, RelevanceMap};
use crate::error::{Error, Result};
use crate::graph::{normalize_symmetric, AffinityGraph};
use crate::numerics::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    pub alpha: f64,
    /// Bound on the Euclidean norm of the final residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            tolerance: 1e-10,
            max_iterations: 1000,
        }
    }
}

impl LpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::contract(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::contract(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Conjugate gradient for a symmetric positive-definite operator, starting
/// from zero. Converged when the true residual `‖b − Ax‖` is at most `tol`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..=max_iterations {
        if rr.sqrt() <= tol {
            // Recurrence residuals drift; confirm against the true one.
            let ax = apply(&x)?;
            let true_r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            if norm(&true_r) <= tol {
                return Ok(x);
            }
            r = true_r;
            p = r.clone();
            rr = dot(&r, &r);
        }
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0 && pap.is_finite()) {
            return Err(Error::numerical(format!(
                "conjugate gradient breakdown (pᵀAp = {pap}); operator not positive definite?"
            )));
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    Err(Error::numerical(format!(
        "conjugate gradient did not reach residual {tol:e} in {max_iterations} iterations (residual {:e})",
        rr.sqrt()
    )))
}

/// Solves `(I − α D^{-1/2} A D^{-1/2}) r = y` where `y` is 1 on `clean_idx`
/// and 0 elsewhere. The solution is not range-limited.
pub fn label_propagation_raw(g: &AffinityGraph, clean_idx: &[usize], cfg: &LpConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if clean_idx.is_empty() {
        return Err(Error::contract("label propagation needs at least one clean example"));
    }
    let n = g.n();
    let mut y = vec![0.0; n];
    for &i in clean_idx {
        if i >= n {
            return Err(Error::contract(format!("clean index {i} outside graph of {n} vertices")));
        }
        y[i] = 1.0;
    }
    let s = normalize_symmetric(g);
    let alpha = cfg.alpha;
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let sx = s.matrix().mul_vec(x)?;
        Ok(x.iter().zip(sx).map(|(xi, si)| xi - alpha * si).collect())
    };
    conjugate_gradient(apply, &y, cfg.tolerance, cfg.max_iterations)
}

/// Label-propagation relevance for one class. The raw solution is divided
/// by its maximum so that noisy scores land in `[0, 1]`; clean examples are
/// then pinned to 1.
pub fn label_propagation(problem: &ClassProblem, g: &AffinityGraph, cfg: &LpConfig) -> Result<RelevanceMap> {
    if g.n() != problem.n() {
        return Err(Error::contract(format!(
            "graph has {} vertices for {} examples",
            g.n(),
            problem.n()
        )));
    }
    let clean: Vec<usize> = (0..problem.clean_count()).collect();
    let raw = label_propagation_raw(g, &clean, cfg)?;
    let max = raw.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = if max > 0.0 {
        raw.iter().map(|r| r / max).collect()
    } else {
        raw
    };
    RelevanceMap::from_scores(problem, &scaled)
}
