//! Two-layer graph convolutional network with a scalar output per example,
//! trained as a clean-vs-noisy binary classifier.
//!
//! With `V` the `d × N` feature matrix and `Ã` the row-stochastic
//! propagation matrix, the network computes
//!
//! ```text
//! F(Ã, V) = σ( Θ2ᵀ [Θ1ᵀ V Ã]₊ Ã )        Θ1: d × m,  Θ2: m × 1
//! ```
//!
//! and is fit by minimizing
//!
//! ```text
//! L = −(1/k) Σ_{i≤k} log Fᵢ − (λ/(N−k)) Σ_{i>k} log(1 − Fᵢ)
//! ```
//!
//! where the first `k` columns are the clean examples. Gradients are derived
//! by hand; dropout masks the hidden ReLU activations during training.

use serde::{Deserialize, Serialize};

use crate::cleaners::{ClassProblem, RelevanceMap};
use crate::error::{Error, Result};
use crate::graph::NormalizedAffinity;
use crate::numerics::{adam_step, dropout_mask, relu, sigmoid, spmm, spmm_transpose, AdamState, DenseMatrix, DropoutMask, Rng};

/// Outputs are clamped to `[LOG_CLAMP, 1 − LOG_CLAMP]` before taking logs.
const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub theta1: DenseMatrix,
    pub theta2: DenseMatrix,
}

impl GcnParams {
    pub fn new(theta1: DenseMatrix, theta2: DenseMatrix) -> Result<Self> {
        if theta1.cols() == 0 || theta2.rows() != theta1.cols() || theta2.cols() != 1 {
            return Err(Error::contract(format!(
                "GCN params need Θ1: d×m and Θ2: m×1 with m ≥ 1, got {}x{} and {}x{}",
                theta1.rows(),
                theta1.cols(),
                theta2.rows(),
                theta2.cols()
            )));
        }
        theta1.check_finite("Θ1")?;
        theta2.check_finite("Θ2")?;
        Ok(Self { theta1, theta2 })
    }

    /// Uniform init in `±1/√fan_in` for each layer.
    pub fn init(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let b1 = 1.0 / (dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        let theta1 = DenseMatrix::from_fn(dim, hidden, |_, _| rng.uniform_range(-b1, b1));
        let theta2 = DenseMatrix::from_fn(hidden, 1, |_, _| rng.uniform_range(-b2, b2));
        Self { theta1, theta2 }
    }

    pub fn dim(&self) -> usize {
        self.theta1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.theta1.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGradients {
    pub theta1: DenseMatrix,
    pub theta2: DenseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnTrainConfig {
    /// Weight of the noisy (negative) term of the loss.
    pub lambda: f64,
    pub iterations: usize,
    pub lr: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for GcnTrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            iterations: 100,
            lr: 0.1,
            dropout: 0.5,
            hidden: 16,
            seed: 0,
        }
    }
}

impl GcnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::contract(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::contract(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::contract(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.hidden == 0 {
            return Err(Error::contract("hidden width must be ≥ 1"));
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Forward {
    /// Pre-activation `Θ1ᵀ V Ã` (m × N).
    pre: DenseMatrix,
    /// Hidden activations after ReLU and dropout (m × N).
    hidden: DenseMatrix,
    outputs: Vec<f64>,
}

fn check_shapes(params: &GcnParams, a: &NormalizedAffinity, v: &DenseMatrix, mask: Option<&DropoutMask>) -> Result<()> {
    if v.rows() != params.dim() {
        return Err(Error::contract(format!(
            "features have dimension {}, Θ1 expects {}",
            v.rows(),
            params.dim()
        )));
    }
    if a.n() != v.cols() {
        return Err(Error::contract(format!(
            "propagation matrix is {0}x{0} for {1} examples",
            a.n(),
            v.cols()
        )));
    }
    if let Some(mask) = mask {
        if mask.len() != params.hidden() * v.cols() {
            return Err(Error::contract(format!(
                "dropout mask has {} entries, expected {}",
                mask.len(),
                params.hidden() * v.cols()
            )));
        }
    }
    Ok(())
}

fn forward(params: &GcnParams, a: &NormalizedAffinity, v: &DenseMatrix, mask: Option<&DropoutMask>) -> Result<Forward> {
    check_shapes(params, a, v, mask)?;
    let projected = params.theta1.transpose_matmul(v)?;
    let pre = spmm(a.matrix(), &projected)?;
    let mut hidden = pre.map(relu);
    if let Some(mask) = mask {
        for (i, h) in hidden.as_mut_slice().iter_mut().enumerate() {
            *h *= mask.factor(i);
        }
    }
    let logits = spmm(a.matrix(), &params.theta2.transpose_matmul(&hidden)?)?;
    let outputs = logits.as_slice().iter().map(|&t| sigmoid(t)).collect();
    Ok(Forward { pre, hidden, outputs })
}

/// Per-example relevance `F(Ã, V)`. Without a mask this is inference mode.
pub fn gcn_forward(
    params: &GcnParams,
    a: &NormalizedAffinity,
    v: &DenseMatrix,
    mask: Option<&DropoutMask>,
) -> Result<Vec<f64>> {
    Ok(forward(params, a, v, mask)?.outputs)
}

pub fn gcn_loss(outputs: &[f64], k: usize, lambda: f64) -> Result<f64> {
    let n = outputs.len();
    if k == 0 || k > n {
        return Err(Error::contract(format!("need 1 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    let clamp = |f: f64| f.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    let clean: f64 = outputs[..k].iter().map(|&f| clamp(f).ln()).sum();
    let mut loss = -clean / k as f64;
    if n > k {
        let noisy: f64 = outputs[k..].iter().map(|&f| (1.0 - clamp(f)).ln()).sum();
        loss -= lambda * noisy / (n - k) as f64;
    }
    if !loss.is_finite() {
        return Err(Error::numerical("GCN loss is not finite"));
    }
    Ok(loss)
}

/// Loss and its gradient with respect to `Θ1` and `Θ2`, under a fixed dropout mask.
///
/// The output-layer derivative uses the sigmoid/BCE simplification
/// `∂L/∂tᵢ = −(1 − Fᵢ)/k` (clean) and `λ Fᵢ/(N − k)` (noisy), which is the
/// exact derivative wherever the log clamp is inactive.
pub fn gcn_loss_and_grad(
    params: &GcnParams,
    a: &NormalizedAffinity,
    v: &DenseMatrix,
    k: usize,
    lambda: f64,
    mask: Option<&DropoutMask>,
) -> Result<(f64, GcnGradients)> {
    let fwd = forward(params, a, v, mask)?;
    let loss = gcn_loss(&fwd.outputs, k, lambda)?;
    let n = v.cols();
    let m = params.hidden();

    let d_logits: Vec<f64> = fwd
        .outputs
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            if i < k {
                -(1.0 - f) / k as f64
            } else {
                lambda * f / (n - k) as f64
            }
        })
        .collect();
    let d_logits = DenseMatrix::new(1, n, d_logits)?;
    // logits = R Ã with R = Θ2ᵀ H
    let d_r = spmm_transpose(a.matrix(), &d_logits)?;
    let grad2 = DenseMatrix::from_fn(m, 1, |h, _| {
        (0..n).map(|i| fwd.hidden.get(h, i) * d_r.get(0, i)).sum()
    });

    // Back through Θ2ᵀ, dropout and ReLU.
    let mut d_pre = params.theta2.matmul(&d_r)?;
    for (i, g) in d_pre.as_mut_slice().iter_mut().enumerate() {
        let keep = mask.map_or(1.0, |mk| mk.factor(i));
        if fwd.pre.as_slice()[i] <= 0.0 {
            *g = 0.0;
        } else {
            *g *= keep;
        }
    }
    // pre = P Ã with P = Θ1ᵀ V
    let d_p = spmm_transpose(a.matrix(), &d_pre)?;
    let grad1 = v.matmul(&d_p.transpose())?;

    grad1.check_finite("∂L/∂Θ1")?;
    grad2.check_finite("∂L/∂Θ2")?;
    Ok((
        loss,
        GcnGradients {
            theta1: grad1,
            theta2: grad2,
        },
    ))
}

pub fn gcn_grad(
    params: &GcnParams,
    a: &NormalizedAffinity,
    v: &DenseMatrix,
    k: usize,
    lambda: f64,
    mask: Option<&DropoutMask>,
) -> Result<GcnGradients> {
    gcn_loss_and_grad(params, a, v, k, lambda, mask).map(|(_, g)| g)
}

/// Full-batch Adam training for `cfg.iterations` steps on one class, then an
/// inference pass. Noisy relevance is the network output; clean is pinned to 1.
///
/// Features are L2-normalized per example before entering the network.
pub fn train_gcn(problem: &ClassProblem, a: &NormalizedAffinity, cfg: &GcnTrainConfig) -> Result<(GcnParams, RelevanceMap)> {
    cfg.validate()?;
    let v = problem.unit_features()?;
    let (n, k) = (problem.n(), problem.clean_count());
    if a.n() != n {
        return Err(Error::contract(format!(
            "propagation matrix is {0}x{0} for {n} examples",
            a.n()
        )));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut params = GcnParams::init(problem.dim(), cfg.hidden, &mut rng);
    if n == k {
        let map = RelevanceMap::from_scores(problem, &vec![1.0; n])?;
        return Ok((params, map));
    }

    let mut adam = AdamState::new(&[params.theta1.as_slice().len(), params.theta2.as_slice().len()]);
    for it in 0..cfg.iterations {
        let mask = dropout_mask(&mut rng, cfg.hidden * n, cfg.dropout)?;
        let (loss, grads) = gcn_loss_and_grad(&params, a, &v, k, cfg.lambda, Some(&mask))
            .map_err(|e| annotate(e, problem.class(), it))?;
        if !loss.is_finite() {
            return Err(Error::numerical(format!(
                "class {}: non-finite loss at iteration {it}",
                problem.class()
            )));
        }
        let GcnParams { theta1, theta2 } = &mut params;
        adam_step(
            &mut [theta1.as_mut_slice(), theta2.as_mut_slice()],
            &[grads.theta1.as_slice(), grads.theta2.as_slice()],
            &mut adam,
            cfg.lr,
        )
        .map_err(|e| annotate(e, problem.class(), it))?;
    }

    let outputs = gcn_forward(&params, a, &v, None)?;
    let map = RelevanceMap::from_scores(problem, &outputs)?;
    Ok((params, map))
}

/// The GCN with an edgeless graph: every example is scored independently.
pub fn train_mlp(problem: &ClassProblem, cfg: &GcnTrainConfig) -> Result<RelevanceMap> {
    train_gcn(problem, &NormalizedAffinity::identity(problem.n()), cfg).map(|(_, map)| map)
}

fn annotate(e: Error, class: &str, iteration: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::numerical(format!("class {class}, iteration {iteration}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_affinity, normalize_row_stochastic};

    fn random_instance(rng: &mut Rng, n: usize, d: usize, m: usize) -> (GcnParams, NormalizedAffinity, DenseMatrix) {
        let v = DenseMatrix::from_fn(d, n, |_, _| rng.normal());
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let g = build_affinity(&v, &ids, 3).unwrap();
        let params = GcnParams {
            theta1: DenseMatrix::from_fn(d, m, |_, _| rng.normal()),
            theta2: DenseMatrix::from_fn(m, 1, |_, _| rng.normal()),
        };
        (params, normalize_row_stochastic(&g), v)
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut rng = Rng::new(3);
        let (mut p, a, v) = random_instance(&mut rng, 6, 4, 3);
        p.theta2 = DenseMatrix::zeros(3, 1);
        let out = gcn_forward(&p, &a, &v, None).unwrap();
        assert!(out.iter().all(|&f| f == 0.5));
        let g = gcn_grad(&p, &a, &v, 2, 1.0, None).unwrap();
        assert!(g.theta1.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_propagation_is_an_mlp() {
        let mut rng = Rng::new(5);
        let (p, _, v) = random_instance(&mut rng, 5, 4, 3);
        let out = gcn_forward(&p, &NormalizedAffinity::identity(5), &v, None).unwrap();
        for j in 0..5 {
            let x = v.column(j);
            let mut z = 0.0;
            for h in 0..3 {
                let pre: f64 = (0..4).map(|r| p.theta1.get(r, h) * x[r]).sum();
                z += p.theta2.get(h, 0) * relu(pre);
            }
            assert!((out[j] - sigmoid(z)).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_known_values() {
        let l = gcn_loss(&[0.5, 0.5], 1, 1.0).unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let a = gcn_loss(&[0.7, 0.2, 0.9], 1, 0.0).unwrap();
        let b = gcn_loss(&[0.7, 0.6, 0.1], 1, 0.0).unwrap();
        assert_eq!(a, b);
        assert!((a + 0.7f64.ln()).abs() < 1e-15);
        assert!(gcn_loss(&[0.0, 1.0], 1, 1.0).unwrap().is_finite());
        assert!(gcn_loss(&[0.5], 0, 1.0).is_err());
    }

    #[test]
    fn gradient_is_affine_in_lambda() {
        let mut rng = Rng::new(11);
        let (p, a, v) = random_instance(&mut rng, 8, 5, 3);
        let g0 = gcn_grad(&p, &a, &v, 2, 0.0, None).unwrap();
        let g1 = gcn_grad(&p, &a, &v, 2, 0.7, None).unwrap();
        let g2 = gcn_grad(&p, &a, &v, 2, 1.4, None).unwrap();
        for (t0, (t1, t2)) in [(&g0.theta1, (&g1.theta1, &g2.theta1)), (&g0.theta2, (&g1.theta2, &g2.theta2))] {
            for i in 0..t0.as_slice().len() {
                let noisy1 = t1.as_slice()[i] - t0.as_slice()[i];
                let noisy2 = t2.as_slice()[i] - t0.as_slice()[i];
                assert!((noisy2 - 2.0 * noisy1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_clean_class_is_all_ones() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let p = ClassProblem::new("c", vec!["a".into(), "b".into()], v, 2).unwrap();
        let map = train_mlp(&p, &GcnTrainConfig::default()).unwrap();
        assert_eq!(map.values(), vec![1.0, 1.0]);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = Rng::new(8);
        let v = DenseMatrix::from_fn(4, 12, |_, _| rng.normal());
        let ids: Vec<String> = (0..12).map(|i| format!("e{i}")).collect();
        let p = ClassProblem::new("c", ids.clone(), v.clone(), 2).unwrap();
        let a = normalize_row_stochastic(&build_affinity(&v, &ids, 4).unwrap());
        let cfg = GcnTrainConfig { seed: 4, ..Default::default() };
        let (p1, m1) = train_gcn(&p, &a, &cfg).unwrap();
        let (p2, m2) = train_gcn(&p, &a, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn config_validation() {
        let bad = GcnTrainConfig { dropout: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = GcnTrainConfig { lambda: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = GcnTrainConfig { hidden: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
