use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Moment accumulators for Adam, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Fresh state for tensors with the given element counts, using
    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(sizes: &[usize]) -> Self {
        Self::with_hyper(sizes, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(sizes: &[usize], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update applied in place to every tensor in `params`.
///
/// Gradients are validated before anything is touched: on error neither the
/// parameters nor the state change.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::contract(format!("learning rate must be positive, got {lr}")));
    }
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::contract(format!(
            "adam: {} parameter tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (t, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[t].len() {
            return Err(Error::contract(format!(
                "adam: tensor {t} has {} params, {} grads, {} moments",
                p.len(),
                g.len(),
                state.first[t].len()
            )));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite gradient in tensor {t} at {i}")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[k];
        let v = &mut state.second[k];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Inverted-dropout mask: dropped entries are zero, survivors are scaled by
/// `1 / (1 - p)` so that no rescaling is needed at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    pub fn all_kept(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.keep[i]
    }

    /// Multiplier applied to element `i`: `scale` if kept, else 0.
    #[inline]
    pub fn factor(&self, i: usize) -> f64 {
        if self.keep[i] {
            self.scale
        } else {
            0.0
        }
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.keep.is_empty() {
            return 1.0;
        }
        self.keep.iter().filter(|&&k| k).count() as f64 / self.keep.len() as f64
    }
}

pub fn dropout_mask(rng: &mut Rng, len: usize, p: f64) -> Result<DropoutMask> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::contract(format!("dropout probability must be in [0, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(DropoutMask::all_kept(len));
    }
    let keep = (0..len).map(|_| rng.uniform() >= p).collect();
    Ok(DropoutMask {
        keep,
        scale: 1.0 / (1.0 - p),
    })
}
