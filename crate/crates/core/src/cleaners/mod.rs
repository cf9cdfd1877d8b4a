//! Per-class relevance estimation for noisy examples.
//!
//! Every cleaner consumes a [`ClassProblem`] (clean examples first, then
//! noisy ones) and emits a [`RelevanceMap`] where clean examples are pinned
//! to exactly 1 and noisy examples get a score in `[0, 1]`.

mod baselines;
mod gcn;
mod propagation;

pub use baselines::{beta_relevance, linear_relevance, similarity_relevance, LinearConfig};
pub use gcn::{
    gcn_forward, gcn_grad, gcn_loss, gcn_loss_and_grad, train_gcn, train_mlp, GcnGradients, GcnParams,
    GcnTrainConfig,
};
pub use propagation::{conjugate_gradient, label_propagation, label_propagation_raw, LpConfig};

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::io::Provenance;
use crate::numerics::{normalized, DenseMatrix};

/// The extended example set of one class: `clean` verified examples in the
/// first columns, followed by the noisy ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProblem {
    class: String,
    ids: Vec<String>,
    features: DenseMatrix,
    clean: usize,
}

impl ClassProblem {
    pub fn new(class: impl Into<String>, ids: Vec<String>, features: DenseMatrix, clean: usize) -> Result<Self> {
        let class = class.into();
        if ids.len() != features.cols() {
            return Err(Error::contract(format!(
                "class {class}: {} ids for {} feature columns",
                ids.len(),
                features.cols()
            )));
        }
        if clean == 0 || clean > ids.len() {
            return Err(Error::contract(format!(
                "class {class}: need 1 ≤ clean count ≤ N, got {clean} of {}",
                ids.len()
            )));
        }
        if features.rows() == 0 {
            return Err(Error::contract(format!("class {class}: zero-dimensional features")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::contract(format!("class {class}: duplicate example {dup}")));
        }
        Ok(Self {
            class,
            ids,
            features,
            clean,
        })
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn clean_count(&self) -> usize {
        self.clean
    }

    pub fn noisy_count(&self) -> usize {
        self.ids.len() - self.clean
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        if i < self.clean {
            Provenance::Clean
        } else {
            Provenance::Noisy
        }
    }

    /// Features with every column scaled to unit L2 norm.
    pub fn unit_features(&self) -> Result<DenseMatrix> {
        let mut out = self.features.clone();
        for j in 0..self.n() {
            let v = normalized(&self.features.column(j)).ok_or_else(|| {
                Error::contract(format!("zero-norm feature vector for id {:?}", self.ids[j]))
            })?;
            out.set_column(j, &v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceEntry {
    pub id: String,
    pub relevance: f64,
    pub provenance: Provenance,
}

/// Relevance of every example of one class. Clean entries are exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    class: String,
    entries: Vec<RelevanceEntry>,
}

impl RelevanceMap {
    pub fn new(class: String, entries: Vec<RelevanceEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !(0.0..=1.0).contains(&e.relevance) {
                return Err(Error::contract(format!(
                    "relevance {} of {} outside [0, 1]",
                    e.relevance, e.id
                )));
            }
            if e.provenance == Provenance::Clean && e.relevance != 1.0 {
                return Err(Error::contract(format!("clean example {} must have relevance 1", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::contract(format!("duplicate relevance entry {}", e.id)));
            }
        }
        Ok(Self { class, entries })
    }

    /// Pins the clean prefix of `problem` to 1 and takes `scores[i]` for
    /// every noisy `i`, clamped into `[0, 1]`.
    pub fn from_scores(problem: &ClassProblem, scores: &[f64]) -> Result<Self> {
        if scores.len() != problem.n() {
            return Err(Error::contract(format!(
                "{} scores for {} examples",
                scores.len(),
                problem.n()
            )));
        }
        let entries = problem
            .ids()
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (id, &s))| {
                if !s.is_finite() {
                    return Err(Error::numerical(format!("non-finite relevance for {id}")));
                }
                let provenance = problem.provenance(i);
                let relevance = match provenance {
                    Provenance::Clean => 1.0,
                    Provenance::Noisy => s.clamp(0.0, 1.0),
                };
                Ok(RelevanceEntry {
                    id: id.clone(),
                    relevance,
                    provenance,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            class: problem.class().to_owned(),
            entries,
        })
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    pub fn entries(&self) -> &[RelevanceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.relevance)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.relevance).collect()
    }

    pub fn noisy(&self) -> impl Iterator<Item = &RelevanceEntry> {
        self.entries.iter().filter(|e| e.provenance == Provenance::Noisy)
    }

    pub fn mean_noisy(&self) -> Option<f64> {
        let (sum, n) = self.noisy().fold((0.0, 0usize), |(s, n), e| (s + e.relevance, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}
