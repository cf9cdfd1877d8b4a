//! Seeded synthetic benchmarks with known clean/noisy/positive/negative structure.
//!
//! Each class has a center drawn uniformly on the unit sphere. Positives are
//! the center plus an isotropic Gaussian perturbation of expected norm
//! `1/√κ`, renormalized. A class's noisy set mixes positives with negatives
//! drawn around the centers of a few "confuser" classes (or uniformly on the
//! sphere), like a text-matched crawl returning the wrong sense of a word.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{FeatureStore, LabelRow, LabelTable, Provenance, Truth, TruthTable};
use crate::numerics::{normalized, DenseMatrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSource {
    /// Each class draws its negatives from `confusers` other classes of the benchmark.
    OtherClasses { confusers: usize },
    /// Uniform on the unit sphere.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    /// Clean examples available per class (episodes sample k of these).
    pub clean_per_class: usize,
    pub noisy_per_class: usize,
    /// Fraction of each class's noisy examples that are negatives.
    pub noise_ratio: f64,
    pub test_per_class: usize,
    /// Concentration: larger is tighter. `f64::INFINITY` puts every positive on its center.
    pub kappa: f64,
    pub negatives: NegativeSource,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// The standard benchmark: 10 classes in 32 dimensions, 100 noisy
    /// examples per class at noise ratio 0.5, 100 test points per class.
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 32,
            clean_per_class: 20,
            noisy_per_class: 100,
            noise_ratio: 0.5,
            test_per_class: 100,
            kappa: 0.8,
            negatives: NegativeSource::OtherClasses { confusers: 1 },
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::contract(format!("synthetic features need d ≥ 2, got {}", self.dim)));
        }
        if self.classes == 0 {
            return Err(Error::contract("synthetic benchmark needs at least one class"));
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return Err(Error::contract(format!("noise ratio must be in [0, 1], got {}", self.noise_ratio)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::contract(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if let NegativeSource::OtherClasses { confusers } = self.negatives {
            if confusers == 0 {
                return Err(Error::contract("need at least one confuser class"));
            }
            if self.classes < 2 && self.negatives_per_class() > 0 {
                return Err(Error::contract("negatives from other classes need at least two classes"));
            }
        }
        Ok(())
    }

    pub fn negatives_per_class(&self) -> usize {
        (self.noisy_per_class as f64 * self.noise_ratio).round() as usize
    }

    pub fn class_name(c: usize) -> String {
        format!("class{c:02}")
    }
}

/// Generated benchmark: one feature store holding clean, noisy and test
/// examples, the training labels, the test labels and the per-noisy-label truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub store: FeatureStore,
    pub labels: LabelTable,
    pub test_labels: LabelTable,
    pub truth: TruthTable,
    pub centers: Vec<Vec<f64>>,
}

fn unit_sphere(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

fn perturb(rng: &mut Rng, center: &[f64], kappa: f64) -> Vec<f64> {
    let d = center.len();
    let noise: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let spread = if kappa.is_infinite() {
        0.0
    } else {
        1.0 / (kappa * d as f64).sqrt()
    };
    if spread == 0.0 {
        return center.to_vec();
    }
    let v: Vec<f64> = center.iter().zip(&noise).map(|(c, z)| c + spread * z).collect();
    normalized(&v).unwrap_or_else(|| center.to_vec())
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let k = spec.classes;
    let d = spec.dim;
    let root = Rng::new(spec.seed);

    let mut center_rng = root.fork(0);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| unit_sphere(&mut center_rng, d)).collect();

    let mut ids = Vec::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    let mut test_rows = Vec::new();
    let mut truth = TruthTable::default();
    let n_neg = spec.negatives_per_class();
    let n_pos = spec.noisy_per_class - n_neg;

    for c in 0..k {
        let class = SynthSpec::class_name(c);
        let mut rng = root.fork(1 + c as u64);
        let confusers: Vec<usize> = match spec.negatives {
            NegativeSource::OtherClasses { confusers } if k > 1 => {
                let mut others: Vec<usize> = (0..k).filter(|&o| o != c).collect();
                rng.shuffle(&mut others);
                others.truncate(confusers.min(k - 1));
                others
            }
            _ => Vec::new(),
        };

        for i in 0..spec.clean_per_class {
            let id = format!("{class}_c{i:03}");
            columns.push(perturb(&mut rng, &centers[c], spec.kappa));
            rows.push(LabelRow {
                id: id.clone(),
                class: class.clone(),
                source: Provenance::Clean,
            });
            ids.push(id);
        }

        // Shuffle positives and negatives so ids do not leak the truth.
        let mut kinds: Vec<bool> = std::iter::repeat_n(true, n_pos).chain(std::iter::repeat_n(false, n_neg)).collect();
        rng.shuffle(&mut kinds);
        for (i, positive) in kinds.into_iter().enumerate() {
            let id = format!("{class}_n{i:03}");
            let v = if positive {
                perturb(&mut rng, &centers[c], spec.kappa)
            } else if confusers.is_empty() {
                unit_sphere(&mut rng, d)
            } else {
                let src = confusers[rng.below(confusers.len())];
                perturb(&mut rng, &centers[src], spec.kappa)
            };
            columns.push(v);
            rows.push(LabelRow {
                id: id.clone(),
                class: class.clone(),
                source: Provenance::Noisy,
            });
            truth.insert(&id, &class, if positive { Truth::Positive } else { Truth::Negative });
            ids.push(id);
        }

        for i in 0..spec.test_per_class {
            let id = format!("{class}_t{i:03}");
            columns.push(perturb(&mut rng, &centers[c], spec.kappa));
            test_rows.push(LabelRow {
                id: id.clone(),
                class: class.clone(),
                source: Provenance::Clean,
            });
            ids.push(id);
        }
    }

    if ids.is_empty() {
        return Err(Error::contract("synthetic spec generates no examples"));
    }
    let store = FeatureStore::new(ids, DenseMatrix::from_columns(&columns)?)?;
    Ok(SynthData {
        store,
        labels: LabelTable::new(rows)?,
        test_labels: LabelTable::new(test_rows)?,
        truth,
        centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, norm};

    fn small() -> SynthSpec {
        SynthSpec {
            classes: 3,
            dim: 8,
            clean_per_class: 2,
            noisy_per_class: 10,
            noise_ratio: 0.3,
            test_per_class: 4,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        for j in 0..a.store.len() {
            assert!((norm(&a.store.vector(j)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_kappa_collapses_to_centers() {
        let spec = SynthSpec {
            kappa: f64::INFINITY,
            noise_ratio: 0.0,
            ..small()
        };
        let data = generate(&spec).unwrap();
        for row in data.labels.rows() {
            let c: usize = row.class[5..].parse().unwrap();
            let v = data.store.vector(data.store.index_of(&row.id).unwrap());
            assert!((dot(&v, &data.centers[c]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_ratio_is_respected() {
        let data = generate(&small()).unwrap();
        let negatives = data.truth.rows().filter(|r| r.1 == "class01" && r.2 == Truth::Negative).count();
        assert_eq!(negatives, 3);
        let zero = generate(&SynthSpec { noise_ratio: 0.0, ..small() }).unwrap();
        assert!(zero.truth.rows().all(|r| r.2 == Truth::Positive));
    }

    #[test]
    fn rejects_degenerate_dimension() {
        assert!(generate(&SynthSpec { dim: 1, ..small() }).is_err());
    }
}
