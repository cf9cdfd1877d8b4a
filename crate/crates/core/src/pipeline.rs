//! Resolves labels against a feature store and runs a cleaning method on
//! every class.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cleaners::{
    beta_relevance, label_propagation, linear_relevance, similarity_relevance, train_gcn, train_mlp, ClassProblem,
    GcnTrainConfig, LinearConfig, LpConfig, RelevanceMap,
};
use crate::error::{Error, Result};
use crate::graph::{build_affinity, normalize_row_stochastic};
use crate::io::{FeatureStore, LabelRow, LabelTable, Provenance};
use crate::numerics::{derive_seed, Rng};

/// Features plus training labels, with every labeled id present in the store.
#[derive(Debug, Clone)]
pub struct Dataset {
    store: FeatureStore,
    labels: LabelTable,
}

impl Dataset {
    pub fn new(store: FeatureStore, labels: LabelTable) -> Result<Self> {
        if let Some(row) = labels.rows().iter().find(|r| store.index_of(&r.id).is_none()) {
            return Err(Error::contract(format!("labeled id {} not in feature store", row.id)));
        }
        Ok(Self { store, labels })
    }

    pub fn store(&self) -> &FeatureStore {
        &self.store
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    pub fn classes(&self) -> Vec<String> {
        self.labels.classes()
    }

    /// Same store, different labels.
    pub fn with_labels(&self, labels: LabelTable) -> Result<Self> {
        Dataset::new(self.store.clone(), labels)
    }

    /// The extended set of `class`: clean examples first, then noisy ones, in file order.
    pub fn problem(&self, class: &str) -> Result<ClassProblem> {
        let clean = self.labels.ids_for(class, Provenance::Clean);
        let noisy = self.labels.ids_for(class, Provenance::Noisy);
        if clean.is_empty() {
            return Err(Error::contract(format!("class {class} has no clean examples")));
        }
        let ids: Vec<String> = clean.iter().chain(&noisy).map(|s| s.to_string()).collect();
        let idx: Vec<usize> = ids.iter().map(|id| self.store.index_of(id).expect("validated")).collect();
        ClassProblem::new(class, ids, self.store.select(&idx), clean.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gcn,
    Mlp,
    Lp,
    Similarity,
    Beta,
    Linear,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Gcn,
        Method::Mlp,
        Method::Lp,
        Method::Similarity,
        Method::Beta,
        Method::Linear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gcn => "gcn",
            Method::Mlp => "mlp",
            Method::Lp => "lp",
            Method::Similarity => "similarity",
            Method::Beta => "beta",
            Method::Linear => "linear",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected gcn, mlp, lp, similarity, beta or linear)"))
    }
}

/// Everything a cleaning method needs besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub method: Method,
    pub k_nn: usize,
    pub gcn: GcnTrainConfig,
    pub lp: LpConfig,
    pub linear: LinearConfig,
    pub beta: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            method: Method::Gcn,
            k_nn: 50,
            gcn: GcnTrainConfig::default(),
            lp: LpConfig::default(),
            linear: LinearConfig::default(),
            beta: 1.0,
        }
    }
}

impl CleaningConfig {
    /// The method's tunable parameter, as reported in tables.
    pub fn param(&self) -> f64 {
        match self.method {
            Method::Gcn | Method::Mlp => self.gcn.lambda,
            Method::Lp => self.lp.alpha,
            Method::Beta => self.beta,
            Method::Similarity | Method::Linear => 0.0,
        }
    }
}

/// Seeded draw of linear-baseline negatives: examples labeled in any class
/// other than `class` that are not themselves in `class`.
fn draw_negatives(dataset: &Dataset, problem: &ClassProblem, count: usize, seed: u64) -> Vec<usize> {
    let own: HashSet<&str> = problem.ids().iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let pool: Vec<usize> = dataset
        .labels()
        .rows()
        .iter()
        .filter(|r| r.class != problem.class() && !own.contains(r.id.as_str()))
        .filter(|r| seen.insert(r.id.as_str()))
        .map(|r| dataset.store().index_of(&r.id).expect("validated"))
        .collect();
    let mut rng = Rng::new(seed);
    let take = count.min(pool.len());
    rng.sample_indices(pool.len(), take).into_iter().map(|i| pool[i]).collect()
}

/// Runs the configured method on one class. `seed` drives every random
/// choice (initialization, dropout, negative sampling).
pub fn clean_class(dataset: &Dataset, class: &str, cfg: &CleaningConfig, seed: u64) -> Result<RelevanceMap> {
    let problem = dataset.problem(class)?;
    match cfg.method {
        Method::Gcn => {
            let graph = build_affinity(&problem.unit_features()?, problem.ids(), cfg.k_nn)?;
            let gcn = GcnTrainConfig { seed, ..cfg.gcn };
            train_gcn(&problem, &normalize_row_stochastic(&graph), &gcn).map(|(_, m)| m)
        }
        Method::Mlp => train_mlp(&problem, &GcnTrainConfig { seed, ..cfg.gcn }),
        Method::Lp => {
            let graph = build_affinity(problem.features(), problem.ids(), cfg.k_nn)?;
            label_propagation(&problem, &graph, &cfg.lp)
        }
        Method::Similarity => similarity_relevance(&problem),
        Method::Beta => beta_relevance(&problem, cfg.beta),
        Method::Linear => {
            let count = cfg.linear.negative_count(problem.clean_count());
            let idx = draw_negatives(dataset, &problem, count, seed);
            if idx.is_empty() {
                return Err(Error::contract(format!(
                    "class {class}: linear baseline needs examples from other classes"
                )));
            }
            let negatives = dataset.store().select(&idx);
            linear_relevance(&problem, &negatives, &LinearConfig { seed, ..cfg.linear })
        }
    }
}

/// Cleans every class, in parallel on the current rayon pool. Class `i`
/// uses seed `derive_seed(seed, i)`; output order follows [`Dataset::classes`].
pub fn clean_dataset(dataset: &Dataset, cfg: &CleaningConfig, seed: u64) -> Result<Vec<RelevanceMap>> {
    let classes = dataset.classes();
    classes
        .par_iter()
        .enumerate()
        .map(|(i, class)| clean_class(dataset, class, cfg, derive_seed(seed, i as u64)))
        .collect()
}

/// Label table keeping `k_shots` seeded clean examples per class plus every noisy row.
pub fn sample_clean_subset(labels: &LabelTable, k_shots: usize, seed: u64) -> Result<LabelTable> {
    let mut rng = Rng::new(seed);
    let mut keep: HashSet<(String, String)> = HashSet::new();
    for class in labels.classes() {
        let pool = labels.ids_for(&class, Provenance::Clean);
        if pool.len() < k_shots {
            return Err(Error::contract(format!(
                "class {class} has {} clean examples, episode needs {k_shots}",
                pool.len()
            )));
        }
        for i in rng.sample_indices(pool.len(), k_shots) {
            keep.insert((pool[i].to_owned(), class.clone()));
        }
    }
    let rows: Vec<LabelRow> = labels
        .rows()
        .iter()
        .filter(|r| r.source == Provenance::Noisy || keep.contains(&(r.id.clone(), r.class.clone())))
        .cloned()
        .collect();
    LabelTable::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn data() -> Dataset {
        let s = generate(&SynthSpec {
            classes: 3,
            dim: 8,
            clean_per_class: 4,
            noisy_per_class: 12,
            test_per_class: 0,
            ..Default::default()
        })
        .unwrap();
        Dataset::new(s.store, s.labels).unwrap()
    }

    #[test]
    fn every_method_pins_clean() {
        let d = data();
        for method in Method::ALL {
            let cfg = CleaningConfig {
                method,
                k_nn: 5,
                beta: 0.3,
                ..Default::default()
            };
            let maps = clean_dataset(&d, &cfg, 1).unwrap();
            assert_eq!(maps.len(), 3);
            for m in &maps {
                for e in m.entries() {
                    assert!((0.0..=1.0).contains(&e.relevance));
                    if e.provenance == Provenance::Clean {
                        assert_eq!(e.relevance.to_bits(), 1.0f64.to_bits(), "{method}");
                    }
                }
            }
        }
    }

    #[test]
    fn episode_sampling_is_seeded() {
        let d = data();
        let a = sample_clean_subset(d.labels(), 2, 9).unwrap();
        let b = sample_clean_subset(d.labels(), 2, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ids_for("class00", Provenance::Clean).len(), 2);
        assert!(sample_clean_subset(d.labels(), 5, 9).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("dirty".parse::<Method>().is_err());
    }
}
