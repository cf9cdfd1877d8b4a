mod common;

use common::*;
use proptest::prelude::*;
use relclean::classifier::{
    classifier_loss, compute_prototypes, cosine_predict, prototype, train_cosine, ClassifierWeights, TrainConfig,
    TrainingSet,
};
use relclean::cleaners::{label_propagation_raw, train_gcn, ClassProblem, GcnTrainConfig, LpConfig, RelevanceMap};
use relclean::eval::{relevance_report, sweep_beta, sweep_lambda, topk_accuracy, Benchmark, EpisodeSpec, EvalConfig};
use relclean::graph::{build_affinity, normalize_row_stochastic};
use relclean::io::{
    decode_feature_store, encode_feature_store, parse_relevance, format_relevance, FeatureStore, Provenance, Truth,
};
use relclean::numerics::{spmm, DenseMatrix, Rng, SparseMatrix};
use relclean::pipeline::{clean_dataset, sample_clean_subset, CleaningConfig, Dataset, Method};
use relclean::synth::{generate, NegativeSource, SynthSpec};

fn small_dataset(seed: u64, classes: usize, noisy: usize) -> (Dataset, relclean::io::TruthTable) {
    let data = generate(&SynthSpec {
        classes,
        dim: 6,
        clean_per_class: 2,
        noisy_per_class: noisy,
        test_per_class: 0,
        seed,
        ..SynthSpec::default()
    })
    .unwrap();
    (Dataset::new(data.store, data.labels).unwrap(), data.truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affinity_is_symmetric_and_rows_stochastic(seed in any::<u64>(), n in 1usize..30, d in 1usize..6, k in 1usize..10) {
        let mut rng = Rng::new(seed);
        let cols = columns_with_ties(&mut rng, d, n);
        let g = build_affinity(&DenseMatrix::from_columns(&cols).unwrap(), &ids(n), k).unwrap();
        for (i, j, w) in g.adjacency().triplets() {
            prop_assert_eq!(g.adjacency().get(j, i).to_bits(), w.to_bits());
            prop_assert!(i != j && w > 0.0);
        }
        let a = normalize_row_stochastic(&g);
        for r in 0..n {
            prop_assert!((a.matrix().row_sum(r) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn raising_k_never_removes_edges(seed in any::<u64>(), n in 2usize..30, d in 1usize..6, k in 1usize..10) {
        let mut rng = Rng::new(seed);
        let f = DenseMatrix::from_columns(&columns_with_ties(&mut rng, d, n)).unwrap();
        let small = build_affinity(&f, &ids(n), k).unwrap();
        let large = build_affinity(&f, &ids(n), k + 1 + rng.below(5)).unwrap();
        for (i, j, w) in small.edges() {
            prop_assert_eq!(large.adjacency().get(i, j), w);
        }
    }

    #[test]
    fn graph_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..25, d in 2usize..6, k in 1usize..8) {
        // Distinct columns, so tie-breaking by index cannot differ between orders.
        let mut rng = Rng::new(seed);
        let cols = random_columns(&mut rng, d, n);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&p| cols[p].clone()).collect();
        let g = build_affinity(&DenseMatrix::from_columns(&cols).unwrap(), &ids(n), k).unwrap();
        let h = build_affinity(&DenseMatrix::from_columns(&permuted).unwrap(), &ids(n), k).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(h.adjacency().get(i, j).to_bits(), g.adjacency().get(perm[i], perm[j]).to_bits());
            }
        }
    }

    #[test]
    fn spmm_matches_dense_and_is_repeatable(seed in any::<u64>(), n in 1usize..40, d in 1usize..6, fill in 0.0f64..1.0) {
        let mut rng = Rng::new(seed);
        let mut trips = vec![];
        for i in 0..n {
            for j in 0..n {
                if rng.uniform() < fill {
                    trips.push((i, j, rng.normal()));
                }
            }
        }
        let s = SparseMatrix::from_triplets(n, n, trips).unwrap();
        let x = DenseMatrix::from_columns(&random_columns(&mut rng, d, n)).unwrap();
        let y = spmm(&s, &x).unwrap();
        prop_assert!(max_abs_diff(&to_dense(&y), &matmul(&to_dense(&x), &to_dense(&s.to_dense()))) <= 1e-12);
        prop_assert_eq!(y, spmm(&s, &x).unwrap());
    }

    #[test]
    fn label_propagation_is_linear(seed in any::<u64>(), n in 3usize..40, k in 1usize..8) {
        let mut rng = Rng::new(seed);
        let g = build_affinity(&DenseMatrix::from_columns(&random_columns(&mut rng, 4, n)).unwrap(), &ids(n), k).unwrap();
        let cfg = LpConfig::default();
        let (a, b) = (rng.below(n), rng.below(n));
        prop_assume!(a != b);
        let both = label_propagation_raw(&g, &[a.min(b), a.max(b)], &cfg).unwrap();
        let ra = label_propagation_raw(&g, &[a], &cfg).unwrap();
        let rb = label_propagation_raw(&g, &[b], &cfg).unwrap();
        for i in 0..n {
            prop_assert!((both[i] - ra[i] - rb[i]).abs() <= 1e-8);
        }
    }

    #[test]
    fn prototypes_ignore_relevance_scale(seed in any::<u64>(), n in 1usize..20, d in 1usize..6, gamma in 0.01f64..100.0) {
        let mut rng = Rng::new(seed);
        let f = DenseMatrix::from_columns(&random_columns(&mut rng, d, n)).unwrap();
        let r: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.01, 1.0)).collect();
        let scaled: Vec<f64> = r.iter().map(|x| x * gamma).collect();
        let p = prototype(&f, &r).unwrap();
        let q = prototype(&f, &scaled).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn ranking_ignores_positive_rescaling(seed in any::<u64>(), k in 2usize..6, d in 2usize..6, c_scale in 0.01f64..100.0, x_scale in 0.01f64..100.0) {
        let mut rng = Rng::new(seed);
        let cols = random_columns(&mut rng, d, k);
        let w = ClassifierWeights::new(DenseMatrix::from_columns(&cols).unwrap(), ids(k), 10.0).unwrap();
        let c = rng.below(k);
        let mut rescaled = cols.clone();
        rescaled[c].iter_mut().for_each(|v| *v *= c_scale);
        let w2 = ClassifierWeights::new(DenseMatrix::from_columns(&rescaled).unwrap(), ids(k), 10.0).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * x_scale).collect();
        let order = |w: &ClassifierWeights, x: &[f64]| cosine_predict(w, x, k).unwrap().into_iter().map(|p| p.0).collect::<Vec<_>>();
        prop_assert_eq!(order(&w, &x), order(&w2, &xs));
    }

    #[test]
    fn unit_relevance_loss_is_class_balanced_cross_entropy(seed in any::<u64>(), k in 1usize..5, d in 1usize..6, extra in 0usize..12) {
        let mut rng = Rng::new(seed);
        let n = k + extra;
        let labels: Vec<usize> = (0..n).map(|j| if j < k { j } else { rng.below(k) }).collect();
        let xs = random_columns(&mut rng, d, n);
        let ws = random_columns(&mut rng, d, k);
        let set = TrainingSet::new(DenseMatrix::from_columns(&xs).unwrap(), labels.clone(), vec![1.0; n]).unwrap();
        let w = ClassifierWeights::new(DenseMatrix::from_columns(&ws).unwrap(), ids(k), 7.0).unwrap();
        // −Σ_c 1/|X_c| Σ_{x∈X_c} log σ(s Ŵᵀ x̂)_c
        let mut expected = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let mut sum = 0.0;
            for &j in &members {
                let z: Vec<f64> = ws.iter().map(|wc| 7.0 * inner(&unit(wc), &unit(&xs[j]))).collect();
                let p = z[c].exp() / z.iter().map(|v| v.exp()).sum::<f64>();
                sum += p.ln();
            }
            expected -= sum / members.len() as f64;
        }
        prop_assert!((classifier_loss(&w, &set).unwrap() - expected).abs() <= 1e-12);
    }

    #[test]
    fn every_cleaner_pins_clean_and_stays_in_range(seed in any::<u64>(), noisy in 0usize..15, method in 0usize..6) {
        let (dataset, _) = small_dataset(seed, 3, noisy);
        let cfg = CleaningConfig { method: Method::ALL[method], k_nn: 5, beta: 0.4, ..CleaningConfig::default() };
        for map in clean_dataset(&dataset, &cfg, seed).unwrap() {
            for e in map.entries() {
                prop_assert!((0.0..=1.0).contains(&e.relevance));
                if e.provenance == Provenance::Clean {
                    prop_assert_eq!(e.relevance.to_bits(), 1.0f64.to_bits());
                }
            }
        }
    }

    #[test]
    fn accuracy_is_monotone_in_top_k(seed in any::<u64>(), n in 1usize..30, k in 2usize..8) {
        let mut rng = Rng::new(seed);
        let rankings: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let mut r: Vec<usize> = (0..k).collect();
                rng.shuffle(&mut r);
                r
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let acc: Vec<f64> = (1..=k).map(|t| topk_accuracy(&rankings, &labels, t)).collect();
        prop_assert!(acc.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(acc[k - 1], 1.0);
    }

    #[test]
    fn relevance_report_means_are_bounded(seed in any::<u64>(), noisy in 1usize..20) {
        let (dataset, truth) = small_dataset(seed, 2, noisy);
        let maps = clean_dataset(&dataset, &CleaningConfig { method: Method::Similarity, ..CleaningConfig::default() }, seed).unwrap();
        let values: Vec<f64> = maps.iter().flat_map(|m| m.noisy().map(|e| e.relevance)).collect();
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let r = relevance_report(&maps, &truth).unwrap();
        for m in [r.mean_positive, r.mean_negative].into_iter().flatten() {
            prop_assert!(m >= lo - 1e-15 && m <= hi + 1e-15);
        }
    }

    #[test]
    fn feature_store_round_trips_f32(seed in any::<u64>(), n in 1usize..10, d in 1usize..6) {
        let mut rng = Rng::new(seed);
        let cols: Vec<Vec<f64>> = random_columns(&mut rng, d, n)
            .into_iter()
            .map(|c| c.into_iter().map(|v| v as f32 as f64).collect())
            .collect();
        let ids: Vec<String> = (0..n).map(|i| format!("ex-{i}-é")).collect();
        let store = FeatureStore::new(ids, DenseMatrix::from_columns(&cols).unwrap()).unwrap();
        let bytes = encode_feature_store(&store);
        prop_assert_eq!(bytes.len(), 20 + 4 * n * d + store.ids().iter().map(|s| 4 + s.len()).sum::<usize>());
        prop_assert_eq!(decode_feature_store(&bytes).unwrap(), store);
    }
}

#[test]
fn relevance_csv_round_trips_at_six_decimals() {
    let (dataset, _) = small_dataset(3, 2, 8);
    let maps = clean_dataset(&dataset, &CleaningConfig { method: Method::Similarity, ..CleaningConfig::default() }, 3).unwrap();
    let text = format_relevance(&maps, None);
    let back = parse_relevance(text.as_bytes()).unwrap();
    for (a, b) in maps.iter().zip(&back) {
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!(x.id, y.id);
            assert!((x.relevance - y.relevance).abs() <= 5e-7);
        }
    }
    assert_eq!(format_relevance(&back, None), text);
}

#[test]
fn single_byte_feature_store_layout() {
    // magic 4 + version 4 + N 8 + d 4 + one f32 4 + id length 4 + id 1
    let store = FeatureStore::new(vec!["a".into()], DenseMatrix::new(1, 1, vec![0.5]).unwrap()).unwrap();
    let bytes = encode_feature_store(&store);
    assert_eq!(bytes.len(), 29);
    assert_eq!(&bytes[20..24], &0.5f32.to_le_bytes());
}

#[test]
fn synthetic_positives_are_closer_to_each_other_than_to_negatives() {
    let data = generate(&SynthSpec {
        classes: 2,
        dim: 16,
        clean_per_class: 5,
        noisy_per_class: 40,
        noise_ratio: 0.5,
        kappa: 8.0,
        test_per_class: 0,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    let vec_of = |id: &str| data.store.vector(data.store.index_of(id).unwrap());
    let of_kind = |t: Truth| -> Vec<Vec<f64>> {
        data.truth.rows().filter(|r| r.1 == "class00" && r.2 == t).map(|r| vec_of(r.0)).collect()
    };
    let (pos, neg) = (of_kind(Truth::Positive), of_kind(Truth::Negative));
    let mean_cos = |a: &[Vec<f64>], b: &[Vec<f64>], skip_diag: bool| {
        let mut s = 0.0;
        let mut c = 0;
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                if !(skip_diag && i == j) {
                    s += inner(x, y);
                    c += 1;
                }
            }
        }
        s / c as f64
    };
    assert!(mean_cos(&pos, &pos, true) > mean_cos(&pos, &neg, false));
    // every negative comes from the other class, so it sits nearer that center
    for n in &neg {
        assert!(inner(n, &data.centers[1]) > inner(n, &data.centers[0]));
    }
}

#[test]
fn uniform_negatives_are_spread_out() {
    let data = generate(&SynthSpec {
        classes: 1,
        dim: 8,
        noise_ratio: 1.0,
        negatives: NegativeSource::Uniform,
        test_per_class: 0,
        ..SynthSpec::default()
    })
    .unwrap();
    let mean: f64 = data
        .truth
        .rows()
        .map(|r| inner(&data.store.vector(data.store.index_of(r.0).unwrap()), &data.centers[0]))
        .sum::<f64>()
        / data.truth.len() as f64;
    assert!(mean.abs() < 0.15, "{mean}");
}

#[test]
fn gcn_training_is_deterministic_and_lambda_lowers_relevance() {
    let (dataset, _) = small_dataset(21, 2, 30);
    let problem: ClassProblem = dataset.problem("class00").unwrap();
    let g = build_affinity(&problem.unit_features().unwrap(), problem.ids(), 10).unwrap();
    let a = normalize_row_stochastic(&g);
    let run = |lambda: f64| -> RelevanceMap {
        train_gcn(&problem, &a, &GcnTrainConfig { lambda, seed: 3, ..GcnTrainConfig::default() }).unwrap().1
    };
    assert_eq!(run(1.0), run(1.0));
    let means: Vec<f64> = [0.01, 0.1, 1.0, 10.0].iter().map(|&l| run(l).mean_noisy().unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0] + 0.02), "{means:?}");
}

#[test]
fn episode_with_test_equal_to_training_data_is_perfect() {
    // tight, well-separated classes; the test set is the clean pool itself
    let data = generate(&SynthSpec {
        classes: 4,
        dim: 16,
        clean_per_class: 3,
        noisy_per_class: 0,
        test_per_class: 0,
        kappa: f64::INFINITY,
        seed: 2,
        ..SynthSpec::default()
    })
    .unwrap();
    let bench = Benchmark::new(Dataset::new(data.store, data.labels.clone()).unwrap(), data.labels).unwrap();
    let cfg = EvalConfig { top_k: 1, cleaning: CleaningConfig { method: Method::Beta, ..CleaningConfig::default() }, ..EvalConfig::default() };
    let spec = EpisodeSpec { k_shots: 2, episodes: 2, seed: 5 };
    let r = relclean::eval::run_episodes(&bench, &spec, &cfg).unwrap();
    assert_eq!(r.accuracies, vec![1.0, 1.0]);
    assert_eq!(r, relclean::eval::run_episodes(&bench, &spec, &cfg).unwrap());
}

#[test]
fn episode_sampling_repeats_under_seed() {
    let (dataset, _) = small_dataset(8, 3, 4);
    let a = sample_clean_subset(dataset.labels(), 1, 77).unwrap();
    let b = sample_clean_subset(dataset.labels(), 1, 77).unwrap();
    assert_eq!(a.rows(), b.rows());
}

fn sweep_bench(noise_ratio: f64, negatives: NegativeSource, noisy: usize) -> Benchmark {
    let data = generate(&SynthSpec {
        classes: 4,
        dim: 16,
        clean_per_class: 3,
        noisy_per_class: noisy,
        noise_ratio,
        negatives,
        test_per_class: 20,
        seed: 12,
        ..SynthSpec::default()
    })
    .unwrap();
    Benchmark::new(Dataset::new(data.store, data.labels).unwrap(), data.test_labels).unwrap()
}

#[test]
fn lambda_sweep_tables_and_tie_rule() {
    let spec = EpisodeSpec { k_shots: 1, episodes: 2, seed: 1 };
    let cfg = EvalConfig { top_k: 1, ..EvalConfig::default() };

    let bench = sweep_bench(0.5, NegativeSource::OtherClasses { confusers: 1 }, 20);
    let single = sweep_lambda(&bench, &[1], &[0.7], &spec, &cfg).unwrap();
    assert_eq!(single.best, vec![(1, 0.7)]);

    let grid = [0.1, 1.0, 5.0];
    let full = sweep_lambda(&bench, &[1, 2], &grid, &spec, &cfg).unwrap();
    assert_eq!(full.reports.len(), grid.len() * 2);
    assert!(full.reports.iter().all(|r| r.accuracies.len() == spec.episodes));

    // no noisy examples: λ has no effect, the smallest grid value wins
    let clean_only = sweep_bench(0.5, NegativeSource::OtherClasses { confusers: 1 }, 0);
    let tie = sweep_lambda(&clean_only, &[1], &grid, &spec, &cfg).unwrap();
    assert_eq!(tie.best, vec![(1, 0.1)]);
}

#[test]
fn beta_sweep_picks_smallest_when_noise_is_pure() {
    let spec = EpisodeSpec { k_shots: 1, episodes: 2, seed: 1 };
    let cfg = EvalConfig { top_k: 1, ..EvalConfig::default() };
    let bench = sweep_bench(1.0, NegativeSource::OtherClasses { confusers: 1 }, 30);
    let r = sweep_beta(&bench, &[1, 2], &[0.0, 0.5, 1.0], &spec, &cfg).unwrap();
    assert_eq!(r.best, vec![(0, 0.0)]);
    assert_eq!(r, sweep_beta(&bench, &[1, 2], &[0.0, 0.5, 1.0], &spec, &cfg).unwrap());
    assert_eq!(sweep_beta(&bench, &[1], &[1.0], &spec, &cfg).unwrap().best, vec![(0, 1.0)]);
}

#[test]
fn cosine_training_is_deterministic() {
    let (dataset, _) = small_dataset(30, 3, 10);
    let maps = clean_dataset(&dataset, &CleaningConfig::default(), 30).unwrap();
    let protos = compute_prototypes(dataset.store(), &maps, 10.0).unwrap();
    let set = TrainingSet::from_maps(dataset.store(), &maps, protos.class_ids()).unwrap();
    let cfg = TrainConfig { seed: 4, epochs: 5, ..TrainConfig::default() };
    assert_eq!(train_cosine(&set, &cfg, &protos).unwrap(), train_cosine(&set, &cfg, &protos).unwrap());
}
