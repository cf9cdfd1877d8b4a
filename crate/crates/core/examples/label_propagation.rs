// Label propagation: solves (I − αS) r = y by conjugate gradients, first on
// the two-vertex graph where the answer is known in closed form, then on a
// synthetic class.
//
// cargo run --example label_propagation

use relclean::cleaners::{label_propagation, label_propagation_raw, LpConfig};
use relclean::graph::{build_affinity, AffinityGraph};
use relclean::numerics::SparseMatrix;
use relclean::pipeline::Dataset;
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = LpConfig::default();

    // One unit edge: S = [[0, 1], [1, 0]] and r = (1, α) / (1 − α²).
    let edge = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)])?;
    let r = label_propagation_raw(&AffinityGraph::from_adjacency(edge, 1)?, &[0], &cfg)?;
    let alpha = cfg.alpha;
    let expected = [1.0 / (1.0 - alpha * alpha), alpha / (1.0 - alpha * alpha)];
    println!("two vertices: {:.4?} (closed form {:.4?})", r, expected);
    assert!(r.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-8));

    let data = generate(&SynthSpec {
        classes: 3,
        clean_per_class: 3,
        noisy_per_class: 40,
        test_per_class: 0,
        seed: 2,
        ..SynthSpec::default()
    })?;
    let dataset = Dataset::new(data.store, data.labels)?;
    let problem = dataset.problem("class00")?;
    let graph = build_affinity(problem.features(), problem.ids(), 10)?;
    let map = label_propagation(&problem, &graph, &cfg)?;
    println!(
        "class00: {} edges, mean noisy relevance {:.3}",
        graph.edge_count(),
        map.mean_noisy().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
