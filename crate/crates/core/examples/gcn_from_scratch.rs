// Trains the two-layer relevance GCN on one hand-built class: two clean
// examples, three noisy ones near them and three far away.
//
// cargo run --example gcn_from_scratch

use relclean::cleaners::{gcn_forward, gcn_loss, train_gcn, train_mlp, ClassProblem, GcnTrainConfig};
use relclean::graph::{build_affinity, normalize_row_stochastic};
use relclean::numerics::DenseMatrix;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let columns = vec![
        vec![1.0, 0.1, 0.0, 0.0],
        vec![0.9, 0.0, 0.1, 0.0],
        vec![1.0, 0.2, 0.1, 0.0],
        vec![0.8, 0.1, 0.0, 0.1],
        vec![0.9, 0.1, 0.1, 0.1],
        vec![0.0, 0.0, 1.0, 0.2],
        vec![0.0, 0.1, 0.9, 0.0],
        vec![0.1, 0.0, 0.0, 1.0],
    ];
    let ids = (0..columns.len()).map(|i| format!("x{i}")).collect();
    let problem = ClassProblem::new("demo", ids, DenseMatrix::from_columns(&columns)?, 2)?;

    let graph = build_affinity(&problem.unit_features()?, problem.ids(), 3)?;
    let a = normalize_row_stochastic(&graph);
    let cfg = GcnTrainConfig { seed: 1, ..GcnTrainConfig::default() };
    let (params, relevance) = train_gcn(&problem, &a, &cfg)?;

    let outputs = gcn_forward(&params, &a, &problem.unit_features()?, None)?;
    println!("final loss {:.4}", gcn_loss(&outputs, problem.clean_count(), cfg.lambda)?);
    for e in relevance.entries() {
        println!("{} {:<5} {:.3}", e.id, e.provenance, e.relevance);
    }

    let mlp = train_mlp(&problem, &cfg)?;
    println!("without the graph: {:.3?}", mlp.values());

    let near = relevance.values()[2..5].iter().sum::<f64>() / 3.0;
    let far = relevance.values()[5..].iter().sum::<f64>() / 3.0;
    if near <= far {
        return Err(format!("near noisy {near:.3} not above far noisy {far:.3}").into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
