// Builds the reciprocal nearest-neighbor graph of a handful of vectors,
// normalizes it both ways and propagates features through it.
//
// cargo run --example affinity_graph

use relclean::graph::{build_affinity, normalize_row_stochastic, normalize_symmetric, write_edge_csv};
use relclean::numerics::{spmm, DenseMatrix};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let columns = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.9, 0.1, 0.0],
        vec![0.8, 0.2, 0.1],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.9, 0.2],
        vec![0.0, 0.0, 1.0],
    ];
    let ids: Vec<String> = (0..columns.len()).map(|i| format!("v{i}")).collect();
    let features = DenseMatrix::from_columns(&columns)?;

    let graph = build_affinity(&features, &ids, 2)?;
    println!("{} edges among {} vertices", graph.edge_count(), graph.n());
    write_edge_csv(std::io::stdout().lock(), &graph, &ids)?;

    let a = normalize_row_stochastic(&graph);
    for r in 0..a.n() {
        let sum: f64 = a.matrix().row(r).1.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let s = normalize_symmetric(&graph);
    assert!(s.matrix().is_symmetric());

    let smoothed = spmm(a.matrix(), &features)?;
    println!("v5 after one propagation step: {:?}", smoothed.column(5));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
