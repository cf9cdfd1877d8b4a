// Validation sweeps: λ chosen per number of shots, β* shared by all of them.
//
// cargo run --example lambda_sweep

use relclean::eval::{sweep_beta, sweep_lambda, Benchmark, EpisodeSpec, EvalConfig};
use relclean::pipeline::Dataset;
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec {
        classes: 4,
        clean_per_class: 5,
        noisy_per_class: 40,
        test_per_class: 30,
        seed: 13,
        ..SynthSpec::default()
    })?;
    let bench = Benchmark::new(Dataset::new(data.store, data.labels)?, data.test_labels)?;
    let spec = EpisodeSpec { k_shots: 1, episodes: 2, seed: 13 };
    let cfg = EvalConfig { top_k: 1, ..EvalConfig::default() };
    let shots = [1, 5];

    let lambdas = sweep_lambda(&bench, &shots, &[0.1, 1.0, 5.0], &spec, &cfg)?;
    for r in &lambdas.reports {
        println!("λ={:<4} k={} {:.3}", r.param, r.k_shots, r.mean);
    }
    for (k, best) in &lambdas.best {
        println!("best λ for k={k}: {best}");
    }

    let betas = sweep_beta(&bench, &shots, &[0.0, 0.5, 1.0], &spec, &cfg)?;
    println!("β* = {}", betas.best[0].1);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
