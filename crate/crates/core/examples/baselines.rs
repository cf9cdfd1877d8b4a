// Every cleaning method on the same synthetic benchmark, ranked by how far
// apart they put true positives and negatives.
//
// cargo run --example baselines

use relclean::eval::relevance_report;
use relclean::pipeline::{clean_dataset, CleaningConfig, Dataset, Method};
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec {
        classes: 4,
        clean_per_class: 2,
        noisy_per_class: 50,
        test_per_class: 0,
        seed: 11,
        ..SynthSpec::default()
    })?;
    let dataset = Dataset::new(data.store, data.labels)?;

    println!("{:<11} {:>9} {:>9} {:>6}", "method", "positive", "negative", "gap");
    for method in Method::ALL {
        let cfg = CleaningConfig {
            method,
            k_nn: 20,
            beta: 0.5,
            ..CleaningConfig::default()
        };
        let report = relevance_report(&clean_dataset(&dataset, &cfg, 11)?, &data.truth)?;
        let (p, n) = (report.mean_positive.unwrap_or(0.0), report.mean_negative.unwrap_or(0.0));
        println!("{:<11} {p:>9.3} {n:>9.3} {:>6.3}", method.as_str(), p - n);
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
