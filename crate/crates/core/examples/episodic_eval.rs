// Few-shot episodes: GCN relevance against using every noisy example as
// is (β = 1) and against ignoring them (β = 0).
//
// cargo run --example episodic_eval

use relclean::eval::{run_episodes, Benchmark, EpisodeSpec, EvalConfig};
use relclean::pipeline::{CleaningConfig, Dataset, Method};
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec {
        classes: 5,
        clean_per_class: 5,
        noisy_per_class: 60,
        test_per_class: 40,
        seed: 3,
        ..SynthSpec::default()
    })?;
    let bench = Benchmark::new(Dataset::new(data.store, data.labels)?, data.test_labels)?;
    let spec = EpisodeSpec { k_shots: 1, episodes: 3, seed: 3 };

    let settings = [
        ("gcn", CleaningConfig::default()),
        ("beta=1", CleaningConfig { method: Method::Beta, beta: 1.0, ..CleaningConfig::default() }),
        ("beta=0", CleaningConfig { method: Method::Beta, beta: 0.0, ..CleaningConfig::default() }),
    ];
    for (name, cleaning) in settings {
        let cfg = EvalConfig { cleaning, top_k: 1, ..EvalConfig::default() };
        let r = run_episodes(&bench, &spec, &cfg)?;
        println!("{name:<7} top-1 {:.3} ± {:.3}  {:.3?}", r.mean, r.std, r.accuracies);
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
