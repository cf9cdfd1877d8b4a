// Round trips through the on-disk formats: the binary feature store, label
// CSV, relevance CSV and classifier weights.
//
// cargo run --example feature_store_io

use relclean::classifier::compute_prototypes;
use relclean::io::{
    read_feature_store, read_labels, read_relevance, read_weights, write_feature_store, write_labels,
    write_relevance, write_weights,
};
use relclean::pipeline::{clean_dataset, CleaningConfig, Dataset, Method};
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec {
        classes: 3,
        dim: 8,
        clean_per_class: 2,
        noisy_per_class: 6,
        test_per_class: 0,
        seed: 1,
        ..SynthSpec::default()
    })?;
    let dir = tempfile::tempdir()?;
    let fsto = dir.path().join("features.fsto");
    write_feature_store(&fsto, &data.store)?;
    let store = read_feature_store(&fsto)?;
    println!("{} bytes for {} × {} features", std::fs::metadata(&fsto)?.len(), store.len(), store.dim());
    assert_eq!(store.ids(), data.store.ids());

    let labels_path = dir.path().join("labels.csv");
    write_labels(&labels_path, &data.labels, Some(1))?;
    let labels = read_labels(&labels_path)?;
    assert_eq!(labels, data.labels);

    let cfg = CleaningConfig { method: Method::Similarity, ..CleaningConfig::default() };
    let maps = clean_dataset(&Dataset::new(store.clone(), labels)?, &cfg, 1)?;
    let rel_path = dir.path().join("relevance.csv");
    write_relevance(&rel_path, &maps, Some(1))?;
    print!("{}", std::fs::read_to_string(&rel_path)?.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    let back = read_relevance(&rel_path)?;
    assert_eq!(back.len(), maps.len());

    let weights = compute_prototypes(&store, &back, 10.0)?;
    let w_path = dir.path().join("weights.wcls");
    write_weights(&w_path, &weights)?;
    assert_eq!(read_weights(&w_path)?.class_ids(), weights.class_ids());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
