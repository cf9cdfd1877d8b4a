// From relevance maps to a classifier: relevance-weighted prototypes, then a
// cosine classifier trained from them, then base + novel concatenation.
//
// cargo run --example prototypes_and_cosine

use relclean::classifier::{
    classifier_loss, compute_prototypes, concat_all_classes, cosine_predict, train_cosine, TrainConfig, TrainingSet,
};
use relclean::pipeline::{clean_dataset, CleaningConfig, Dataset};
use relclean::synth::{generate, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthSpec {
        classes: 5,
        clean_per_class: 3,
        noisy_per_class: 40,
        test_per_class: 20,
        seed: 5,
        ..SynthSpec::default()
    })?;
    let dataset = Dataset::new(data.store.clone(), data.labels)?;
    let maps = clean_dataset(&dataset, &CleaningConfig::default(), 5)?;

    let cfg = TrainConfig { seed: 5, ..TrainConfig::default() };
    let protos = compute_prototypes(&data.store, &maps, cfg.scale)?;
    let set = TrainingSet::from_maps(&data.store, &maps, protos.class_ids())?;
    let trained = train_cosine(&set, &cfg, &protos)?;
    println!(
        "loss {:.4} with prototypes, {:.4} after {} epochs",
        classifier_loss(&protos, &set)?,
        classifier_loss(&trained, &set)?,
        cfg.epochs
    );

    let mut hits = [0usize; 2];
    for row in data.test_labels.rows() {
        let x = data.store.vector(data.store.index_of(&row.id).expect("test ids are in the store"));
        for (h, w) in hits.iter_mut().zip([&protos, &trained]) {
            let (best, _) = cosine_predict(w, &x, 1)?[0];
            *h += usize::from(w.class_ids()[best] == row.class);
        }
    }
    let n = data.test_labels.len() as f64;
    println!("top-1: prototypes {:.3}, trained {:.3}", hits[0] as f64 / n, hits[1] as f64 / n);

    // Novel classes appended after (here: a copy renamed as) base classes.
    let base = relclean::classifier::ClassifierWeights::new(
        protos.weights().clone(),
        protos.class_ids().iter().map(|c| format!("base_{c}")).collect(),
        protos.scale(),
    )?;
    let all = concat_all_classes(Some(&base), &trained)?;
    println!("joint classifier over {} classes", all.num_classes());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
