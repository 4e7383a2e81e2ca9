//! Train the softmax classifier on synthetic data, evaluate it, and score
//! how separable its penultimate embeddings are.
//!
//!     cargo run --example train_classifier

use gwsdr::classifier::{
    embed_dataset, evaluate, separability_score, train, ClassifierModel, TrainConfig,
};
use gwsdr::dataset::{generate_synthetic, split_dataset, SyntheticSpec};

fn main() {
    let spec = SyntheticSpec {
        num_source_classes: 4,
        num_target_classes: 4,
        feature_dim: 6,
        samples_per_source_class: 10,
        samples_per_target_class: 60,
        class_separation: 6.0,
        target_perturbation: 0.5,
        noise_scale: 1.2,
        ground_truth_map: vec![0, 1, 2, 3],
        seed: 9,
    };
    let (_, data) = generate_synthetic(&spec).unwrap();
    let (train_part, test_part) = split_dataset(&data, 0.5, 1).unwrap();

    let model = ClassifierModel::new(&[6, 12, 4], 2).unwrap();
    let cfg = TrainConfig {
        epochs: 120,
        batch_size: 8,
        learning_rate: 0.1,
        l2_weight: 0.0,
        dr_weight: 0.0,
        dr_rank: None,
        seed: 3,
    };
    let (trained, trace) = train(&model, &train_part, &cfg, None).unwrap();
    println!(
        "loss: first epoch {:.4} -> last epoch {:.4}",
        trace.epoch_loss.first().unwrap(),
        trace.epoch_loss.last().unwrap()
    );

    let eval = evaluate(&trained, &test_part).unwrap();
    println!("test accuracy {:.4}; confusion (rows = true class):", eval.accuracy);
    for row in &eval.confusion {
        println!("  {row:?}");
    }

    let before = separability_score(&embed_dataset(&model, &test_part).unwrap()).unwrap();
    let after = separability_score(&embed_dataset(&trained, &test_part).unwrap()).unwrap();
    println!("embedding silhouette: untrained {before:.4} -> trained {after:.4}");
}
