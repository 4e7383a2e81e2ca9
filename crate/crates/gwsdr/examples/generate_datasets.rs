//! Generate a paired source/target benchmark with a known class
//! correspondence, write it to disk, and read it back.
//!
//!     cargo run --example generate_datasets

use gwsdr::dataset::{
    empirical_class_means, generate_synthetic, load_dataset, split_dataset, write_dataset,
    SyntheticSpec,
};

fn main() {
    let spec = SyntheticSpec {
        num_source_classes: 5,
        num_target_classes: 3,
        feature_dim: 4,
        samples_per_source_class: 30,
        samples_per_target_class: 10,
        class_separation: 8.0,
        target_perturbation: 1.0,
        noise_scale: 0.6,
        ground_truth_map: vec![4, 0, 2],
        seed: 42,
    };
    let (source, target) = generate_synthetic(&spec).unwrap();
    println!(
        "source: {} classes x {} samples, dim {}",
        source.num_classes(),
        source.samples.len(),
        source.feature_dim
    );
    println!(
        "target: {} classes x {} samples (each class near its source mate)",
        target.num_classes(),
        target.samples.len()
    );

    // Every target class mean sits closest to its ground-truth mate.
    let sm = empirical_class_means(&source);
    let tm = empirical_class_means(&target);
    for (q, t_mean) in tm.iter().enumerate() {
        let dist = |m: &Vec<f64>| -> f64 {
            m.iter().zip(t_mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        let nearest = (0..sm.len()).min_by(|&a, &b| dist(&sm[a]).partial_cmp(&dist(&sm[b])).unwrap());
        println!(
            "target class {q}: nearest source mean {} (ground truth {})",
            nearest.unwrap(),
            spec.ground_truth_map[q]
        );
    }

    let dir = std::env::temp_dir().join("gwsdr_generate_example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("target.ds");
    write_dataset(&target, &path).unwrap();
    let reloaded = load_dataset(&path).unwrap();
    println!(
        "round trip through {}: {} samples, classes {:?}",
        path.display(),
        reloaded.samples.len(),
        reloaded.class_names
    );

    let (train_part, test_part) = split_dataset(&target, 0.5, 7).unwrap();
    println!(
        "stratified split 0.5: train counts {:?}, test counts {:?}",
        train_part.class_counts(),
        test_part.class_counts()
    );
}
