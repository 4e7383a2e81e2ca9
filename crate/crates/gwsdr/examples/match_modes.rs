//! Match every target class to its closest source class under a classifier
//! trained on the scarce target data, by argmax counts and by exact
//! posterior likelihood, and compare against the generator's ground truth.
//!
//!     cargo run --example match_modes

use gwsdr::classifier::{train, ClassifierModel};
use gwsdr::dataset::generate_synthetic;
use gwsdr::matching::{match_modes, second_best, MatchConfig, MatchMethod};
use gwsdr::presets;

fn main() {
    let seed = 5;
    let spec = presets::matching_benchmark_spec(seed);
    let (source, target) = generate_synthetic(&spec).unwrap();
    println!(
        "source {} classes x {}, target {} classes x {} (scarce)",
        source.num_classes(),
        source.class_counts()[0],
        target.num_classes(),
        target.class_counts()[0]
    );

    let model = ClassifierModel::new(&[spec.feature_dim, 16, 8], seed).unwrap();
    let (model, _) = train(&model, &target, &presets::matching_train_config(seed), None).unwrap();

    for method in [MatchMethod::Count, MatchMethod::Likelihood] {
        let cfg = MatchConfig {
            samples_per_class: presets::default_match_samples(&source),
            method,
            seed,
        };
        let report = match_modes(&model, &source, &target.class_names, &cfg).unwrap();
        let hits = report
            .matched
            .iter()
            .zip(&spec.ground_truth_map)
            .filter(|(a, b)| a == b)
            .count();
        println!("\nmethod {method}: {hits}/8 matches agree with the ground-truth map");
        for (q, ranking) in report.rankings.iter().enumerate() {
            let top = &ranking[0];
            println!(
                "  {} -> {}  (count {}/{}, mean prob {:.3}, log-likelihood {:.1}; second best {})",
                report.target_classes[q],
                report.source_classes[top.source_class],
                top.argmax_count,
                top.samples_used,
                top.mean_target_prob,
                top.log_likelihood,
                report.source_classes[second_best(&report, q).unwrap()],
            );
        }
    }
}
