//! Accuracy versus augmentation amount: sweeps per-class budgets from a
//! quarter of the target training size up to four times it, printing the
//! mean curve per variant. Moderate augmentation helps; when relabeled
//! source samples dominate, accuracy falls off again.
//!
//!     cargo run --release --example augmentation_sweep

use std::collections::BTreeMap;

use gwsdr::pipeline::augmentation_sweep;
use gwsdr::presets;

fn main() {
    let fractions = [0.25, 0.5, 1.0, 2.0, 4.0];
    let seeds: Vec<u64> = (1..=10).collect();
    let seed0 = seeds[0];
    let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed0);
    let cfg = presets::pipeline_config();

    let outcome = augmentation_sweep(
        &source,
        &train_part,
        &test_part,
        &cfg,
        &fractions,
        &seeds,
        true,
        1,
    )
    .unwrap();

    // mean accuracy per (variant, fraction)
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for row in &outcome.rows {
        let key = (row.variant.clone(), format!("{}", row.fraction_or_iter));
        let e = sums.entry(key).or_insert((0.0, 0));
        e.0 += row.accuracy;
        e.1 += 1;
    }

    println!("variant   fraction  mean accuracy");
    for ((variant, fraction), (sum, count)) in &sums {
        println!("{variant:<9} {fraction:>8}  {:.4}", sum / *count as f64);
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
}
