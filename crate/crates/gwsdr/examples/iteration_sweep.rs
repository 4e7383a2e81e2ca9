//! Iterative re-augmentation: modes stay fixed, every round draws fresh
//! source samples (previous rounds are excluded) and retrains from the last
//! model. Accuracy rises early and dips once the source data piles up.
//!
//!     cargo run --release --example iteration_sweep

use gwsdr::pipeline::iteration_sweep;
use gwsdr::presets;

fn main() {
    let seeds = presets::comparison_seeds();
    let (source, train_part, test_part) =
        presets::pipeline_benchmark_data(presets::FIXTURE_GEN_SEED);
    let cfg = presets::pipeline_config();

    let outcome = iteration_sweep(&source, &train_part, &test_part, &cfg, 3, &seeds, 1).unwrap();
    let mean = |variant: &str, x: f64| -> f64 {
        let vals: Vec<f64> = outcome
            .rows
            .iter()
            .filter(|r| r.variant == variant && r.fraction_or_iter == x)
            .map(|r| r.accuracy)
            .collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };

    println!("iteration  gws     gws+dr   (means over {} seeds)", seeds.len());
    println!("{:>9}  {:.4}  {:.4}   <- baseline", 0, mean("baseline", 0.0), mean("baseline", 0.0));
    for round in [1.0, 2.0, 3.0] {
        println!("{round:>9}  {:.4}  {:.4}", mean("gws", round), mean("gws_dr", round));
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
}
