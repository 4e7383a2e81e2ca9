//! Localize the active span inside longer sequences: slide an overlapping
//! window over each sequence and keep the window the classifier scores
//! highest for the sequence's class.
//!
//!     cargo run --example trim_windows

use gwsdr::classifier::{train, ClassifierModel};
use gwsdr::dataset::generate_sequence_benchmark;
use gwsdr::matching::trim_sequence;
use gwsdr::presets;

fn main() {
    let spec = presets::trim_benchmark_spec(4);
    let bench = generate_sequence_benchmark(&spec).unwrap();
    println!(
        "{} sequences of {} frames, each hiding a {}-frame span of class signal",
        bench.sequences.samples.len(),
        spec.sequence_length,
        spec.span_length
    );

    // Score windows with a classifier trained on flat samples of the same classes.
    let model = ClassifierModel::new(&[spec.feature_dim, 16, spec.num_classes], 4).unwrap();
    let (model, _) = train(&model, &bench.train, &presets::matching_train_config(4), None).unwrap();

    let stride = spec.span_length / 2;
    let mut hits = 0;
    for (sample, &expected) in bench.sequences.samples.iter().zip(&bench.true_offsets) {
        let trimmed = trim_sequence(
            &model,
            &sample.values,
            spec.feature_dim,
            sample.label,
            spec.span_length,
            stride,
        )
        .unwrap();
        if trimmed.offset == expected {
            hits += 1;
        }
    }
    println!(
        "window {} stride {stride}: recovered {hits}/{} true offsets exactly",
        spec.span_length,
        bench.sequences.samples.len()
    );

    let sample = &bench.sequences.samples[0];
    let trimmed =
        trim_sequence(&model, &sample.values, spec.feature_dim, sample.label, spec.span_length, stride)
            .unwrap();
    println!(
        "first sequence: true offset {}, recovered {}, trimmed length {} values",
        bench.true_offsets[0],
        trimmed.offset,
        trimmed.values.len()
    );
}
