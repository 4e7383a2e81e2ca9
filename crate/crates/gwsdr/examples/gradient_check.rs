//! Verify both analytic gradients against central finite differences: the
//! cross-entropy backward pass and the eigenvector-perturbation gradient of
//! the directional penalty.
//!
//!     cargo run --example gradient_check

use gwsdr::check::{finite_diff_grad, max_relative_error};
use gwsdr::classifier::{ce_grad, ce_loss, ClassifierModel};
use gwsdr::dataset::{generate_synthetic, SyntheticSpec};
use gwsdr::dr;

fn main() {
    let spec = SyntheticSpec {
        num_source_classes: 3,
        num_target_classes: 3,
        feature_dim: 3,
        samples_per_source_class: 5,
        samples_per_target_class: 8,
        class_separation: 5.0,
        target_perturbation: 0.5,
        noise_scale: 1.0,
        ground_truth_map: vec![0, 1, 2],
        seed: 1,
    };
    let (_, data) = generate_synthetic(&spec).unwrap();
    let model = ClassifierModel::new(&[3, 4, 3], 17).unwrap();
    let ids: Vec<usize> = (0..12).collect();
    let sizes = model.layer_sizes.clone();

    let analytic = ce_grad(&model, &data, &ids).unwrap();
    let numeric = finite_diff_grad(
        |p| ce_loss(&ClassifierModel::from_flat(&sizes, p, 0).unwrap(), &data, &ids).unwrap(),
        &model.flat_params(),
        1e-5,
    );
    println!(
        "cross-entropy gradient ({} parameters): max relative error vs finite differences {:.2e}",
        analytic.len(),
        max_relative_error(&analytic, &numeric, 1e-6)
    );

    let reference = ClassifierModel::new(&[3, 4, 3], 51).unwrap();
    for k in [1usize, 2, 4] {
        let analytic = dr::dr_grad(&model, &reference, k).unwrap();
        let e_phi = dr::significant_eigvecs(&dr::reshape_params(&reference), k).unwrap();
        let numeric = finite_diff_grad(
            |p| dr::loss_and_grad_flat(p, &e_phi, k).unwrap().0,
            &model.flat_params(),
            1e-5,
        );
        println!(
            "directional penalty gradient, k = {k}: max relative error {:.2e}",
            max_relative_error(&analytic, &numeric, 1e-6)
        );
    }

    // At a perfect minimum the penalty's gradient is exactly zero.
    let at_min = dr::dr_grad(&model, &model, 2).unwrap();
    println!(
        "at phi = theta the penalty is {:.1e} and its gradient norm is {}",
        dr::dr_loss(&model, &model, 2).unwrap(),
        at_min.iter().map(|g| g * g).sum::<f64>().sqrt()
    );
}
