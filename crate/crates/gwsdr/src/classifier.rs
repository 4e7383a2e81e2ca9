//! Small feed-forward softmax classifier with explicit forward/backward
//! passes, mini-batch SGD training, evaluation, and penultimate-embedding
//! export. Hidden layers use tanh.
//!
//! Sequence samples are accepted everywhere a dataset is taken: they are
//! mean-pooled over time to a `feature_dim` vector before classification.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_f64, LabeledDataset};
use crate::dr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// `[d, h1, ..., C]`: input dimension through class count.
    pub layer_sizes: Vec<usize>,
    /// `weights[i]` has shape `layer_sizes[i+1] x layer_sizes[i]`.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub rng_seed: u64,
}

/// One forward pass: class probabilities and the penultimate activation
/// (the input itself for a model with no hidden layer).
#[derive(Debug, Clone)]
pub struct Forward {
    pub probs: Vec<f64>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    /// Weight of the directional penalty; 0 disables it.
    pub dr_weight: f64,
    /// Number of significant eigenvectors kept by the penalty.
    pub dr_rank: Option<usize>,
    pub seed: u64,
}

/// Per-epoch mean of the trained loss (cross-entropy plus the weighted
/// directional term) and eigen-diagnostics when the penalty is active.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_loss: Vec<f64>,
    pub dr_steps: usize,
    pub dr_skipped: usize,
    /// |eigenvalue| of the final reshaped parameters, largest first
    /// (k+1 entries), when the penalty was active.
    pub final_spectrum: Option<Vec<f64>>,
    pub final_eigengap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true_class][predicted_class]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl ClassifierModel {
    /// Seeded initialization: weights drawn layer by layer, row-major, from
    /// N(0, 1/fan_in); biases zero.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidInput(
                "a model needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidInput("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("positive std");
            let mut m = DMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    m[(r, c)] = normal.sample(&mut rng);
                }
            }
            weights.push(m);
            biases.push(DVector::zeros(fan_out));
        }
        Ok(ClassifierModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            rng_seed: seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    /// Parameters in the documented flat order: layer by layer, weight rows
    /// row-major, then the bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn from_flat(layer_sizes: &[usize], flat: &[f64], seed: u64) -> Result<Self> {
        let mut model = ClassifierModel::new(layer_sizes, seed)?;
        if flat.len() != model.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                model.param_count(),
                flat.len()
            )));
        }
        model.set_flat(flat);
        Ok(model)
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut i = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    w[(r, c)] = flat[i];
                    i += 1;
                }
            }
            for v in b.iter_mut() {
                *v = flat[i];
                i += 1;
            }
        }
        debug_assert_eq!(i, flat.len());
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let acts = self.activations(x);
        let logits = self.logits(acts.last().unwrap());
        Ok(Forward {
            probs: softmax(&logits).iter().copied().collect(),
            embedding: acts.last().unwrap().iter().copied().collect(),
        })
    }

    /// Argmax class with ties broken by the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.probs))
    }

    /// Activations entering each layer: `acts[0]` is the input, `acts[l]` the
    /// tanh output of hidden layer `l`. The last entry feeds the final layer.
    fn activations(&self, x: &[f64]) -> Vec<DVector<f64>> {
        let mut acts = vec![DVector::from_column_slice(x)];
        for l in 0..self.weights.len() - 1 {
            let z = &self.weights[l] * acts.last().unwrap() + &self.biases[l];
            acts.push(z.map(f64::tanh));
        }
        acts
    }

    fn logits(&self, penultimate: &DVector<f64>) -> DVector<f64> {
        let last = self.weights.len() - 1;
        &self.weights[last] * penultimate + &self.biases[last]
    }
}

fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e = logits.map(|z| (z - m).exp());
    let sum: f64 = e.iter().sum();
    e /= sum;
    e
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

const PROB_FLOOR: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Loss and gradient
// ---------------------------------------------------------------------------

fn check_data(model: &ClassifierModel, data: &LabeledDataset) -> Result<()> {
    if data.feature_dim != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "dataset feature_dim {} vs model input {}",
            data.feature_dim,
            model.input_dim()
        )));
    }
    if data.num_classes() != model.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, model outputs {}",
            data.num_classes(),
            model.num_classes()
        )));
    }
    Ok(())
}

/// Mean cross-entropy of the model over the given sample indices.
pub fn ce_loss(model: &ClassifierModel, data: &LabeledDataset, ids: &[usize]) -> Result<f64> {
    check_data(model, data)?;
    let mut total = 0.0;
    for &i in ids {
        let f = model.forward(&data.flat_features(i))?;
        total += -f.probs[data.samples[i].label].max(PROB_FLOOR).ln();
    }
    Ok(total / ids.len() as f64)
}

struct Gradient {
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

impl Gradient {
    fn zeros(model: &ClassifierModel) -> Self {
        Gradient {
            w: model.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            b: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for w in &mut self.w {
            *w *= s;
        }
        for b in &mut self.b {
            *b *= s;
        }
    }

    /// Add `scale * flat` interpreted in the model's flat parameter order.
    fn add_flat(&mut self, flat: &[f64], scale: f64) {
        let mut i = 0;
        for (w, b) in self.w.iter_mut().zip(self.b.iter_mut()) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    w[(r, c)] += scale * flat[i];
                    i += 1;
                }
            }
            for v in b.iter_mut() {
                *v += scale * flat[i];
                i += 1;
            }
        }
        debug_assert_eq!(i, flat.len());
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.w.iter().zip(&self.b) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Mean CE over the batch plus its gradient via backpropagation.
fn ce_loss_and_grad(
    model: &ClassifierModel,
    data: &LabeledDataset,
    ids: &[usize],
) -> Result<(f64, Gradient)> {
    let mut grad = Gradient::zeros(model);
    let mut total = 0.0;
    let last = model.weights.len() - 1;
    for &i in ids {
        let x = data.flat_features(i);
        let y = data.samples[i].label;
        let acts = model.activations(&x);
        let logits = model.logits(acts.last().unwrap());
        let probs = softmax(&logits);
        total += -probs[y].max(PROB_FLOOR).ln();

        // dL/dlogits for softmax + cross-entropy.
        let mut delta = probs;
        delta[y] -= 1.0;
        for l in (0..=last).rev() {
            grad.w[l] += &delta * acts[l].transpose();
            grad.b[l] += &delta;
            if l > 0 {
                let back = model.weights[l].transpose() * &delta;
                // tanh'(z) = 1 - tanh(z)^2, and acts[l] = tanh(z).
                delta = back.zip_map(&acts[l], |g, a| g * (1.0 - a * a));
            }
        }
    }
    let inv = 1.0 / ids.len() as f64;
    grad.scale(inv);
    Ok((total * inv, grad))
}

/// Mean CE gradient in flat parameter order (for gradient checks).
pub fn ce_grad(model: &ClassifierModel, data: &LabeledDataset, ids: &[usize]) -> Result<Vec<f64>> {
    check_data(model, data)?;
    Ok(ce_loss_and_grad(model, data, ids)?.1.flatten())
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Mini-batch SGD with a fixed learning rate. Batch order is a pure function
/// of `cfg.seed`. With `dr_weight > 0` and a reference model, each step adds
/// the weighted directional penalty and its gradient; steps with a degenerate
/// spectrum skip the penalty and are counted in the trace.
pub fn train(
    model: &ClassifierModel,
    data: &LabeledDataset,
    cfg: &TrainConfig,
    dr_ref: Option<&ClassifierModel>,
) -> Result<(ClassifierModel, TrainTrace)> {
    check_data(model, data)?;
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidInput("epochs and batch_size must be positive".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidInput("learning_rate must be positive".into()));
    }

    let dr_active = cfg.dr_weight > 0.0;
    let (phi_basis, rank) = if dr_active {
        let reference = dr_ref.ok_or_else(|| {
            Error::InvalidInput("dr_weight > 0 requires a reference model".into())
        })?;
        if reference.layer_sizes != model.layer_sizes {
            return Err(Error::ShapeMismatch(
                "reference model must share the trained model's layer sizes".into(),
            ));
        }
        let rank = cfg.dr_rank.ok_or_else(|| {
            Error::InvalidInput("dr_weight > 0 requires dr_rank".into())
        })?;
        // The reference is fixed during training, so its basis is computed once.
        (Some(dr::significant_eigvecs(&dr::reshape_params(reference), rank)?), rank)
    } else {
        (None, 0)
    };

    let mut model = model.clone();
    let mut trace = TrainTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ids: Vec<usize> = (0..data.samples.len()).collect();

    for _ in 0..cfg.epochs {
        ids.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        let mut batches = 0usize;
        for chunk in ids.chunks(cfg.batch_size) {
            let (ce, mut grad) = ce_loss_and_grad(&model, data, chunk)?;
            let mut step_loss = ce;
            if let Some(e_phi) = &phi_basis {
                match dr::loss_and_grad_flat(&model.flat_params(), e_phi, rank) {
                    Ok((dr_loss, dr_grad)) => {
                        step_loss += cfg.dr_weight * dr_loss;
                        grad.add_flat(&dr_grad, cfg.dr_weight);
                        trace.dr_steps += 1;
                    }
                    Err(Error::DegenerateSpectrum { .. }) => trace.dr_skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            for l in 0..model.weights.len() {
                if cfg.l2_weight > 0.0 {
                    grad.w[l] += cfg.l2_weight * &model.weights[l];
                }
                model.weights[l] -= cfg.learning_rate * &grad.w[l];
                model.biases[l] -= cfg.learning_rate * &grad.b[l];
            }
            epoch_total += step_loss;
            batches += 1;
        }
        trace.epoch_loss.push(epoch_total / batches as f64);
    }

    if dr_active {
        let eig = dr::sorted_eigen(&dr::reshape_params(&model))?;
        let take = (rank + 1).min(eig.values.len());
        trace.final_spectrum = Some(eig.values[..take].iter().map(|v| v.abs()).collect());
        trace.final_eigengap = if rank < eig.values.len() {
            Some(eig.values[rank - 1].abs() - eig.values[rank].abs())
        } else {
            None
        };
    }
    Ok((model, trace))
}

// ---------------------------------------------------------------------------
// Evaluation and embeddings
// ---------------------------------------------------------------------------

pub fn evaluate(model: &ClassifierModel, data: &LabeledDataset) -> Result<Evaluation> {
    check_data(model, data)?;
    let c = model.num_classes();
    let mut confusion = vec![vec![0usize; c]; c];
    for i in 0..data.samples.len() {
        let pred = model.predict(&data.flat_features(i))?;
        confusion[data.samples[i].label][pred] += 1;
    }
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / data.samples.len() as f64,
        confusion,
    })
}

/// Penultimate embeddings for every sample, order preserved.
pub fn embed_dataset(
    model: &ClassifierModel,
    data: &LabeledDataset,
) -> Result<Vec<(Vec<f64>, usize)>> {
    check_data(model, data)?;
    (0..data.samples.len())
        .map(|i| {
            let f = model.forward(&data.flat_features(i))?;
            Ok((f.embedding, data.samples[i].label))
        })
        .collect()
}

/// Mean silhouette coefficient over Euclidean distances, in [-1, 1].
/// Points with zero distance to everything score 0, so a fully degenerate
/// embedding scores 0.
pub fn separability_score(items: &[(Vec<f64>, usize)]) -> Result<f64> {
    let n = items.len();
    let labels: Vec<usize> = items.iter().map(|(_, l)| *l).collect();
    let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::InvalidInput(
            "separability needs at least 2 classes".into(),
        ));
    }
    for &c in &distinct {
        if labels.iter().filter(|&&l| l == c).count() < 2 {
            return Err(Error::InvalidInput(format!(
                "separability needs at least 2 samples per class (class {c})"
            )));
        }
    }

    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        let mut sums: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = sums.entry(labels[j]).or_insert((0.0, 0));
            e.0 += dist(&items[i].0, &items[j].0);
            e.1 += 1;
        }
        let own = labels[i];
        let a = sums[&own].0 / sums[&own].1 as f64;
        let b = sums
            .iter()
            .filter(|(&l, _)| l != own)
            .map(|(_, &(s, c))| s / c as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

// ---------------------------------------------------------------------------
// Model file format: `layers: d,h,C` and `seed: s` headers, then per layer
// the weight rows (row-major) and one bias row, 9 significant digits.
// ---------------------------------------------------------------------------

pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    let mut out = String::new();
    let sizes: Vec<String> = model.layer_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&format!("layers: {}\n", sizes.join(",")));
    out.push_str(&format!("seed: {}\n", model.rng_seed));
    for (w, b) in model.weights.iter().zip(&model.biases) {
        for r in 0..w.nrows() {
            let row: Vec<String> = (0..w.ncols()).map(|c| fmt_f64(w[(r, c)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let row: Vec<String> = b.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (no, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let sizes_str = header
        .strip_prefix("layers: ")
        .ok_or_else(|| Error::parse(path, no + 1, "expected `layers: ...`"))?;
    let layer_sizes: Vec<usize> = sizes_str
        .split(',')
        .map(|s| parse_field(path, no + 1, s))
        .collect::<Result<_>>()?;
    let (no, seed_line) = lines.next().ok_or_else(|| Error::parse(path, 2, "missing seed"))?;
    let seed: u64 = seed_line
        .strip_prefix("seed: ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(path, no + 1, "expected `seed: n`"))?;

    let mut model = ClassifierModel::new(&layer_sizes, seed)?;
    for l in 0..layer_sizes.len() - 1 {
        let (rows, cols) = (layer_sizes[l + 1], layer_sizes[l]);
        for r in 0..rows {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, 0, format!("missing weight row {r} of layer {l}")))?;
            let vals = parse_numbers(path, no + 1, line, cols)?;
            for (c, v) in vals.into_iter().enumerate() {
                model.weights[l][(r, c)] = v;
            }
        }
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("missing bias row of layer {l}")))?;
        let vals = parse_numbers(path, no + 1, line, rows)?;
        for (r, v) in vals.into_iter().enumerate() {
            model.biases[l][r] = v;
        }
    }
    Ok(model)
}

fn parse_field(path: &Path, lineno: usize, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, lineno, format!("expected an integer, got {s:?}")))
}

fn parse_numbers(path: &Path, lineno: usize, line: &str, expect: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("expected a number, got {s:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {expect} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::finite_diff_grad;
    use crate::dataset::{generate_synthetic, Sample, SyntheticSpec};

    fn two_blob_data(seed: u64) -> (LabeledDataset, LabeledDataset) {
        let spec = SyntheticSpec {
            num_source_classes: 2,
            num_target_classes: 2,
            feature_dim: 3,
            samples_per_source_class: 30,
            samples_per_target_class: 10,
            class_separation: 6.0,
            target_perturbation: 0.5,
            noise_scale: 0.5,
            ground_truth_map: vec![0, 1],
            seed,
        };
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_expected_shapes() {
        let a = ClassifierModel::new(&[4, 8, 3], 42).unwrap();
        let b = ClassifierModel::new(&[4, 8, 3], 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights[0].shape(), (8, 4));
        assert_eq!(a.weights[1].shape(), (3, 8));
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert_eq!(a.param_count(), 8 * 4 + 8 + 3 * 8 + 3);
    }

    #[test]
    fn forward_is_a_probability_vector() {
        let model = ClassifierModel::new(&[4, 6, 3], 1).unwrap();
        let f = model.forward(&[0.3, -1.2, 0.8, 2.0]).unwrap();
        let sum: f64 = f.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(f.probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(f.embedding.len(), 6);
        assert!(model.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let mut model = ClassifierModel::new(&[4, 6, 3], 1).unwrap();
        for w in &mut model.weights {
            w.fill(0.0);
        }
        let f = model.forward(&[0.5, 1.0, -0.3, 0.0]).unwrap();
        for &p in &f.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probs_invariant_under_logit_shift() {
        let model = ClassifierModel::new(&[4, 6, 3], 9).unwrap();
        let mut shifted = model.clone();
        let last = shifted.biases.len() - 1;
        shifted.biases[last].add_scalar_mut(7.5);
        let x = [0.4, -0.9, 1.7, 0.2];
        let a = model.forward(&x).unwrap().probs;
        let b = shifted.forward(&x).unwrap().probs;
        for (pa, pb) in a.iter().zip(&b) {
            assert!((pa - pb).abs() < 1e-12);
        }
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let (_, data) = two_blob_data(5);
        // 3-layer model with 3*4+4 + 4*... = 31 parameters, well under 200.
        let model = ClassifierModel::new(&[3, 4, 2], 17).unwrap();
        let ids: Vec<usize> = (0..8).collect();
        let analytic = ce_grad(&model, &data, &ids).unwrap();
        let sizes = model.layer_sizes.clone();
        let numeric = finite_diff_grad(
            |p| ce_loss(&ClassifierModel::from_flat(&sizes, p, 0).unwrap(), &data, &ids).unwrap(),
            &model.flat_params(),
            1e-5,
        );
        for (i, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            let rel = (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
            assert!(rel < 1e-4, "coordinate {i}: analytic {a}, numeric {f}");
        }
    }

    fn quick_cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            learning_rate: 0.2,
            l2_weight: 0.0,
            dr_weight: 0.0,
            dr_rank: None,
            seed,
        }
    }

    #[test]
    fn training_fits_separable_data() {
        let (source, _) = two_blob_data(8);
        let model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        let (trained, trace) = train(&model, &source, &quick_cfg(80, 3), None).unwrap();
        let eval = evaluate(&trained, &source).unwrap();
        assert!(eval.accuracy >= 0.99, "accuracy {}", eval.accuracy);
        assert!(
            trace.epoch_loss.last().unwrap() < trace.epoch_loss.first().unwrap(),
            "loss should drop on separable data"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let (source, _) = two_blob_data(8);
        let model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        let (a, _) = train(&model, &source, &quick_cfg(20, 3), None).unwrap();
        let (b, _) = train(&model, &source, &quick_cfg(20, 3), None).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn zero_dr_weight_matches_plain_ce_training() {
        let (source, _) = two_blob_data(8);
        let model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        let reference = ClassifierModel::new(&[3, 8, 2], 99).unwrap();
        let mut cfg = quick_cfg(20, 3);
        cfg.dr_rank = Some(2);
        let (with_ref, _) = train(&model, &source, &cfg, Some(&reference)).unwrap();
        let (without, _) = train(&model, &source, &quick_cfg(20, 3), None).unwrap();
        assert_eq!(with_ref.flat_params(), without.flat_params());
    }

    #[test]
    fn degenerate_spectra_skip_the_penalty_step() {
        // An all-zero model reshapes to the zero matrix: a fully tied
        // spectrum. The first steps skip the penalty and are counted;
        // training itself proceeds on the CE gradient.
        let (source, _) = two_blob_data(8);
        let mut model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        model.set_flat(&vec![0.0; model.param_count()]);
        let reference = ClassifierModel::new(&[3, 8, 2], 99).unwrap();
        let mut cfg = quick_cfg(3, 3);
        cfg.dr_weight = 0.5;
        cfg.dr_rank = Some(2);
        let (trained, trace) = train(&model, &source, &cfg, Some(&reference)).unwrap();
        assert!(trace.dr_skipped >= 1, "trace: {trace:?}");
        assert_ne!(trained.flat_params(), model.flat_params());
    }

    #[test]
    fn dr_weight_requires_reference_and_rank() {
        let (source, _) = two_blob_data(8);
        let model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        let mut cfg = quick_cfg(5, 3);
        cfg.dr_weight = 1.0;
        cfg.dr_rank = Some(2);
        assert!(train(&model, &source, &cfg, None).is_err());
        cfg.dr_rank = None;
        assert!(train(&model, &source, &cfg, Some(&model)).is_err());
    }

    /// Nearest-mean discriminant: logit_c = s*(m_c . x - |m_c|^2 / 2).
    fn nearest_mean_model(means: &[Vec<f64>], scale: f64) -> ClassifierModel {
        let d = means[0].len();
        let c = means.len();
        let mut model = ClassifierModel::new(&[d, c], 0).unwrap();
        for (r, m) in means.iter().enumerate() {
            for (col, &v) in m.iter().enumerate() {
                model.weights[0][(r, col)] = scale * v;
            }
            let sq: f64 = m.iter().map(|v| v * v).sum();
            model.biases[0][r] = -scale * sq / 2.0;
        }
        model
    }

    #[test]
    fn perfect_model_scores_one_with_diagonal_confusion() {
        let (source, _) = two_blob_data(12);
        let means = crate::dataset::empirical_class_means(&source);
        let model = nearest_mean_model(&means, 10.0);
        let eval = evaluate(&model, &source).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.confusion[0][1], 0);
        assert_eq!(eval.confusion[1][0], 0);
    }

    #[test]
    fn zero_weight_model_predicts_class_zero_by_tie_break() {
        let (source, _) = two_blob_data(12);
        let mut model = ClassifierModel::new(&[3, 2], 0).unwrap();
        model.weights[0].fill(0.0);
        let eval = evaluate(&model, &source).unwrap();
        assert!((eval.accuracy - 0.5).abs() < 1e-12);
        // Everything lands in the predicted-0 column.
        assert_eq!(eval.confusion[0][0] + eval.confusion[1][0], source.samples.len());
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let (source, _) = two_blob_data(21);
        let model = ClassifierModel::new(&[3, 5, 2], 4).unwrap();
        let eval = evaluate(&model, &source).unwrap();
        let counts = source.class_counts();
        for (c, row) in eval.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), counts[c]);
        }
    }

    #[test]
    fn embeddings_preserve_order_and_vary_after_training() {
        let (source, _) = two_blob_data(8);
        let model = ClassifierModel::new(&[3, 8, 2], 2).unwrap();
        let (trained, _) = train(&model, &source, &quick_cfg(40, 3), None).unwrap();
        let embedded = embed_dataset(&trained, &source).unwrap();
        assert_eq!(embedded.len(), source.samples.len());
        let again = embed_dataset(&trained, &source).unwrap();
        assert_eq!(embedded[0].0, again[0].0);
        let first = &embedded[0].0;
        assert!(embedded.iter().any(|(e, _)| e != first), "embeddings all identical");
        assert!(separability_score(&embedded).unwrap() > 0.0);
    }

    #[test]
    fn silhouette_extremes() {
        // Two point-mass classes: perfect separation.
        let items = vec![
            (vec![0.0, 0.0], 0),
            (vec![0.0, 0.0], 0),
            (vec![5.0, 0.0], 1),
            (vec![5.0, 0.0], 1),
        ];
        assert!((separability_score(&items).unwrap() - 1.0).abs() < 1e-12);

        // Fully degenerate: every sample identical scores 0 by convention.
        let same = vec![
            (vec![1.0], 0),
            (vec![1.0], 0),
            (vec![1.0], 1),
            (vec![1.0], 1),
        ];
        assert_eq!(separability_score(&same).unwrap(), 0.0);

        // Degenerate class counts are an error.
        let one_class = vec![(vec![1.0], 0), (vec![2.0], 0)];
        assert!(separability_score(&one_class).is_err());
    }

    #[test]
    fn silhouette_near_zero_for_random_labels() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let items: Vec<(Vec<f64>, usize)> = (0..60)
                .map(|_| {
                    let point = vec![rng.random::<f64>(), rng.random::<f64>()];
                    (point, rng.random_range(0..2usize))
                })
                .collect();
            let score = separability_score(&items).unwrap();
            assert!(score.abs() < 0.15, "seed {seed}: score {score}");
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let model = ClassifierModel::new(&[4, 8, 3], 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("m1.model");
        let p2 = dir.path().join("m2.model");
        save_model(&model, &p1).unwrap();
        save_model(&model, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        let loaded = load_model(&p1).unwrap();
        assert_eq!(loaded.layer_sizes, model.layer_sizes);
        assert_eq!(loaded.rng_seed, model.rng_seed);
        for (a, b) in loaded.flat_params().iter().zip(model.flat_params()) {
            let rel = (a - b).abs() / b.abs().max(1e-12);
            assert!(rel < 1e-7);
        }
    }

    #[test]
    fn sequence_data_is_pooled_for_classification() {
        // A sequence that mean-pools to a class mean classifies like the mean.
        let means = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let model = nearest_mean_model(&means, 5.0);
        let seq = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![
                Sample { values: vec![4.0, 0.0, 0.0, 0.0], label: 0 },
                Sample { values: vec![0.0, 0.0, 0.0, 4.0], label: 1 },
            ],
            2,
            Some(2),
        )
        .unwrap();
        let eval = evaluate(&model, &seq).unwrap();
        assert_eq!(eval.accuracy, 1.0);
    }
}
