//! Labeled datasets, synthetic source/target generators with known
//! ground-truth class correspondence, and dataset file I/O.
//!
//! A dataset holds either flat feature vectors of dimension `d` or
//! fixed-length sequences of `T` frames, each frame a `d`-vector
//! (stored flattened, `T * d` values per sample).

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled sample. `values` has length `feature_dim` for flat datasets
/// and `sequence_length * feature_dim` (frame-major) for sequence datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub label: usize,
}

/// Named classes plus fixed-dimension feature samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub feature_dim: usize,
    pub sequence_length: Option<usize>,
}

impl LabeledDataset {
    pub fn new(
        class_names: Vec<String>,
        samples: Vec<Sample>,
        feature_dim: usize,
        sequence_length: Option<usize>,
    ) -> Result<Self> {
        let ds = LabeledDataset {
            class_names,
            samples,
            feature_dim,
            sequence_length,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Length of one sample's `values`.
    pub fn sample_len(&self) -> usize {
        self.feature_dim * self.sequence_length.unwrap_or(1)
    }

    pub fn is_sequence(&self) -> bool {
        self.sequence_length.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() {
            return Err(Error::InvalidInput("dataset has no classes".into()));
        }
        for name in &self.class_names {
            if name.is_empty() || name.contains(',') || name.contains('\n') {
                return Err(Error::InvalidInput(format!(
                    "class name {name:?} is empty or contains ',' or newline"
                )));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidInput("feature_dim must be positive".into()));
        }
        if self.sequence_length == Some(0) {
            return Err(Error::InvalidInput(
                "sequence_length must be positive when present".into(),
            ));
        }
        let expect = self.sample_len();
        let mut counts = vec![0usize; self.class_names.len()];
        for (i, s) in self.samples.iter().enumerate() {
            if s.label >= self.class_names.len() {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has label {} but only {} classes exist",
                    s.label,
                    self.class_names.len()
                )));
            }
            if s.values.len() != expect {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has {} values, expected {expect}",
                    s.values.len()
                )));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "sample {i} contains a non-finite value"
                )));
            }
            counts[s.label] += 1;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidInput(format!(
                "class {c} ({}) has no samples",
                self.class_names[c]
            )));
        }
        Ok(())
    }

    /// Per-class sample counts, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Indices of all samples with the given label.
    pub fn class_sample_ids(&self, class: usize) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// The sample as a length-`feature_dim` vector: identity for flat
    /// datasets, time-mean over frames for sequences.
    pub fn flat_features(&self, idx: usize) -> Vec<f64> {
        pool_frames(
            &self.samples[idx].values,
            self.feature_dim,
            self.sequence_length.unwrap_or(1),
        )
    }

    /// Concatenate two datasets with identical classes and shapes.
    pub fn merged_with(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.class_names != other.class_names
            || self.feature_dim != other.feature_dim
            || self.sequence_length != other.sequence_length
        {
            return Err(Error::ShapeMismatch(
                "cannot merge datasets with different classes or shapes".into(),
            ));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        LabeledDataset::new(
            self.class_names.clone(),
            samples,
            self.feature_dim,
            self.sequence_length,
        )
    }
}

/// Mean over `t` frames of a flattened `t × d` buffer.
pub(crate) fn pool_frames(values: &[f64], d: usize, t: usize) -> Vec<f64> {
    debug_assert_eq!(values.len(), d * t);
    let mut out = vec![0.0; d];
    for frame in values.chunks_exact(d) {
        for (o, v) in out.iter_mut().zip(frame) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= t as f64;
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

/// Parameters for the paired source/target generator. Per-class samples are
/// isotropic Gaussians around class means; each target class mean sits at
/// distance `target_perturbation` from its ground-truth source mate's mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_source_classes: usize,
    pub num_target_classes: usize,
    pub feature_dim: usize,
    pub samples_per_source_class: usize,
    pub samples_per_target_class: usize,
    pub class_separation: f64,
    pub target_perturbation: f64,
    pub noise_scale: f64,
    /// target class index -> source class index
    pub ground_truth_map: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.num_source_classes, self.num_target_classes);
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("class counts must be positive".into()));
        }
        if m > n {
            return Err(Error::InvalidInput(format!(
                "num_target_classes ({m}) must not exceed num_source_classes ({n})"
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidInput("feature_dim must be positive".into()));
        }
        if self.samples_per_source_class == 0 || self.samples_per_target_class == 0 {
            return Err(Error::InvalidInput("samples per class must be positive".into()));
        }
        if !(self.class_separation > 0.0) {
            return Err(Error::InvalidInput("class_separation must be positive".into()));
        }
        if self.target_perturbation < 0.0 {
            return Err(Error::InvalidInput(
                "target_perturbation must be non-negative".into(),
            ));
        }
        if self.target_perturbation >= self.class_separation / 2.0 {
            return Err(Error::InvalidInput(format!(
                "target_perturbation ({}) must be below class_separation/2 ({})",
                self.target_perturbation,
                self.class_separation / 2.0
            )));
        }
        if !(self.noise_scale > 0.0) {
            return Err(Error::InvalidInput("noise_scale must be positive".into()));
        }
        if self.ground_truth_map.len() != m {
            return Err(Error::InvalidInput(format!(
                "ground_truth_map has {} entries, expected {m}",
                self.ground_truth_map.len()
            )));
        }
        if let Some(&bad) = self.ground_truth_map.iter().find(|&&p| p >= n) {
            return Err(Error::InvalidInput(format!(
                "ground_truth_map entry {bad} is not a source class (< {n})"
            )));
        }
        Ok(())
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const MEAN_PLACEMENT_BUDGET: usize = 20_000;

/// Draw `n` class means with pairwise distance >= `separation` by rejection
/// sampling, uniform in a ball whose radius starts at the separation floor
/// and widens every 500 rejections. Typical inter-mean distances therefore
/// concentrate near the floor: `class_separation` controls closeness, not
/// just a lower bound.
fn place_means(rng: &mut ChaCha8Rng, n: usize, d: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut radius = separation;
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut rejections = 0usize;
    while means.len() < n {
        // Uniform in the d-ball: normalized Gaussian direction times U^(1/d).
        let mut candidate: Vec<f64> = (0..d).map(|_| unit.sample(rng)).collect();
        let norm = candidate.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        for v in &mut candidate {
            *v *= r / norm;
        }
        if means.iter().all(|m| euclidean(m, &candidate) >= separation) {
            means.push(candidate);
        } else {
            rejections += 1;
            if rejections % 500 == 0 {
                radius *= 1.3;
            }
            if rejections > MEAN_PLACEMENT_BUDGET {
                return Err(Error::InvalidInput(format!(
                    "could not place {n} class means at separation {separation} in {MEAN_PLACEMENT_BUDGET} attempts"
                )));
            }
        }
    }
    Ok(means)
}

/// Source means plus target means displaced by exactly `target_perturbation`
/// along a seeded random direction (bitwise copies when the perturbation is 0).
fn class_mean_layout(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let source_means = place_means(
        rng,
        spec.num_source_classes,
        spec.feature_dim,
        spec.class_separation,
    )?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut target_means = Vec::with_capacity(spec.num_target_classes);
    for q in 0..spec.num_target_classes {
        let mate = &source_means[spec.ground_truth_map[q]];
        if spec.target_perturbation == 0.0 {
            target_means.push(mate.clone());
            continue;
        }
        let mut dir: Vec<f64>;
        loop {
            dir = (0..spec.feature_dim).map(|_| unit.sample(rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in &mut dir {
                    *v /= norm;
                }
                break;
            }
        }
        target_means.push(
            mate.iter()
                .zip(&dir)
                .map(|(m, u)| m + spec.target_perturbation * u)
                .collect(),
        );
    }
    Ok((source_means, target_means))
}

fn sample_class(
    rng: &mut ChaCha8Rng,
    mean: &[f64],
    noise: f64,
    count: usize,
    label: usize,
) -> Vec<Sample> {
    let normal = Normal::new(0.0, noise).expect("noise is positive");
    (0..count)
        .map(|_| Sample {
            values: mean.iter().map(|m| m + normal.sample(rng)).collect(),
            label,
        })
        .collect()
}

/// Generate a (source, target) dataset pair. Deterministic given `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (source_means, target_means) = class_mean_layout(spec, &mut rng)?;

    let mut source_samples = Vec::new();
    for (p, mean) in source_means.iter().enumerate() {
        source_samples.extend(sample_class(
            &mut rng,
            mean,
            spec.noise_scale,
            spec.samples_per_source_class,
            p,
        ));
    }
    let mut target_samples = Vec::new();
    for (q, mean) in target_means.iter().enumerate() {
        target_samples.extend(sample_class(
            &mut rng,
            mean,
            spec.noise_scale,
            spec.samples_per_target_class,
            q,
        ));
    }

    let source = LabeledDataset::new(
        (0..spec.num_source_classes).map(|p| format!("s{p}")).collect(),
        source_samples,
        spec.feature_dim,
        None,
    )?;
    let target = LabeledDataset::new(
        (0..spec.num_target_classes).map(|q| format!("t{q}")).collect(),
        target_samples,
        spec.feature_dim,
        None,
    )?;
    Ok((source, target))
}

/// Empirical per-class mean features (pooled for sequences).
pub fn empirical_class_means(ds: &LabeledDataset) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; ds.feature_dim]; ds.num_classes()];
    let counts = ds.class_counts();
    for i in 0..ds.samples.len() {
        let f = ds.flat_features(i);
        let label = ds.samples[i].label;
        for (s, v) in sums[label].iter_mut().zip(&f) {
            *s += v;
        }
    }
    for (c, sum) in sums.iter_mut().enumerate() {
        for s in sum.iter_mut() {
            *s /= counts[c] as f64;
        }
    }
    sums
}

// ---------------------------------------------------------------------------
// Sequence benchmark generation
// ---------------------------------------------------------------------------

/// Parameters for the sequence benchmark: each sequence hides one "active"
/// span of class signal inside zero-mean noise frames. Span offsets are drawn
/// from multiples of `span_alignment` so a window scanner with a matching
/// stride can recover them exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub flat_samples_per_class: usize,
    pub sequences_per_class: usize,
    pub sequence_length: usize,
    pub span_length: usize,
    pub span_alignment: usize,
    pub class_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

/// Flat training data, sequences sharing the same class means, and the true
/// span offset of every sequence sample (aligned with `sequences.samples`).
#[derive(Debug, Clone)]
pub struct SequenceBenchmark {
    pub train: LabeledDataset,
    pub sequences: LabeledDataset,
    pub true_offsets: Vec<usize>,
}

pub fn generate_sequence_benchmark(spec: &SequenceSpec) -> Result<SequenceBenchmark> {
    if spec.num_classes == 0 || spec.feature_dim == 0 {
        return Err(Error::InvalidInput("class count and feature_dim must be positive".into()));
    }
    if spec.flat_samples_per_class == 0 || spec.sequences_per_class == 0 {
        return Err(Error::InvalidInput("samples per class must be positive".into()));
    }
    if spec.span_length == 0 || spec.span_length > spec.sequence_length {
        return Err(Error::InvalidInput(format!(
            "span_length ({}) must be in 1..={}",
            spec.span_length, spec.sequence_length
        )));
    }
    if spec.span_alignment == 0 {
        return Err(Error::InvalidInput("span_alignment must be positive".into()));
    }
    if !(spec.class_separation > 0.0) || !(spec.noise_scale > 0.0) {
        return Err(Error::InvalidInput(
            "class_separation and noise_scale must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = place_means(&mut rng, spec.num_classes, spec.feature_dim, spec.class_separation)?;
    let noise = Normal::new(0.0, spec.noise_scale).expect("noise is positive");

    let mut train_samples = Vec::new();
    for (c, mean) in means.iter().enumerate() {
        train_samples.extend(sample_class(
            &mut rng,
            mean,
            spec.noise_scale,
            spec.flat_samples_per_class,
            c,
        ));
    }

    let max_offset = spec.sequence_length - spec.span_length;
    let slots = max_offset / spec.span_alignment;
    let mut seq_samples = Vec::new();
    let mut true_offsets = Vec::new();
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..spec.sequences_per_class {
            let offset = spec.span_alignment * rng.random_range(0..=slots);
            let mut values = Vec::with_capacity(spec.sequence_length * spec.feature_dim);
            for t in 0..spec.sequence_length {
                let active = t >= offset && t < offset + spec.span_length;
                for j in 0..spec.feature_dim {
                    let base = if active { mean[j] } else { 0.0 };
                    values.push(base + noise.sample(&mut rng));
                }
            }
            seq_samples.push(Sample { values, label: c });
            true_offsets.push(offset);
        }
    }

    let names: Vec<String> = (0..spec.num_classes).map(|c| format!("c{c}")).collect();
    Ok(SequenceBenchmark {
        train: LabeledDataset::new(names.clone(), train_samples, spec.feature_dim, None)?,
        sequences: LabeledDataset::new(
            names,
            seq_samples,
            spec.feature_dim,
            Some(spec.sequence_length),
        )?,
        true_offsets,
    })
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

/// Per-class stratified split: `train` receives `ceil(fraction * n_c)` samples
/// of each class, the rest go to `test`. Errors if any class would leave the
/// test side empty (both halves must remain valid datasets) or has fewer than
/// two samples.
pub fn split_dataset(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction must be in (0,1), got {fraction}"
        )));
    }
    ds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_samples = Vec::new();
    let mut test_samples = Vec::new();
    for c in 0..ds.num_classes() {
        let mut ids = ds.class_sample_ids(c);
        if ids.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {c} ({}) has {} sample(s); need at least 2 to split",
                ds.class_names[c],
                ids.len()
            )));
        }
        let n_train = (fraction * ids.len() as f64).ceil() as usize;
        if n_train >= ids.len() {
            return Err(Error::InvalidInput(format!(
                "fraction {fraction} leaves no test samples for class {c} ({})",
                ds.class_names[c]
            )));
        }
        ids.shuffle(&mut rng);
        for &i in &ids[..n_train] {
            train_samples.push(ds.samples[i].clone());
        }
        for &i in &ids[n_train..] {
            test_samples.push(ds.samples[i].clone());
        }
    }
    Ok((
        LabeledDataset::new(
            ds.class_names.clone(),
            train_samples,
            ds.feature_dim,
            ds.sequence_length,
        )?,
        LabeledDataset::new(
            ds.class_names.clone(),
            test_samples,
            ds.feature_dim,
            ds.sequence_length,
        )?,
    ))
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------
//
//   classes: name0,name1,...
//   dim: d              (or `dim: d seqlen: T` for sequence datasets)
//   label|v1,v2,...,vd
//   label|t0:v1,...,vd;t1:v1,...,vd;...
//
// Numbers carry 9 significant digits.

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut out = String::new();
    out.push_str("classes: ");
    out.push_str(&ds.class_names.join(","));
    out.push('\n');
    match ds.sequence_length {
        Some(t) => out.push_str(&format!("dim: {} seqlen: {t}\n", ds.feature_dim)),
        None => out.push_str(&format!("dim: {}\n", ds.feature_dim)),
    }
    for s in &ds.samples {
        out.push_str(&s.label.to_string());
        out.push('|');
        match ds.sequence_length {
            None => {
                let row: Vec<String> = s.values.iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&row.join(","));
            }
            Some(_) => {
                let frames: Vec<String> = s
                    .values
                    .chunks_exact(ds.feature_dim)
                    .enumerate()
                    .map(|(t, frame)| {
                        let row: Vec<String> = frame.iter().map(|&v| fmt_f64(v)).collect();
                        format!("t{t}:{}", row.join(","))
                    })
                    .collect();
                out.push_str(&frames.join(";"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();

    let (lineno, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let names_part = header
        .strip_prefix("classes: ")
        .ok_or_else(|| Error::parse(path, lineno + 1, "expected `classes: ...` header"))?;
    let class_names: Vec<String> = names_part.split(',').map(|s| s.to_string()).collect();

    let (lineno, dims) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing `dim:` line"))?;
    let tokens: Vec<&str> = dims.split_whitespace().collect();
    let (feature_dim, sequence_length) = match tokens.as_slice() {
        ["dim:", d] => (parse_usize(path, lineno + 1, d)?, None),
        ["dim:", d, "seqlen:", t] => (
            parse_usize(path, lineno + 1, d)?,
            Some(parse_usize(path, lineno + 1, t)?),
        ),
        _ => return Err(Error::parse(path, lineno + 1, "expected `dim: d [seqlen: T]`")),
    };

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let (label_str, rest) = line
            .split_once('|')
            .ok_or_else(|| Error::parse(path, lineno, "expected `label|values`"))?;
        let label = parse_usize(path, lineno, label_str)?;
        if label >= class_names.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("label {label} out of range (classes: {})", class_names.len()),
            ));
        }
        let values = match sequence_length {
            None => parse_row(path, lineno, rest, feature_dim)?,
            Some(t) => {
                let mut values = Vec::with_capacity(t * feature_dim);
                let frames: Vec<&str> = rest.split(';').collect();
                if frames.len() != t {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected {t} frames, found {}", frames.len()),
                    ));
                }
                for (expect_t, frame) in frames.iter().enumerate() {
                    let (tag, row) = frame.split_once(':').ok_or_else(|| {
                        Error::parse(path, lineno, "expected `tN:values` frame")
                    })?;
                    let t_idx = tag
                        .strip_prefix('t')
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| Error::parse(path, lineno, format!("bad frame tag {tag:?}")))?;
                    if t_idx != expect_t {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("frame tag t{t_idx} out of order (expected t{expect_t})"),
                        ));
                    }
                    values.extend(parse_row(path, lineno, row, feature_dim)?);
                }
                values
            }
        };
        samples.push(Sample { values, label });
    }

    LabeledDataset::new(class_names, samples, feature_dim, sequence_length)
}

fn parse_usize(path: &Path, lineno: usize, s: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::parse(path, lineno, format!("expected an integer, got {s:?}")))
}

fn parse_row(path: &Path, lineno: usize, row: &str, dim: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = row
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("expected a number, got {s:?}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != dim {
        return Err(Error::parse(
            path,
            lineno,
            format!("row has {} values, expected {dim}", values.len()),
        ));
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// Ground-truth map sidecar
// ---------------------------------------------------------------------------

/// Write the target->source correspondence next to generated datasets:
/// CSV `target,source,target_name,source_name`.
pub fn write_map_sidecar(
    map: &[usize],
    target_names: &[String],
    source_names: &[String],
    path: &Path,
) -> Result<()> {
    let mut out = String::from("target,source,target_name,source_name\n");
    for (q, &p) in map.iter().enumerate() {
        out.push_str(&format!("{q},{p},{},{}\n", target_names[q], source_names[p]));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read back the `target,source` columns of a map sidecar.
pub fn load_map_sidecar(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = HashMap::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let q = cols
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(path, idx + 1, "bad target index"))?;
        let p = cols
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(path, idx + 1, "bad source index"))?;
        entries.insert(q, p);
    }
    let m = entries.len();
    let mut map = Vec::with_capacity(m);
    for q in 0..m {
        map.push(
            *entries
                .get(&q)
                .ok_or_else(|| Error::parse(path, 1, format!("missing target class {q}")))?,
        );
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            num_source_classes: 3,
            num_target_classes: 2,
            feature_dim: 4,
            samples_per_source_class: 6,
            samples_per_target_class: 5,
            class_separation: 8.0,
            target_perturbation: 1.0,
            noise_scale: 0.5,
            ground_truth_map: vec![2, 0],
            seed: 7,
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let spec = small_spec();
        let (s1, t1) = generate_synthetic(&spec).unwrap();
        let (s2, t2) = generate_synthetic(&spec).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
        assert_eq!(s1.num_classes(), 3);
        assert_eq!(t1.num_classes(), 2);
        assert_eq!(s1.feature_dim, 4);
        assert_eq!(s1.class_counts(), vec![6, 6, 6]);
        assert_eq!(t1.class_counts(), vec![5, 5]);
    }

    #[test]
    fn zero_perturbation_copies_mate_means() {
        let mut spec = small_spec();
        spec.target_perturbation = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (source_means, target_means) = class_mean_layout(&spec, &mut rng).unwrap();
        for (q, tm) in target_means.iter().enumerate() {
            assert_eq!(tm, &source_means[spec.ground_truth_map[q]]);
        }
    }

    #[test]
    fn perturbed_means_sit_at_exact_distance() {
        let spec = small_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (source_means, target_means) = class_mean_layout(&spec, &mut rng).unwrap();
        for (q, tm) in target_means.iter().enumerate() {
            let d = euclidean(tm, &source_means[spec.ground_truth_map[q]]);
            assert!((d - spec.target_perturbation).abs() < 1e-9, "distance {d}");
        }
    }

    #[test]
    fn nearest_source_mean_recovers_ground_truth() {
        // Brute-force nearest-mean check over all N x M pairs.
        let spec = SyntheticSpec {
            num_source_classes: 8,
            num_target_classes: 8,
            feature_dim: 6,
            samples_per_source_class: 40,
            samples_per_target_class: 20,
            class_separation: 10.0,
            target_perturbation: 1.0,
            noise_scale: 0.5,
            ground_truth_map: vec![3, 0, 7, 1, 5, 2, 6, 4],
            seed: 11,
        };
        let (source, target) = generate_synthetic(&spec).unwrap();
        let sm = empirical_class_means(&source);
        let tm = empirical_class_means(&target);
        for (q, t_mean) in tm.iter().enumerate() {
            let nearest = sm
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    euclidean(t_mean, a).partial_cmp(&euclidean(t_mean, b)).unwrap()
                })
                .unwrap()
                .0;
            assert_eq!(nearest, spec.ground_truth_map[q], "target class {q}");
        }
    }

    #[test]
    fn rejects_more_targets_than_sources() {
        let mut spec = small_spec();
        spec.num_target_classes = 4;
        spec.ground_truth_map = vec![0, 1, 2, 0];
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn rejects_large_perturbation() {
        let mut spec = small_spec();
        spec.target_perturbation = spec.class_separation / 2.0;
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn roundtrip_through_file() {
        let spec = small_spec();
        let (source, _) = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("source.ds");
        write_dataset(&source, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.class_names, source.class_names);
        assert_eq!(loaded.feature_dim, source.feature_dim);
        assert_eq!(loaded.sequence_length, None);
        assert_eq!(loaded.samples.len(), source.samples.len());
        for (a, b) in loaded.samples.iter().zip(&source.samples) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.values.iter().zip(&b.values) {
                let rel = (x - y).abs() / y.abs().max(1e-12);
                assert!(rel < 1e-7, "serialization precision: {x} vs {y}");
            }
        }
    }

    #[test]
    fn repeated_writes_are_byte_identical() {
        let (source, _) = generate_synthetic(&small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ds");
        let p2 = dir.path().join("b.ds");
        write_dataset(&source, &p1).unwrap();
        write_dataset(&source, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn sequence_roundtrip() {
        let bench = generate_sequence_benchmark(&SequenceSpec {
            num_classes: 2,
            feature_dim: 3,
            flat_samples_per_class: 4,
            sequences_per_class: 3,
            sequence_length: 6,
            span_length: 2,
            span_alignment: 1,
            class_separation: 6.0,
            noise_scale: 0.4,
            seed: 3,
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.ds");
        write_dataset(&bench.sequences, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.sequence_length, Some(6));
        assert_eq!(loaded.samples.len(), bench.sequences.samples.len());
        assert_eq!(loaded.sample_len(), 18);
    }

    #[test]
    fn load_reports_malformed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ds");
        std::fs::write(&path, "names: a,b\ndim: 2\n0|1.0,2.0\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("classes:"), "{err}");

        std::fs::write(&path, "classes: a,b\nsize: 2\n0|1.0,2.0\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn load_reports_bad_label_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ds");
        std::fs::write(&path, "classes: a,b\ndim: 2\n0|1.0,2.0\n5|1.0,2.0\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("label 5"), "{msg}");
    }

    #[test]
    fn load_reports_dimension_mismatch_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ds");
        std::fs::write(&path, "classes: a,b\ndim: 2\n0|1.0,2.0\n1|1.0,2.0,3.0\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4"), "{msg}");
        assert!(msg.contains("expected 2"), "{msg}");
    }

    #[test]
    fn write_rejects_empty_class() {
        let ds = LabeledDataset {
            class_names: vec!["a".into(), "b".into()],
            samples: vec![Sample { values: vec![1.0, 2.0], label: 0 }],
            feature_dim: 2,
            sequence_length: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let err = write_dataset(&ds, &dir.path().join("x.ds")).unwrap_err();
        assert!(err.to_string().contains("has no samples"));
    }

    #[test]
    fn split_counts_and_union() {
        let spec = SyntheticSpec {
            samples_per_target_class: 10,
            ..small_spec()
        };
        let (_, target) = generate_synthetic(&spec).unwrap();
        let (train, test) = split_dataset(&target, 0.5, 4).unwrap();
        assert_eq!(train.class_counts(), vec![5, 5]);
        assert_eq!(test.class_counts(), vec![5, 5]);

        // Set-equality oracle: union of halves equals the original multiset.
        let key = |s: &Sample| {
            let bits: Vec<u64> = s.values.iter().map(|v| v.to_bits()).collect();
            (s.label, bits)
        };
        let mut all: Vec<_> = target.samples.iter().map(key).collect();
        let mut joined: Vec<_> = train.samples.iter().chain(&test.samples).map(key).collect();
        all.sort();
        joined.sort();
        assert_eq!(all, joined);

        let (train2, test2) = split_dataset(&target, 0.5, 4).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
    }

    #[test]
    fn split_rejects_single_sample_class() {
        let ds = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![
                Sample { values: vec![0.0], label: 0 },
                Sample { values: vec![1.0], label: 0 },
                Sample { values: vec![2.0], label: 1 },
            ],
            1,
            None,
        )
        .unwrap();
        assert!(split_dataset(&ds, 0.5, 0).is_err());
    }

    #[test]
    fn split_rejects_fraction_that_empties_test() {
        let (_, target) = generate_synthetic(&small_spec()).unwrap();
        // 5 samples per class, ceil(0.9 * 5) = 5 -> empty test class.
        assert!(split_dataset(&target, 0.9, 0).is_err());
    }

    #[test]
    fn sequence_offsets_are_aligned_and_in_range() {
        let spec = SequenceSpec {
            num_classes: 3,
            feature_dim: 4,
            flat_samples_per_class: 5,
            sequences_per_class: 10,
            sequence_length: 12,
            span_length: 4,
            span_alignment: 2,
            class_separation: 8.0,
            noise_scale: 0.5,
            seed: 9,
        };
        let bench = generate_sequence_benchmark(&spec).unwrap();
        assert_eq!(bench.true_offsets.len(), 30);
        for &off in &bench.true_offsets {
            assert!(off <= spec.sequence_length - spec.span_length);
            assert_eq!(off % spec.span_alignment, 0);
        }
        // Re-run is identical.
        let again = generate_sequence_benchmark(&spec).unwrap();
        assert_eq!(again.true_offsets, bench.true_offsets);
        assert_eq!(again.sequences, bench.sequences);
    }

    #[test]
    fn map_sidecar_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.csv");
        let names_t: Vec<String> = vec!["t0".into(), "t1".into()];
        let names_s: Vec<String> = vec!["s0".into(), "s1".into(), "s2".into()];
        write_map_sidecar(&[2, 0], &names_t, &names_s, &path).unwrap();
        assert_eq!(load_map_sidecar(&path).unwrap(), vec![2, 0]);
    }
}
