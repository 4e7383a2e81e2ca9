//! Posterior-likelihood class matching between a large source dataset and the
//! classes of a scarce target dataset, its argmax-count approximation, ranked
//! reporting, overlapping-window trimming of sequence samples, and relabeling
//! of matched source samples for augmentation.
//!
//! Matching scores a source class by running its samples through a classifier
//! trained on the target data: either the summed log posterior of a fixed
//! target class, or how often the samples' argmax lands on that class.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, ClassifierModel};
use crate::dataset::{pool_frames, LabeledDataset, Sample};
use crate::error::{Error, Result};

/// Per-sample probabilities below this are clamped before the log; the raw
/// probability product underflows for modest sample counts.
const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    /// Argmax-count approximation (default).
    Count,
    /// Exact summed log posterior.
    Likelihood,
}

impl std::str::FromStr for MatchMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(MatchMethod::Count),
            "likelihood" => Ok(MatchMethod::Likelihood),
            other => Err(Error::InvalidInput(format!(
                "unknown match method {other:?} (expected `count` or `likelihood`)"
            ))),
        }
    }
}

impl std::fmt::Display for MatchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchMethod::Count => "count",
            MatchMethod::Likelihood => "likelihood",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Samples drawn per source class (`l`).
    pub samples_per_class: usize,
    pub method: MatchMethod,
    pub seed: u64,
}

/// Score of one (target class, source class) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchScore {
    pub target_class: usize,
    pub source_class: usize,
    /// Sum over samples of the clamped log posterior of the target class.
    pub log_likelihood: f64,
    /// How many of the samples had this target class as their argmax.
    pub argmax_count: usize,
    pub samples_used: usize,
    pub mean_target_prob: f64,
}

/// Full ranking of source classes for every target class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeMatchReport {
    pub target_classes: Vec<String>,
    pub source_classes: Vec<String>,
    /// `rankings[q]` lists all source classes, best first.
    pub rankings: Vec<Vec<MatchScore>>,
    /// `matched[q]` is the top-ranked source class for target class `q`.
    pub matched: Vec<usize>,
    pub method: MatchMethod,
    pub warnings: Vec<String>,
}

/// Summed log posterior of `target_class` over the given feature vectors:
/// the joint likelihood of observing that class on every sample, computed in
/// log space with probabilities clamped at 1e-300 before the log.
pub fn class_log_likelihood(
    model: &ClassifierModel,
    samples: &[Vec<f64>],
    target_class: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "class likelihood needs at least one sample".into(),
        ));
    }
    if target_class >= model.num_classes() {
        return Err(Error::InvalidInput(format!(
            "target class {target_class} out of range ({})",
            model.num_classes()
        )));
    }
    let mut total = 0.0;
    for x in samples {
        let f = model.forward(x)?;
        total += f.probs[target_class].max(PROB_FLOOR).ln();
    }
    Ok(total)
}

/// Order source classes for one target class: primary key per method,
/// then higher mean probability, then lower source index.
fn rank_scores(scores: &mut [MatchScore], method: MatchMethod) {
    scores.sort_by(|a, b| {
        let primary = match method {
            MatchMethod::Count => b.argmax_count.cmp(&a.argmax_count),
            MatchMethod::Likelihood => b
                .log_likelihood
                .partial_cmp(&a.log_likelihood)
                .expect("log likelihoods are finite"),
        };
        primary
            .then_with(|| {
                b.mean_target_prob
                    .partial_cmp(&a.mean_target_prob)
                    .expect("probabilities are finite")
            })
            .then_with(|| a.source_class.cmp(&b.source_class))
    });
}

/// Match every target class to its best source class under `model` (a
/// classifier over the target classes). Subsamples `cfg.samples_per_class`
/// samples of each source class, seeded. Deterministic.
pub fn match_modes(
    model: &ClassifierModel,
    source: &LabeledDataset,
    target_classes: &[String],
    cfg: &MatchConfig,
) -> Result<ModeMatchReport> {
    let m = target_classes.len();
    if m == 0 {
        return Err(Error::InvalidInput("no target classes".into()));
    }
    if model.num_classes() != m {
        return Err(Error::ShapeMismatch(format!(
            "model outputs {} classes but {m} target classes were given",
            model.num_classes()
        )));
    }
    if source.feature_dim != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "source feature_dim {} vs model input {}",
            source.feature_dim,
            model.input_dim()
        )));
    }
    let l = cfg.samples_per_class;
    if l == 0 {
        return Err(Error::InvalidInput("samples_per_class must be positive".into()));
    }
    let counts = source.class_counts();
    if let Some((p, &c)) = counts.iter().enumerate().find(|(_, &c)| c < l) {
        return Err(Error::InvalidInput(format!(
            "source class {p} ({}) has {c} samples, fewer than l={l}",
            source.class_names[p]
        )));
    }

    let n = source.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // scores[q][p]
    let mut scores: Vec<Vec<MatchScore>> = (0..m)
        .map(|q| {
            (0..n)
                .map(|p| MatchScore {
                    target_class: q,
                    source_class: p,
                    log_likelihood: 0.0,
                    argmax_count: 0,
                    samples_used: l,
                    mean_target_prob: 0.0,
                })
                .collect()
        })
        .collect();

    for p in 0..n {
        let mut ids = source.class_sample_ids(p);
        ids.shuffle(&mut rng);
        for &i in &ids[..l] {
            let f = model.forward(&source.flat_features(i))?;
            let winner = argmax(&f.probs);
            for q in 0..m {
                let s = &mut scores[q][p];
                s.log_likelihood += f.probs[q].max(PROB_FLOOR).ln();
                s.mean_target_prob += f.probs[q];
                if winner == q {
                    s.argmax_count += 1;
                }
            }
        }
        for q in 0..m {
            scores[q][p].mean_target_prob /= l as f64;
        }
    }

    let mut warnings = Vec::new();
    let mut rankings = Vec::with_capacity(m);
    for (q, mut row) in scores.into_iter().enumerate() {
        let mut method = cfg.method;
        if method == MatchMethod::Count && row.iter().all(|s| s.argmax_count == 0) {
            warnings.push(format!(
                "target class {q} ({}): no source sample classified as it; falling back to likelihood ranking",
                target_classes[q]
            ));
            method = MatchMethod::Likelihood;
        }
        rank_scores(&mut row, method);
        rankings.push(row);
    }
    let matched: Vec<usize> = rankings.iter().map(|r| r[0].source_class).collect();

    let mut seen: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (q, &p) in matched.iter().enumerate() {
        seen.entry(p).or_default().push(q);
    }
    for (p, qs) in seen.iter().filter(|(_, qs)| qs.len() > 1) {
        warnings.push(format!(
            "source class {p} ({}) matched by {} target classes: {qs:?}",
            source.class_names[*p],
            qs.len()
        ));
    }

    Ok(ModeMatchReport {
        target_classes: target_classes.to_vec(),
        source_classes: source.class_names.clone(),
        rankings,
        matched,
        method: cfg.method,
        warnings,
    })
}

/// The rank-2 source class for a target class.
pub fn second_best(report: &ModeMatchReport, target_class: usize) -> Result<usize> {
    let ranking = report
        .rankings
        .get(target_class)
        .ok_or_else(|| Error::InvalidInput(format!("no ranking for target class {target_class}")))?;
    if ranking.len() < 2 {
        return Err(Error::InvalidInput(
            "second-best needs at least 2 ranked source classes".into(),
        ));
    }
    Ok(ranking[1].source_class)
}

impl ModeMatchReport {
    /// `target -> source` class-name pairs in target order.
    pub fn matched_names(&self) -> Vec<(String, String)> {
        self.matched
            .iter()
            .enumerate()
            .map(|(q, &p)| (self.target_classes[q].clone(), self.source_classes[p].clone()))
            .collect()
    }

    /// Flat text table: `target_class,rank,source_class,log_likelihood,argmax_count,mean_prob`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("target_class,rank,source_class,log_likelihood,argmax_count,mean_prob\n");
        for ranking in &self.rankings {
            for (rank, s) in ranking.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{:.6},{},{:.6}\n",
                    s.target_class, rank, s.source_class, s.log_likelihood, s.argmax_count,
                    s.mean_target_prob
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

// ---------------------------------------------------------------------------
// Overlapping-window trimming
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrimmedWindow {
    /// Frame offset where the chosen window starts.
    pub offset: usize,
    /// The window's frames, flattened (`window * feature_dim` values).
    pub values: Vec<f64>,
}

/// Slide a `window`-frame window with the given stride over a sequence
/// (candidate offsets are the multiples of `stride`, plus `T - window` so the
/// tail is always covered) and return the window whose mean-pooled features
/// score highest for `target_class` under the model. Earliest offset wins
/// ties.
pub fn trim_sequence(
    model: &ClassifierModel,
    sequence: &[f64],
    feature_dim: usize,
    target_class: usize,
    window: usize,
    stride: usize,
) -> Result<TrimmedWindow> {
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be positive".into()));
    }
    if feature_dim == 0 || sequence.len() % feature_dim != 0 {
        return Err(Error::ShapeMismatch(format!(
            "sequence length {} is not a multiple of feature_dim {feature_dim}",
            sequence.len()
        )));
    }
    if feature_dim != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "feature_dim {feature_dim} vs model input {}",
            model.input_dim()
        )));
    }
    if target_class >= model.num_classes() {
        return Err(Error::InvalidInput(format!(
            "target class {target_class} out of range ({})",
            model.num_classes()
        )));
    }
    let t = sequence.len() / feature_dim;
    if window == 0 || window > t {
        return Err(Error::InvalidInput(format!(
            "window {window} must be in 1..={t} (sequence length)"
        )));
    }

    let mut offsets: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|&o| o + window <= t)
        .collect();
    if *offsets.last().unwrap() != t - window {
        offsets.push(t - window);
    }

    let mut best: Option<(usize, f64)> = None;
    for &o in &offsets {
        let slice = &sequence[o * feature_dim..(o + window) * feature_dim];
        let pooled = pool_frames(slice, feature_dim, window);
        let score = model.forward(&pooled)?.probs[target_class];
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((o, score));
        }
    }
    let (offset, _) = best.expect("at least one candidate offset");
    Ok(TrimmedWindow {
        offset,
        values: sequence[offset * feature_dim..(offset + window) * feature_dim].to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Relabeling for augmentation
// ---------------------------------------------------------------------------

/// A relabeled draw from the source, plus the source sample ids it used.
#[derive(Debug, Clone)]
pub struct Relabeled {
    pub data: LabeledDataset,
    pub used_ids: Vec<usize>,
}

/// Draw `per_class_budget` unused samples from `map[q]` for every target
/// class `q` and relabel them `q`. Classes are processed in target order and
/// a sample picked for an earlier class is excluded from later pools, so the
/// returned ids are distinct even when the map collides.
pub fn relabel_with_map(
    source: &LabeledDataset,
    map: &[usize],
    target_class_names: &[String],
    per_class_budget: usize,
    exclude: &HashSet<usize>,
    seed: u64,
) -> Result<Relabeled> {
    if map.len() != target_class_names.len() {
        return Err(Error::ShapeMismatch(format!(
            "map has {} entries for {} target classes",
            map.len(),
            target_class_names.len()
        )));
    }
    if per_class_budget == 0 {
        return Err(Error::InvalidInput("per_class_budget must be positive".into()));
    }
    if let Some(&bad) = map.iter().find(|&&p| p >= source.num_classes()) {
        return Err(Error::InvalidInput(format!(
            "map entry {bad} is not a source class (< {})",
            source.num_classes()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = exclude.clone();
    let mut samples = Vec::with_capacity(map.len() * per_class_budget);
    let mut used_ids = Vec::with_capacity(map.len() * per_class_budget);
    for (q, &p) in map.iter().enumerate() {
        let mut pool: Vec<usize> = source
            .class_sample_ids(p)
            .into_iter()
            .filter(|i| !taken.contains(i))
            .collect();
        if pool.len() < per_class_budget {
            return Err(Error::BudgetExhausted {
                class: q,
                round: 0,
                needed: per_class_budget,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        for &i in &pool[..per_class_budget] {
            samples.push(Sample {
                values: source.samples[i].values.clone(),
                label: q,
            });
            used_ids.push(i);
            taken.insert(i);
        }
    }
    Ok(Relabeled {
        data: LabeledDataset::new(
            target_class_names.to_vec(),
            samples,
            source.feature_dim,
            source.sequence_length,
        )?,
        used_ids,
    })
}

/// Relabel using the report's matched map and target class names.
pub fn relabel_matched(
    source: &LabeledDataset,
    report: &ModeMatchReport,
    per_class_budget: usize,
    exclude: &HashSet<usize>,
    seed: u64,
) -> Result<Relabeled> {
    relabel_with_map(
        source,
        &report.matched,
        &report.target_classes,
        per_class_budget,
        exclude,
        seed,
    )
}
