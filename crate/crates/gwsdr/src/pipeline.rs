//! The full method, end to end: baseline training on the scarce target data,
//! mode matching, reference-classifier training on the matched source
//! classes, relabeling/augmentation, and retraining (optionally with the
//! directional penalty), over one or more augmentation rounds. Sweep runners
//! emit flat CSV rows plus one JSON report per pipeline run.
//!
//! Every comparison a sweep produces is paired: variants within a cell share
//! one master seed, from which all component seeds are derived.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    embed_dataset, evaluate, separability_score, train, ClassifierModel, TrainConfig,
};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::matching::{
    match_modes, relabel_with_map, second_best, trim_sequence, MatchConfig, ModeMatchReport,
};

/// SplitMix64-style mixing for deriving independent sub-seeds from a master
/// seed and a stream id.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimConfig {
    pub window: usize,
    pub stride: usize,
}

/// Which source class feeds each target class's augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentFrom {
    /// The top-ranked match.
    Matched,
    /// The rank-2 match.
    SecondBest,
    /// A uniformly random source class different from the match
    /// (the no-guidance control).
    RandomUnmatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Hidden width of the d -> h -> C classifiers.
    pub hidden_size: usize,
    pub baseline: TrainConfig,
    pub source: TrainConfig,
    pub retrain: TrainConfig,
    pub match_cfg: MatchConfig,
    /// Samples added per target class per round.
    pub augment_budget: usize,
    pub augment_seed: u64,
    pub iterations: usize,
    pub use_dr: bool,
    pub augment_from: AugmentFrom,
    pub trim: Option<TrimConfig>,
    /// Fraction of the relabeled source set held out to measure the
    /// reference classifier's generalization.
    pub source_holdout_fraction: f64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::InvalidInput("hidden_size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if self.augment_budget == 0 {
            return Err(Error::InvalidInput("augment_budget must be at least 1".into()));
        }
        if self.use_dr && (self.retrain.dr_weight <= 0.0 || self.retrain.dr_rank.is_none()) {
            return Err(Error::InvalidInput(
                "use_dr requires retrain.dr_weight > 0 and retrain.dr_rank".into(),
            ));
        }
        if !(self.source_holdout_fraction > 0.0 && self.source_holdout_fraction < 1.0) {
            return Err(Error::InvalidInput(
                "source_holdout_fraction must be in (0,1)".into(),
            ));
        }
        if let Some(trim) = &self.trim {
            if trim.window == 0 || trim.stride == 0 {
                return Err(Error::InvalidInput("trim window and stride must be positive".into()));
            }
        }
        Ok(())
    }

    /// Derive every component seed from one master seed (paired-seed
    /// discipline for sweeps).
    pub fn with_master_seed(mut self, master: u64) -> Self {
        self.baseline.seed = mix_seed(master, 1);
        self.source.seed = mix_seed(master, 2);
        self.retrain.seed = mix_seed(master, 3);
        self.match_cfg.seed = mix_seed(master, 4);
        self.augment_seed = mix_seed(master, 5);
        self
    }
}

/// One augmentation round's measurements and sample ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub accuracy: f64,
    pub separability_before: f64,
    pub separability_after: f64,
    pub epoch_loss: Vec<f64>,
    pub dr_steps: usize,
    pub dr_skipped: usize,
    /// Source sample ids consumed this round; disjoint across rounds.
    pub used_ids: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub baseline_model: ClassifierModel,
    /// The reference classifier trained on the augmentation source classes.
    pub source_model: ClassifierModel,
    pub final_model: ClassifierModel,
    pub report: ModeMatchReport,
    pub baseline_accuracy: f64,
    pub baseline_separability: f64,
    pub source_holdout_accuracy: f64,
    /// The map actually used for augmentation (matched, second-best, or the
    /// random control).
    pub augment_map: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub warnings: Vec<String>,
}

impl PipelineResult {
    pub fn final_accuracy(&self) -> f64 {
        self.rounds.last().map_or(self.baseline_accuracy, |r| r.accuracy)
    }

    pub fn final_separability(&self) -> f64 {
        self.rounds
            .last()
            .map_or(self.baseline_separability, |r| r.separability_after)
    }
}

/// Dataset paths plus the configuration: everything needed to reproduce a
/// run, echoed verbatim into its JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRunSpec {
    pub source_path: String,
    pub target_train_path: String,
    pub target_test_path: String,
    pub config: PipelineConfig,
}

/// The serializable face of a pipeline run (models are exported separately).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub run: PipelineRunSpec,
    pub baseline_accuracy: f64,
    pub baseline_separability: f64,
    pub source_holdout_accuracy: f64,
    pub final_accuracy: f64,
    pub final_separability: f64,
    pub matched_names: Vec<(String, String)>,
    pub augment_map: Vec<usize>,
    pub matching: ModeMatchReport,
    pub rounds: Vec<RoundRecord>,
    pub warnings: Vec<String>,
}

impl PipelineResult {
    pub fn to_report(&self, run: PipelineRunSpec) -> PipelineReport {
        PipelineReport {
            run,
            baseline_accuracy: self.baseline_accuracy,
            baseline_separability: self.baseline_separability,
            source_holdout_accuracy: self.source_holdout_accuracy,
            final_accuracy: self.final_accuracy(),
            final_separability: self.final_separability(),
            matched_names: self.report.matched_names(),
            augment_map: self.augment_map.clone(),
            matching: self.report.clone(),
            rounds: self.rounds.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Everything needed to reproduce a sweep, echoed into its summary JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRunSpec {
    /// `augment` or `iterate`.
    pub kind: String,
    pub source_path: String,
    pub target_train_path: String,
    pub target_test_path: String,
    pub config: PipelineConfig,
    /// Augment sweeps only.
    pub fractions: Vec<f64>,
    /// Iterate sweeps only.
    pub max_iterations: usize,
    pub seeds: Vec<u64>,
    pub include_random: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub run: SweepRunSpec,
    pub warnings: Vec<String>,
}

/// Canonical JSON encoding used for every exported report; reruns compare
/// against these bytes.
pub fn to_json_string<T: serde::Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("reports are serializable");
    out.push('\n');
    out
}

/// The reference classifier plus its held-out accuracy on the relabeled
/// source classes.
#[derive(Debug, Clone)]
pub struct SourceClassifier {
    pub model: ClassifierModel,
    pub holdout_accuracy: f64,
    pub warnings: Vec<String>,
}

/// Relabel *all* samples of each mapped source class with the target label
/// (colliding maps duplicate a source class under two labels, with a
/// diagnostic), split off a held-out part, and train a classifier with the
/// same architecture as the target model on the rest.
fn train_source_on_map(
    source: &LabeledDataset,
    map: &[usize],
    target_names: &[String],
    init: &ClassifierModel,
    cfg: &TrainConfig,
    holdout_fraction: f64,
) -> Result<SourceClassifier> {
    let mut warnings = Vec::new();
    let mut collisions: std::collections::BTreeMap<usize, usize> = Default::default();
    for &p in map {
        *collisions.entry(p).or_insert(0) += 1;
    }
    for (p, n) in collisions.iter().filter(|(_, &n)| n > 1) {
        warnings.push(format!(
            "source class {p} ({}) is duplicated under {n} target labels for reference training",
            source.class_names[*p]
        ));
    }

    let mut samples = Vec::new();
    for (q, &p) in map.iter().enumerate() {
        for i in source.class_sample_ids(p) {
            samples.push(crate::dataset::Sample {
                values: source.flat_features(i),
                label: q,
            });
        }
    }
    let relabeled = LabeledDataset::new(
        target_names.to_vec(),
        samples,
        source.feature_dim,
        None,
    )?;
    let (train_part, holdout) =
        crate::dataset::split_dataset(&relabeled, 1.0 - holdout_fraction, mix_seed(cfg.seed, 6))?;

    let mut ce_cfg = cfg.clone();
    ce_cfg.dr_weight = 0.0;
    let (model, _) = train(init, &train_part, &ce_cfg, None)?;
    let holdout_accuracy = evaluate(&model, &holdout)?.accuracy;
    Ok(SourceClassifier {
        model,
        holdout_accuracy,
        warnings,
    })
}

/// Train the reference classifier on the report's matched classes.
pub fn train_source_classifier(
    source: &LabeledDataset,
    report: &ModeMatchReport,
    init: &ClassifierModel,
    cfg: &TrainConfig,
    holdout_fraction: f64,
) -> Result<SourceClassifier> {
    train_source_on_map(
        source,
        &report.matched,
        &report.target_classes,
        init,
        cfg,
        holdout_fraction,
    )
}

/// Trim (or mean-pool) relabeled sequence samples into flat vectors using the
/// baseline model; flat samples pass through unchanged.
fn flatten_augmented(
    scorer: &ClassifierModel,
    relabeled: &LabeledDataset,
    trim: &Option<TrimConfig>,
) -> Result<LabeledDataset> {
    if relabeled.sequence_length.is_none() {
        return Ok(relabeled.clone());
    }
    let d = relabeled.feature_dim;
    let mut samples = Vec::with_capacity(relabeled.samples.len());
    for (i, s) in relabeled.samples.iter().enumerate() {
        let values = match trim {
            Some(t) => {
                let window = trim_sequence(scorer, &s.values, d, s.label, t.window, t.stride)?;
                crate::dataset::pool_frames(&window.values, d, t.window)
            }
            None => relabeled.flat_features(i),
        };
        samples.push(crate::dataset::Sample { values, label: s.label });
    }
    LabeledDataset::new(relabeled.class_names.clone(), samples, d, None)
}

/// Run the whole method. See the module docs for the stages; all randomness
/// flows from the seeds in `cfg`.
pub fn run_pipeline(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_test: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    cfg.validate()?;
    if target_train.class_names != target_test.class_names {
        return Err(Error::ShapeMismatch(
            "target train and test parts must share class names".into(),
        ));
    }
    if target_train.is_sequence() || target_test.is_sequence() {
        return Err(Error::ShapeMismatch(
            "target datasets must hold flat feature vectors".into(),
        ));
    }
    if source.feature_dim != target_train.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "source feature_dim {} vs target {}",
            source.feature_dim, target_train.feature_dim
        )));
    }

    let mut warnings = Vec::new();
    let target_counts = target_train.class_counts();
    let source_counts = source.class_counts();
    let max_target = *target_counts.iter().max().unwrap();
    let min_source = *source_counts.iter().min().unwrap();
    if max_target > 10 * min_source {
        warnings.push(format!(
            "target training data is not scarce relative to the source \
             (largest target class {max_target} vs smallest source class {min_source})"
        ));
    }

    let m = target_train.num_classes();
    let layer_sizes = [target_train.feature_dim, cfg.hidden_size, m];

    // (1) Baseline classifier on the scarce target data, plain CE.
    let init = ClassifierModel::new(&layer_sizes, cfg.baseline.seed)?;
    let mut baseline_cfg = cfg.baseline.clone();
    baseline_cfg.dr_weight = 0.0;
    let (baseline_model, _) = train(&init, target_train, &baseline_cfg, None)?;
    let baseline_accuracy = evaluate(&baseline_model, target_test)?.accuracy;
    let baseline_separability = separability_score(&embed_dataset(&baseline_model, target_test)?)?;

    // (2) Mode matching under the baseline model.
    let report = match_modes(&baseline_model, source, &target_train.class_names, &cfg.match_cfg)?;
    warnings.extend(report.warnings.iter().cloned());

    let augment_map: Vec<usize> = match cfg.augment_from {
        AugmentFrom::Matched => report.matched.clone(),
        AugmentFrom::SecondBest => (0..m)
            .map(|q| second_best(&report, q))
            .collect::<Result<_>>()?,
        AugmentFrom::RandomUnmatched => {
            let n = source.num_classes();
            if n < 2 {
                return Err(Error::InvalidInput(
                    "the random-augmentation control needs at least 2 source classes".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.augment_seed, 97));
            report
                .matched
                .iter()
                .map(|&matched| loop {
                    let p = rng.random_range(0..n);
                    if p != matched {
                        break p;
                    }
                })
                .collect()
        }
    };

    // (3) Reference classifier on the augmentation source classes.
    // Warm-started from the baseline model: the reference then refines the
    // target model's own structure with abundant source data, and the
    // penalty's pull is toward a nearby, better-generalizing configuration.
    let source_classifier = train_source_on_map(
        source,
        &augment_map,
        &target_train.class_names,
        &baseline_model,
        &cfg.source,
        cfg.source_holdout_fraction,
    )?;
    warnings.extend(source_classifier.warnings.iter().cloned());

    // (4) Augment and retrain, warm-starting each round from the previous
    // model; used source samples are excluded from later rounds.
    let mut retrain_cfg = cfg.retrain.clone();
    if !cfg.use_dr {
        retrain_cfg.dr_weight = 0.0;
    }
    let dr_ref = cfg.use_dr.then_some(&source_classifier.model);
    let mut model = baseline_model.clone();
    let mut excluded: HashSet<usize> = HashSet::new();
    let mut rounds = Vec::with_capacity(cfg.iterations);
    for round in 0..cfg.iterations {
        let relabeled = relabel_with_map(
            source,
            &augment_map,
            &target_train.class_names,
            cfg.augment_budget,
            &excluded,
            mix_seed(cfg.augment_seed, round as u64),
        )
        .map_err(|e| match e {
            Error::BudgetExhausted { class, needed, available, .. } => Error::BudgetExhausted {
                class,
                round,
                needed,
                available,
            },
            other => other,
        })?;
        let augmented = flatten_augmented(&baseline_model, &relabeled.data, &cfg.trim)?;
        let train_data = target_train.merged_with(&augmented)?;

        let separability_before = separability_score(&embed_dataset(&model, target_test)?)?;
        let (next, trace) = train(&model, &train_data, &retrain_cfg, dr_ref)?;
        model = next;
        let accuracy = evaluate(&model, target_test)?.accuracy;
        let separability_after = separability_score(&embed_dataset(&model, target_test)?)?;
        rounds.push(RoundRecord {
            round,
            accuracy,
            separability_before,
            separability_after,
            epoch_loss: trace.epoch_loss,
            dr_steps: trace.dr_steps,
            dr_skipped: trace.dr_skipped,
            used_ids: relabeled.used_ids.clone(),
        });
        excluded.extend(relabeled.used_ids);
    }

    Ok(PipelineResult {
        baseline_model,
        source_model: source_classifier.model,
        final_model: model,
        report,
        baseline_accuracy,
        baseline_separability,
        source_holdout_accuracy: source_classifier.holdout_accuracy,
        augment_map,
        rounds,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One CSV row: `variant,fraction_or_iter,seed,accuracy,separability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub fraction_or_iter: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub separability: f64,
}

pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("variant,fraction_or_iter,seed,accuracy,separability\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            r.variant, r.fraction_or_iter, r.seed, r.accuracy, r.separability
        ));
    }
    out
}

pub fn parse_sweep_csv(text: &str, path: &Path) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "variant,fraction_or_iter,seed,accuracy,separability")) => {}
        _ => return Err(Error::parse(path, 1, "bad or missing sweep CSV header")),
    }
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::parse(path, idx + 1, "expected 5 columns"));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, idx + 1, format!("bad number {s:?}")))
        };
        rows.push(SweepRow {
            variant: cols[0].to_string(),
            fraction_or_iter: parse(cols[1])?,
            seed: cols[2]
                .parse()
                .map_err(|_| Error::parse(path, idx + 1, format!("bad seed {:?}", cols[2])))?,
            accuracy: parse(cols[3])?,
            separability: parse(cols[4])?,
        });
    }
    Ok(rows)
}

/// A finished pipeline cell, keyed for per-run JSON export.
#[derive(Debug, Clone)]
pub struct SweepCell {
    /// e.g. `gws_x0.5_s3` or `gws_dr_iter_s3`.
    pub key: String,
    pub result: PipelineResult,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
    pub warnings: Vec<String>,
}

fn run_cells<T, F>(tasks: Vec<T>, workers: usize, f: F) -> Result<Vec<(Vec<SweepRow>, Vec<SweepCell>)>>
where
    T: Send + Sync,
    F: Fn(&T) -> Result<(Vec<SweepRow>, Vec<SweepCell>)> + Sync + Send,
{
    if workers > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidInput(format!("could not build worker pool: {e}")))?;
        // Parallel cells, order-preserving collect: output is deterministic.
        pool.install(|| tasks.par_iter().map(&f).collect())
    } else {
        tasks.iter().map(&f).collect()
    }
}

/// Per-class budget for a fraction of the target training set.
fn budget_for(fraction: f64, target_train: &LabeledDataset) -> Result<usize> {
    let m = target_train.num_classes() as f64;
    let budget = (fraction * target_train.samples.len() as f64 / m).round() as usize;
    if budget == 0 {
        return Err(Error::InvalidInput(format!(
            "fraction {fraction} maps to a zero per-class budget"
        )));
    }
    Ok(budget)
}

/// Accuracy versus augmentation amount. For every (fraction, seed) cell the
/// three guided variants run with identical derived seeds, and the baseline
/// row is read off the GWS run's first stage. `include_random` adds the
/// random-augmentation control.
pub fn augmentation_sweep(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_test: &LabeledDataset,
    base: &PipelineConfig,
    fractions: &[f64],
    seeds: &[u64],
    include_random: bool,
    workers: usize,
) -> Result<SweepOutcome> {
    if fractions.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidInput("fractions and seeds must be non-empty".into()));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("fractions must be strictly ascending".into()));
    }
    let budgets: Vec<usize> = fractions
        .iter()
        .map(|&f| budget_for(f, target_train))
        .collect::<Result<_>>()?;

    let tasks: Vec<(f64, usize, u64)> = fractions
        .iter()
        .zip(&budgets)
        .flat_map(|(&f, &b)| seeds.iter().map(move |&s| (f, b, s)))
        .collect();

    let per_cell = run_cells(tasks, workers, |&(fraction, budget, seed)| {
        let mut cfg = base.clone().with_master_seed(seed);
        cfg.augment_budget = budget;
        cfg.iterations = 1;

        let run_variant = |variant: &str, use_dr: bool, from: AugmentFrom| {
            let mut vcfg = cfg.clone();
            vcfg.use_dr = use_dr;
            vcfg.augment_from = from;
            let result = run_pipeline(source, target_train, target_test, &vcfg)?;
            let row = SweepRow {
                variant: variant.to_string(),
                fraction_or_iter: fraction,
                seed,
                accuracy: result.final_accuracy(),
                separability: result.final_separability(),
            };
            let cell = SweepCell {
                key: format!("{variant}_x{fraction}_s{seed}"),
                result,
            };
            Ok((row, cell))
        };

        let mut rows = Vec::new();
        let mut cells = Vec::new();
        let (gws_row, gws_cell) = run_variant("gws", false, AugmentFrom::Matched)?;
        // The baseline stage is identical across variants of this cell.
        rows.push(SweepRow {
            variant: "baseline".to_string(),
            fraction_or_iter: fraction,
            seed,
            accuracy: gws_cell.result.baseline_accuracy,
            separability: gws_cell.result.baseline_separability,
        });
        rows.push(gws_row);
        cells.push(gws_cell);
        let (row, cell) = run_variant("gws_dr", true, AugmentFrom::Matched)?;
        rows.push(row);
        cells.push(cell);
        if include_random {
            let (row, cell) = run_variant("random", false, AugmentFrom::RandomUnmatched)?;
            rows.push(row);
            cells.push(cell);
        }
        Ok((rows, cells))
    })?;

    let mut outcome = SweepOutcome {
        rows: Vec::new(),
        cells: Vec::new(),
        warnings: Vec::new(),
    };
    for (rows, cells) in per_cell {
        for c in &cells {
            outcome
                .warnings
                .extend(c.result.warnings.iter().map(|w| format!("{}: {w}", c.key)));
        }
        outcome.rows.extend(rows);
        outcome.cells.extend(cells);
    }
    Ok(outcome)
}

/// Accuracy versus augmentation round with fixed modes and fresh samples in
/// every round. Emits the baseline as iteration 0 and one row per round per
/// variant. The feasible round count is bounded by the smallest source class
/// divided by the budget; the sweep truncates to it with a warning.
pub fn iteration_sweep(
    source: &LabeledDataset,
    target_train: &LabeledDataset,
    target_test: &LabeledDataset,
    base: &PipelineConfig,
    max_iterations: usize,
    seeds: &[u64],
    workers: usize,
) -> Result<SweepOutcome> {
    if max_iterations == 0 || seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one iteration and one seed".into()));
    }
    let min_source = *source.class_counts().iter().min().unwrap();
    let feasible = min_source / base.augment_budget;
    if feasible == 0 {
        return Err(Error::InvalidInput(format!(
            "budget {} exceeds the smallest source class ({min_source})",
            base.augment_budget
        )));
    }
    let effective = max_iterations.min(feasible);
    let mut warnings = Vec::new();
    if effective < max_iterations {
        warnings.push(format!(
            "iteration sweep truncated to {effective} rounds: the smallest source class \
             ({min_source}) supports only {feasible} rounds at budget {}",
            base.augment_budget
        ));
    }

    let tasks: Vec<u64> = seeds.to_vec();
    let per_cell = run_cells(tasks, workers, |&seed| {
        let mut cfg = base.clone().with_master_seed(seed);
        cfg.iterations = effective;

        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for (variant, use_dr) in [("gws", false), ("gws_dr", true)] {
            let mut vcfg = cfg.clone();
            vcfg.use_dr = use_dr;
            vcfg.augment_from = AugmentFrom::Matched;
            let result = run_pipeline(source, target_train, target_test, &vcfg)?;
            if variant == "gws" {
                rows.push(SweepRow {
                    variant: "baseline".to_string(),
                    fraction_or_iter: 0.0,
                    seed,
                    accuracy: result.baseline_accuracy,
                    separability: result.baseline_separability,
                });
            }
            for r in &result.rounds {
                rows.push(SweepRow {
                    variant: variant.to_string(),
                    fraction_or_iter: (r.round + 1) as f64,
                    seed,
                    accuracy: r.accuracy,
                    separability: r.separability_after,
                });
            }
            cells.push(SweepCell {
                key: format!("{variant}_iter_s{seed}"),
                result,
            });
        }
        Ok((rows, cells))
    })?;

    let mut outcome = SweepOutcome {
        rows: Vec::new(),
        cells: Vec::new(),
        warnings,
    };
    for (rows, cells) in per_cell {
        for c in &cells {
            outcome
                .warnings
                .extend(c.result.warnings.iter().map(|w| format!("{}: {w}", c.key)));
        }
        outcome.rows.extend(rows);
        outcome.cells.extend(cells);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn seed_mixing_is_stable_and_spread() {
        assert_eq!(mix_seed(1, 2), mix_seed(1, 2));
        assert_ne!(mix_seed(1, 2), mix_seed(1, 3));
        assert_ne!(mix_seed(1, 2), mix_seed(2, 2));
    }

    #[test]
    fn pipeline_runs_and_improves_over_baseline_on_average() {
        let mut wins = 0;
        let mut better_dr = 0;
        let mut base_sum = 0.0;
        let mut gws_sum = 0.0;
        let mut dr_sum = 0.0;
        let seeds = [1u64, 2, 3, 4, 5];
        for &seed in &seeds {
            let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
            let cfg = presets::pipeline_config().with_master_seed(seed);

            let mut gws_cfg = cfg.clone();
            gws_cfg.use_dr = false;
            let gws = run_pipeline(&source, &train_part, &test_part, &gws_cfg).unwrap();

            let mut dr_cfg = cfg.clone();
            dr_cfg.use_dr = true;
            let dr = run_pipeline(&source, &train_part, &test_part, &dr_cfg).unwrap();

            assert_eq!(gws.baseline_accuracy, dr.baseline_accuracy, "paired baselines");
            base_sum += gws.baseline_accuracy;
            gws_sum += gws.final_accuracy();
            dr_sum += dr.final_accuracy();
            if gws.final_accuracy() > gws.baseline_accuracy {
                wins += 1;
            }
            if dr.final_accuracy() >= gws.final_accuracy() {
                better_dr += 1;
            }
        }
        let n = seeds.len() as f64;
        assert!(
            gws_sum / n > base_sum / n,
            "guided augmentation should beat the baseline on average: {} vs {}",
            gws_sum / n,
            base_sum / n
        );
        assert!(wins >= 3, "gws won only {wins}/5 seeds");
        assert!(
            dr_sum / n >= gws_sum / n - 1e-12 || better_dr >= 3,
            "dr mean {} vs gws mean {}",
            dr_sum / n,
            gws_sum / n
        );
    }

    #[test]
    fn rounds_use_disjoint_sample_ledgers() {
        let seed = 9;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let mut cfg = presets::pipeline_config().with_master_seed(seed);
        cfg.iterations = 3;
        cfg.augment_budget = 4;
        let result = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        assert_eq!(result.rounds.len(), 3);
        let mut seen = HashSet::new();
        for r in &result.rounds {
            for &id in &r.used_ids {
                assert!(seen.insert(id), "sample {id} reused in round {}", r.round);
                assert!(id < source.samples.len());
            }
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let seed = 3;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let cfg = presets::pipeline_config().with_master_seed(seed);
        let a = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        let b = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        assert_eq!(a.final_model.flat_params(), b.final_model.flat_params());
        let run = PipelineRunSpec {
            source_path: "s".into(),
            target_train_path: "tr".into(),
            target_test_path: "te".into(),
            config: cfg,
        };
        let ja = serde_json::to_string(&a.to_report(run.clone())).unwrap();
        let jb = serde_json::to_string(&b.to_report(run)).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn budget_exhaustion_reports_the_round() {
        let seed = 5;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let mut cfg = presets::pipeline_config().with_master_seed(seed);
        // Each source class has a fixed size; demand more than two rounds can supply.
        let per_class = source.class_counts()[0];
        cfg.augment_budget = per_class / 2 + 1;
        cfg.iterations = 2;
        match run_pipeline(&source, &train_part, &test_part, &cfg) {
            Err(Error::BudgetExhausted { round, .. }) => assert_eq!(round, 1),
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn second_best_variant_uses_rank_two_classes() {
        let seed = 11;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let mut cfg = presets::pipeline_config().with_master_seed(seed);
        cfg.augment_from = AugmentFrom::SecondBest;
        let result = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        for (q, &p) in result.augment_map.iter().enumerate() {
            assert_eq!(p, second_best(&result.report, q).unwrap());
            assert_ne!(p, result.report.matched[q]);
        }
    }

    #[test]
    fn random_variant_avoids_matched_classes() {
        let seed = 12;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let mut cfg = presets::pipeline_config().with_master_seed(seed);
        cfg.augment_from = AugmentFrom::RandomUnmatched;
        let result = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        for (q, &p) in result.augment_map.iter().enumerate() {
            assert_ne!(p, result.report.matched[q], "target class {q}");
        }
    }

    #[test]
    fn source_classifier_shares_architecture_and_flags_collisions() {
        let seed = 13;
        let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
        let cfg = presets::pipeline_config().with_master_seed(seed);
        let result = run_pipeline(&source, &train_part, &test_part, &cfg).unwrap();
        assert_eq!(result.source_model.layer_sizes, result.baseline_model.layer_sizes);

        // Force a collision: every target class maps to source class 0.
        let map = vec![0usize; train_part.num_classes()];
        let sc = train_source_on_map(
            &source,
            &map,
            &train_part.class_names,
            &result.baseline_model,
            &cfg.source,
            cfg.source_holdout_fraction,
        )
        .unwrap();
        assert!(sc.warnings.iter().any(|w| w.contains("duplicated")));
    }

    #[test]
    fn sweep_rows_roundtrip_through_csv() {
        let rows = vec![
            SweepRow {
                variant: "gws".into(),
                fraction_or_iter: 0.25,
                seed: 3,
                accuracy: 0.8125,
                separability: 0.412345,
            },
            SweepRow {
                variant: "baseline".into(),
                fraction_or_iter: 1.0,
                seed: 4,
                accuracy: 0.5,
                separability: -0.25,
            },
        ];
        let csv = sweep_rows_to_csv(&rows);
        let parsed = parse_sweep_csv(&csv, Path::new("test.csv")).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].variant, "gws");
        assert_eq!(parsed[0].fraction_or_iter, 0.25);
        assert!((parsed[1].separability + 0.25).abs() < 1e-9);
    }

    #[test]
    fn iteration_sweep_truncates_with_a_warning() {
        // Well-separated data: matching is a clean permutation, so the only
        // budget pressure is the per-round draw itself.
        let seed = 21;
        let spec = presets::matching_benchmark_spec(seed);
        let (source, target) = crate::dataset::generate_synthetic(&spec).unwrap();
        let (train_part, test_part) = crate::dataset::split_dataset(&target, 0.5, seed).unwrap();
        let mut cfg = presets::pipeline_config();
        cfg.match_cfg.samples_per_class = presets::default_match_samples(&source);
        cfg.retrain.epochs = 30;
        cfg.baseline.epochs = 60;
        let per_class = source.class_counts()[0];
        cfg.augment_budget = per_class / 2;
        let outcome =
            iteration_sweep(&source, &train_part, &test_part, &cfg, 5, &[seed], 1).unwrap();
        assert!(outcome.warnings.iter().any(|w| w.contains("truncated")));
        let gws_rows: Vec<_> = outcome.rows.iter().filter(|r| r.variant == "gws").collect();
        assert_eq!(gws_rows.len(), 2);
    }
}
