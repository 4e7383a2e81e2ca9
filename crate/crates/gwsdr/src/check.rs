//! Verification: a central finite-difference oracle plus the eleven
//! acceptance criteria behind the `check` command and the acceptance test
//! suite. Numeric criteria run in-process against the presets; curve criteria
//! read sweep artifacts; the determinism criterion re-runs artifacts from
//! their own config echoes and compares bytes.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::{train, ClassifierModel};
use crate::dataset::{generate_sequence_benchmark, generate_synthetic, load_dataset};
use crate::dr;
use crate::error::{Error, Result};
use crate::matching::{class_log_likelihood, match_modes, trim_sequence, MatchConfig, MatchMethod};
use crate::pipeline::{
    augmentation_sweep, iteration_sweep, run_pipeline, sweep_rows_to_csv, to_json_string,
    PipelineReport, SweepRow, SweepSummary,
};
use crate::presets;

/// Central finite differences: `(f(x + h e_i) - f(x - h e_i)) / 2h` per
/// coordinate. Independent of any analytic gradient path.
pub fn finite_diff_grad<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grads = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let up = f(&probe);
        probe[i] = point[i] - step;
        let down = f(&probe);
        probe[i] = point[i];
        grads.push((up - down) / (2.0 * step));
    }
    grads
}

/// Max over coordinates of `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn pass(id: usize, name: &'static str, detail: String) -> Self {
        CriterionOutcome { id, name, passed: true, detail }
    }

    fn fail(id: usize, name: &'static str, detail: String) -> Self {
        CriterionOutcome { id, name, passed: false, detail }
    }

    fn from_result(id: usize, name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((true, detail)) => Self::pass(id, name, detail),
            Ok((false, detail)) => Self::fail(id, name, detail),
            Err(e) => Self::fail(id, name, e.to_string()),
        }
    }
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:>2}  {:<24} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

// ---------------------------------------------------------------------------
// 1. Directional-penalty gradient vs finite differences
// ---------------------------------------------------------------------------

pub fn check_dr_gradient() -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let start = Instant::now();
        let theta = ClassifierModel::new(&[3, 4, 3], 50)?;
        let phi = ClassifierModel::new(&[3, 4, 3], 51)?;
        let mut worst = 0.0_f64;
        for k in [1usize, 2, 4] {
            let analytic = dr::dr_grad(&theta, &phi, k)?;
            let e_phi = dr::significant_eigvecs(&dr::reshape_params(&phi), k)?;
            let numeric = finite_diff_grad(
                |p| dr::loss_and_grad_flat(p, &e_phi, k).unwrap().0,
                &theta.flat_params(),
                1e-5,
            );
            worst = worst.max(max_relative_error(&analytic, &numeric, 1e-6));
        }
        let elapsed = start.elapsed().as_secs_f64();
        Ok((
            worst < 1e-4 && elapsed < 10.0,
            format!(
                "31-parameter model, k in {{1,2,4}}: max relative error {worst:.2e} (< 1e-4), {elapsed:.2}s (< 10s)"
            ),
        ))
    };
    CriterionOutcome::from_result(1, "dr-gradient", run())
}

// ---------------------------------------------------------------------------
// 2. Directional-penalty loss identities
// ---------------------------------------------------------------------------

pub fn check_dr_loss_identities() -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let model = ClassifierModel::new(&[3, 4, 3], 7)?;
        let self_loss = dr::dr_loss(&model, &model, 2)?;

        // 12 parameters reshape to 4x4 with a padded last row. sym(M_theta) =
        // diag(4,3,1,0) keeps {e0,e1} on top; sym(M_phi) has its top two
        // eigenpairs (5 and -4) spanning {e2,e3}. Orthogonal subspaces give
        // ||-I_2||_F = sqrt(2).
        let s5 = 5.0_f64.sqrt();
        let theta = ClassifierModel::from_flat(
            &[2, 2, 2],
            &[4., 0., 0., 0., 0., 3., 0., 0., 0., 0., 1., 0.],
            0,
        )?;
        let phi = ClassifierModel::from_flat(
            &[2, 2, 2],
            &[0.5, 0., 0., 0., 0., 0.2, 0., 0., 0., 0., 1., 4.0 * s5],
            0,
        )?;
        let ortho = dr::dr_loss(&theta, &phi, 2)?;
        let ortho_err = (ortho - 2.0_f64.sqrt()).abs();
        Ok((
            self_loss < 1e-8 && ortho_err < 1e-8,
            format!(
                "self-alignment loss {self_loss:.2e} (< 1e-8); orthogonal 4x4 case |loss - sqrt(2)| = {ortho_err:.2e} (< 1e-8)"
            ),
        ))
    };
    CriterionOutcome::from_result(2, "dr-loss-identities", run())
}

// ---------------------------------------------------------------------------
// 3. Log-likelihood vs brute-force product
// ---------------------------------------------------------------------------

pub fn check_likelihood_oracle() -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let mut worst = 0.0_f64;
        for case in 0..100 {
            let model = ClassifierModel::new(&[3, 5, 4], case)?;
            let l = rng.random_range(1..=8usize);
            let samples: Vec<Vec<f64>> = (0..l)
                .map(|_| (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let q = rng.random_range(0..4usize);
            let ll = class_log_likelihood(&model, &samples, q)?;
            let product: f64 = samples
                .iter()
                .map(|x| model.forward(x).map(|f| f.probs[q]))
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .product();
            worst = worst.max((ll.exp() - product).abs() / product.abs().max(1e-300));
        }
        Ok((
            worst < 1e-9,
            format!("100 random cases, l <= 8: max relative error {worst:.2e} (< 1e-9)"),
        ))
    };
    CriterionOutcome::from_result(3, "likelihood-oracle", run())
}

// ---------------------------------------------------------------------------
// 4. Mode-matching ground-truth recovery
// ---------------------------------------------------------------------------

pub fn check_matching_recovery() -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let start = Instant::now();
        let mut count_hits = 0usize;
        let mut likelihood_hits = 0usize;
        let seeds = 20u64;
        for seed in 0..seeds {
            let spec = presets::matching_benchmark_spec(seed);
            let (source, target) = generate_synthetic(&spec)?;
            let model = ClassifierModel::new(&[spec.feature_dim, 16, 8], seed)?;
            let (model, _) = train(&model, &target, &presets::matching_train_config(seed), None)?;
            for (method, hits) in [
                (MatchMethod::Count, &mut count_hits),
                (MatchMethod::Likelihood, &mut likelihood_hits),
            ] {
                let cfg = MatchConfig {
                    samples_per_class: presets::default_match_samples(&source),
                    method,
                    seed,
                };
                let report = match_modes(&model, &source, &target.class_names, &cfg)?;
                if report.matched == spec.ground_truth_map {
                    *hits += 1;
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        Ok((
            count_hits >= 18 && likelihood_hits >= 18 && elapsed < 120.0,
            format!(
                "exact map recovery over 20 seeds: count {count_hits}/20, likelihood {likelihood_hits}/20 (each >= 18), {elapsed:.1}s (< 120s)"
            ),
        ))
    };
    CriterionOutcome::from_result(4, "matching-recovery", run())
}

// ---------------------------------------------------------------------------
// 5 & 9. Accuracy orderings measured in-process, paired seeds
// ---------------------------------------------------------------------------

/// One paired comparison on a fresh benchmark instance: baseline, guided
/// augmentation without and with the directional penalty, and the reference
/// classifier's held-out accuracy.
#[derive(Debug, Clone)]
pub struct OrderingMeasurement {
    pub seed: u64,
    pub baseline_accuracy: f64,
    pub gws_accuracy: f64,
    pub gws_dr_accuracy: f64,
    pub source_holdout_accuracy: f64,
    pub baseline_separability: f64,
    pub gws_dr_separability: f64,
}

pub fn ordering_measurements() -> Result<Vec<OrderingMeasurement>> {
    presets::comparison_seeds()
        .into_iter()
        .map(|seed| {
            let (source, train_part, test_part) = presets::pipeline_benchmark_data(seed);
            let cfg = presets::pipeline_config().with_master_seed(seed);
            let mut gws_cfg = cfg.clone();
            gws_cfg.use_dr = false;
            let gws = run_pipeline(&source, &train_part, &test_part, &gws_cfg)?;
            let mut dr_cfg = cfg;
            dr_cfg.use_dr = true;
            let dr = run_pipeline(&source, &train_part, &test_part, &dr_cfg)?;
            Ok(OrderingMeasurement {
                seed,
                baseline_accuracy: gws.baseline_accuracy,
                gws_accuracy: gws.final_accuracy(),
                gws_dr_accuracy: dr.final_accuracy(),
                source_holdout_accuracy: gws.source_holdout_accuracy,
                baseline_separability: gws.baseline_separability,
                gws_dr_separability: dr.final_separability(),
            })
        })
        .collect()
}

fn mean<F: Fn(&OrderingMeasurement) -> f64>(ms: &[OrderingMeasurement], f: F) -> f64 {
    ms.iter().map(f).sum::<f64>() / ms.len() as f64
}

pub fn check_table_ordering(ms: &[OrderingMeasurement]) -> CriterionOutcome {
    let base = mean(ms, |m| m.baseline_accuracy);
    let gws = mean(ms, |m| m.gws_accuracy);
    let dr = mean(ms, |m| m.gws_dr_accuracy);
    let passed = gws - base >= 0.01 && dr >= gws;
    CriterionOutcome {
        id: 5,
        name: "accuracy-ordering",
        passed,
        detail: format!(
            "10-seed means: baseline {base:.4} < gws {gws:.4} (gap {:+.4}, >= 0.01) <= gws+dr {dr:.4} (gap {:+.4})",
            gws - base,
            dr - gws
        ),
    }
}

pub fn check_source_generalization(ms: &[OrderingMeasurement]) -> CriterionOutcome {
    let base = mean(ms, |m| m.baseline_accuracy);
    let phi = mean(ms, |m| m.source_holdout_accuracy);
    CriterionOutcome {
        id: 9,
        name: "source-generalization",
        passed: phi >= base,
        detail: format!(
            "10-seed means: reference held-out accuracy {phi:.4} >= baseline target accuracy {base:.4}"
        ),
    }
}

// ---------------------------------------------------------------------------
// 6, 7, 8. Curve criteria over augmentation-sweep rows
// ---------------------------------------------------------------------------

fn sweep_mean(rows: &[SweepRow], variant: &str, x: f64, field: fn(&SweepRow) -> f64) -> Result<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.variant == variant && r.fraction_or_iter == x)
        .map(field)
        .collect();
    if vals.is_empty() {
        return Err(Error::InvalidInput(format!(
            "sweep has no `{variant}` rows at fraction/iteration {x}"
        )));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

fn sweep_fractions(rows: &[SweepRow]) -> Vec<f64> {
    let mut fractions: Vec<f64> = Vec::new();
    for r in rows {
        if r.variant == "gws" && !fractions.contains(&r.fraction_or_iter) {
            fractions.push(r.fraction_or_iter);
        }
    }
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fractions
}

pub fn check_inverted_u(rows: &[SweepRow]) -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let fractions = sweep_fractions(rows);
        if fractions.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "inverted-U needs at least 3 fractions, sweep has {}",
                fractions.len()
            )));
        }
        let curve: Vec<f64> = fractions
            .iter()
            .map(|&f| sweep_mean(rows, "gws", f, |r| r.accuracy))
            .collect::<Result<_>>()?;
        let interior = curve[1..curve.len() - 1]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let first = curve[0];
        let last = *curve.last().unwrap();
        let top = *fractions.last().unwrap();
        let gws_top = sweep_mean(rows, "gws", top, |r| r.accuracy)?;
        let dr_top = sweep_mean(rows, "gws_dr", top, |r| r.accuracy)?;
        let curve_s: Vec<String> = fractions
            .iter()
            .zip(&curve)
            .map(|(f, a)| format!("{f}x:{a:.4}"))
            .collect();
        Ok((
            interior > first && interior > last && dr_top >= gws_top,
            format!(
                "gws curve [{}]: interior max {interior:.4} > ends ({first:.4}, {last:.4}); at {top}x gws+dr {dr_top:.4} >= gws {gws_top:.4}",
                curve_s.join(" ")
            ),
        ))
    };
    CriterionOutcome::from_result(6, "augmentation-inverted-u", run())
}

pub fn check_random_control(rows: &[SweepRow]) -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let gws = sweep_mean(rows, "gws", 1.0, |r| r.accuracy)?;
        let random = sweep_mean(rows, "random", 1.0, |r| r.accuracy)?;
        Ok((
            random < gws,
            format!("at 1x budget: random-class augmentation {random:.4} < guided {gws:.4}"),
        ))
    };
    CriterionOutcome::from_result(7, "random-control", run())
}

pub fn check_separability(rows: &[SweepRow]) -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let base = sweep_mean(rows, "baseline", 1.0, |r| r.separability)?;
        let dr = sweep_mean(rows, "gws_dr", 1.0, |r| r.separability)?;
        Ok((
            dr >= base,
            format!("mean test-embedding silhouette: gws+dr {dr:.4} >= baseline {base:.4}"),
        ))
    };
    CriterionOutcome::from_result(8, "embedding-separability", run())
}

// ---------------------------------------------------------------------------
// 10. Window-trimming localization
// ---------------------------------------------------------------------------

pub fn check_trimming() -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let spec = presets::trim_benchmark_spec(10);
        let bench = generate_sequence_benchmark(&spec)?;
        let model = ClassifierModel::new(&[spec.feature_dim, 16, spec.num_classes], 10)?;
        let (model, _) = train(&model, &bench.train, &presets::matching_train_config(10), None)?;
        let stride = spec.span_length / 2;
        let mut hits = 0usize;
        let total = bench.sequences.samples.len();
        for (sample, &expected) in bench.sequences.samples.iter().zip(&bench.true_offsets) {
            let trimmed = trim_sequence(
                &model,
                &sample.values,
                spec.feature_dim,
                sample.label,
                spec.span_length,
                stride,
            )?;
            if trimmed.offset == expected {
                hits += 1;
            }
        }
        Ok((
            hits * 10 >= total * 9,
            format!("planted spans recovered exactly: {hits}/{total} (>= 90%)"),
        ))
    };
    CriterionOutcome::from_result(10, "trimming-localization", run())
}

// ---------------------------------------------------------------------------
// 11. Determinism of emitted artifacts
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Find files with the given name anywhere under `dir` (sorted for
/// deterministic reporting). Per-cell `runs/` reports are not rerun
/// individually; their sweep CSV covers them.
fn find_artifacts(dir: &Path, name: &str) -> Vec<std::path::PathBuf> {
    fn walk(dir: &Path, name: &str, hits: &mut Vec<std::path::PathBuf>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        let mut entries: Vec<_> = entries.flatten().map(|e| e.path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                if path.file_name().map_or(false, |n| n == "runs") {
                    continue;
                }
                walk(&path, name, hits);
            } else if path.file_name().map_or(false, |n| n == name) {
                hits.push(path);
            }
        }
    }
    let mut hits = Vec::new();
    walk(dir, name, &mut hits);
    hits
}

/// Re-run the pipeline described by a report's own config echo and compare
/// the regenerated JSON bytes against the stored file.
fn rerun_pipeline_json(path: &Path) -> Result<(bool, String)> {
    let stored = read_file(path)?;
    let report: PipelineReport = serde_json::from_str(&stored)
        .map_err(|e| Error::parse(path, 1, format!("bad pipeline report: {e}")))?;
    let source = load_dataset(Path::new(&report.run.source_path))?;
    let train_part = load_dataset(Path::new(&report.run.target_train_path))?;
    let test_part = load_dataset(Path::new(&report.run.target_test_path))?;
    let result = run_pipeline(&source, &train_part, &test_part, &report.run.config)?;
    let fresh = to_json_string(&result.to_report(report.run.clone()));
    Ok((fresh == stored, format!("{}", path.display())))
}

/// Re-run a sweep from its summary echo and compare the regenerated CSV
/// bytes against the stored sweep CSV.
fn rerun_sweep_csv(summary_path: &Path, csv_path: &Path) -> Result<(bool, String)> {
    let stored_csv = read_file(csv_path)?;
    let summary: SweepSummary = serde_json::from_str(&read_file(summary_path)?)
        .map_err(|e| Error::parse(summary_path, 1, format!("bad sweep summary: {e}")))?;
    let run = &summary.run;
    let source = load_dataset(Path::new(&run.source_path))?;
    let train_part = load_dataset(Path::new(&run.target_train_path))?;
    let test_part = load_dataset(Path::new(&run.target_test_path))?;
    let outcome = match run.kind.as_str() {
        "augment" => augmentation_sweep(
            &source,
            &train_part,
            &test_part,
            &run.config,
            &run.fractions,
            &run.seeds,
            run.include_random,
            1,
        )?,
        "iterate" => iteration_sweep(
            &source,
            &train_part,
            &test_part,
            &run.config,
            run.max_iterations,
            &run.seeds,
            1,
        )?,
        other => {
            return Err(Error::InvalidInput(format!("unknown sweep kind {other:?}")));
        }
    };
    Ok((
        sweep_rows_to_csv(&outcome.rows) == stored_csv,
        format!("{}", csv_path.display()),
    ))
}

/// Byte-identical reruns for every artifact present in `dir`. Dataset paths
/// inside the echoes are resolved exactly as written, so this must run from
/// the directory the original commands ran from.
pub fn check_determinism(dir: &Path) -> CriterionOutcome {
    let run = || -> Result<(bool, String)> {
        let mut checked = Vec::new();
        let mut all_ok = true;
        for pipeline_json in find_artifacts(dir, "pipeline.json") {
            let (ok, what) = rerun_pipeline_json(&pipeline_json)?;
            all_ok &= ok;
            checked.push(format!("{what}: {}", if ok { "identical" } else { "DIFFERS" }));
        }
        for kind in ["sweep_augment", "sweep_iterate"] {
            for summary in find_artifacts(dir, &format!("{kind}.json")) {
                let csv = summary.with_extension("csv");
                if !csv.exists() {
                    return Err(Error::InvalidInput(format!(
                        "sweep summary {} has no CSV next to it",
                        summary.display()
                    )));
                }
                let (ok, what) = rerun_sweep_csv(&summary, &csv)?;
                all_ok &= ok;
                checked.push(format!("{what}: {}", if ok { "identical" } else { "DIFFERS" }));
            }
        }
        if checked.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no rerunnable artifacts (pipeline.json, sweep_*.json/csv) found under {}",
                dir.display()
            )));
        }
        Ok((all_ok, format!("byte-identical reruns: {}", checked.join("; "))))
    };
    CriterionOutcome::from_result(11, "determinism", run())
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Evaluate criteria against the artifact directory. `only` limits the run to
/// the listed criterion ids (empty = all).
pub fn run_criteria(dir: &Path, only: &HashSet<usize>) -> Vec<CriterionOutcome> {
    let wanted = |id: usize| only.is_empty() || only.contains(&id);
    let mut outcomes = Vec::new();

    if wanted(1) {
        outcomes.push(check_dr_gradient());
    }
    if wanted(2) {
        outcomes.push(check_dr_loss_identities());
    }
    if wanted(3) {
        outcomes.push(check_likelihood_oracle());
    }
    if wanted(4) {
        outcomes.push(check_matching_recovery());
    }
    if wanted(5) || wanted(9) {
        match ordering_measurements() {
            Ok(ms) => {
                if wanted(5) {
                    outcomes.push(check_table_ordering(&ms));
                }
                if wanted(9) {
                    outcomes.push(check_source_generalization(&ms));
                }
            }
            Err(e) => {
                if wanted(5) {
                    outcomes.push(CriterionOutcome::fail(5, "accuracy-ordering", e.to_string()));
                }
                if wanted(9) {
                    outcomes.push(CriterionOutcome::fail(
                        9,
                        "source-generalization",
                        "ordering runs failed: could not measure".to_string(),
                    ));
                }
            }
        }
    }
    if wanted(6) || wanted(7) || wanted(8) {
        let csv = find_artifacts(dir, "sweep_augment.csv")
            .into_iter()
            .next()
            .unwrap_or_else(|| dir.join("sweep_augment.csv"));
        let rows = read_file(&csv).and_then(|text| crate::pipeline::parse_sweep_csv(&text, &csv));
        match rows {
            Ok(rows) => {
                if wanted(6) {
                    outcomes.push(check_inverted_u(&rows));
                }
                if wanted(7) {
                    outcomes.push(check_random_control(&rows));
                }
                if wanted(8) {
                    outcomes.push(check_separability(&rows));
                }
            }
            Err(e) => {
                for (id, name) in [
                    (6, "augmentation-inverted-u"),
                    (7, "random-control"),
                    (8, "embedding-separability"),
                ] {
                    if wanted(id) {
                        outcomes.push(CriterionOutcome::fail(id, name, e.to_string()));
                    }
                }
            }
        }
    }
    if wanted(10) {
        outcomes.push(check_trimming());
    }
    if wanted(11) {
        outcomes.push(check_determinism(dir));
    }
    outcomes.sort_by_key(|o| o.id);
    outcomes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_differences_on_a_quadratic() {
        let f = |v: &[f64]| v[0] * v[0] + 3.0 * v[0] * v[1];
        let g = finite_diff_grad(f, &[2.0, 1.0], 1e-6);
        assert!((g[0] - 7.0).abs() < 1e-6);
        assert!((g[1] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn relative_error_uses_the_floor() {
        let e = max_relative_error(&[1.0, 0.0], &[1.0, 1e-9], 1e-6);
        assert!(e < 1e-2);
    }

    #[test]
    fn fast_numeric_criteria_pass() {
        for outcome in [check_dr_gradient(), check_dr_loss_identities(), check_likelihood_oracle()]
        {
            assert!(outcome.passed, "{outcome}");
        }
    }

    #[test]
    fn curve_criteria_report_missing_variants() {
        let rows = vec![SweepRow {
            variant: "gws".into(),
            fraction_or_iter: 1.0,
            seed: 1,
            accuracy: 0.9,
            separability: 0.5,
        }];
        assert!(!check_inverted_u(&rows).passed);
        assert!(!check_random_control(&rows).passed);
        assert!(!check_separability(&rows).passed);
    }

    #[test]
    fn inverted_u_logic() {
        let mk = |variant: &str, f: f64, acc: f64| SweepRow {
            variant: variant.into(),
            fraction_or_iter: f,
            seed: 1,
            accuracy: acc,
            separability: 0.0,
        };
        let mut rows = Vec::new();
        for (f, a) in [(0.25, 0.80), (0.5, 0.82), (1.0, 0.85), (2.0, 0.83), (4.0, 0.78)] {
            rows.push(mk("gws", f, a));
            rows.push(mk("gws_dr", f, a + 0.01));
        }
        assert!(check_inverted_u(&rows).passed);

        // A monotone curve fails.
        let mut rising = Vec::new();
        for (i, f) in [0.25, 0.5, 1.0, 2.0, 4.0].iter().enumerate() {
            rising.push(mk("gws", *f, 0.7 + i as f64 * 0.02));
            rising.push(mk("gws_dr", *f, 0.7 + i as f64 * 0.02));
        }
        assert!(!check_inverted_u(&rising).passed);
    }
}
