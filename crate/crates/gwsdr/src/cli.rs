//! Command-line surface: dataset generation, classifier training, mode
//! matching, the full pipeline, the two sweeps, and the criterion checker.
//! Exit codes: 0 success, 1 failed checks, 2 usage/validation errors,
//! 3 partial output after budget exhaustion or truncation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::classifier::{evaluate, load_model, save_model, train, ClassifierModel, TrainConfig};
use crate::dataset::{
    generate_synthetic, load_dataset, split_dataset, write_dataset, write_map_sidecar,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::matching::{match_modes, MatchConfig, MatchMethod};
use crate::pipeline::{
    augmentation_sweep, iteration_sweep, mix_seed, run_pipeline, sweep_rows_to_csv,
    to_json_string, AugmentFrom, PipelineConfig, PipelineRunSpec, SweepOutcome, SweepRunSpec,
    SweepSummary, TrimConfig,
};
use crate::presets;

#[derive(Parser)]
#[command(
    name = "gwsdr",
    version,
    about = "Guided weak supervision and directional regularization on synthetic benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a paired source/target dataset with a known class map.
    Generate(GenerateArgs),
    /// Train a softmax classifier on a dataset file.
    Train(TrainArgs),
    /// Match target classes to source classes under a trained model.
    Match(MatchArgs),
    /// Run the full method once, per a config file.
    Pipeline(RunArgs),
    /// Accuracy versus augmentation amount, per a config file.
    SweepAugment(RunArgs),
    /// Accuracy versus augmentation round, per a config file.
    SweepIterate(RunArgs),
    /// Evaluate the acceptance criteria against emitted artifacts.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory for source.ds, target.ds, map.csv (and the split parts).
    #[arg(long)]
    out_dir: PathBuf,
    /// Start from a canned setup: `matching` or `pipeline`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 8)]
    source_classes: usize,
    #[arg(long, default_value_t = 8)]
    target_classes: usize,
    #[arg(long, default_value_t = 6)]
    dim: usize,
    #[arg(long, default_value_t = 40)]
    source_samples: usize,
    #[arg(long, default_value_t = 12)]
    target_samples: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    perturbation: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Comma-separated target->source map, e.g. `2,0,1`; seeded permutation
    /// when omitted.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write target_train.ds/target_test.ds at this train fraction.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference model enabling the directional penalty.
    #[arg(long)]
    dr_ref: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    dr_weight: f64,
    #[arg(long, default_value_t = 4)]
    dr_rank: usize,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    source: PathBuf,
    /// Target dataset supplying class names (t0, t1, ... when omitted).
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "count")]
    method: String,
    /// Samples drawn per source class; smallest class capped at 64 when omitted.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for sweep cells (outputs are identical at any count).
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct CheckArgs {
    /// Artifact directory produced by `pipeline` and the sweeps.
    dir: PathBuf,
    /// Restrict to these criterion ids, e.g. `--only 6,7`.
    #[arg(long)]
    only: Option<String>,
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; --help/--version are successes.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Match(args) => cmd_match(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::SweepAugment(args) => cmd_sweep(args, SweepKind::Augment),
        Command::SweepIterate(args) => cmd_sweep(args, SweepKind::Iterate),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(code) => code,
        Err(Error::BudgetExhausted { .. }) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn parse_map(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad map entry {s:?}")))
        })
        .collect()
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let (spec, default_split) = match args.preset.as_deref() {
        Some("matching") => (presets::matching_benchmark_spec(args.seed), None),
        Some("pipeline") => (presets::pipeline_benchmark_spec(args.seed), Some(0.05)),
        Some(other) => {
            return Err(Error::InvalidInput(format!(
                "unknown preset {other:?} (expected `matching` or `pipeline`)"
            )));
        }
        None => {
            let map = match &args.map {
                Some(text) => parse_map(text)?,
                None => presets::permutation_map(
                    args.target_classes.min(args.source_classes),
                    mix_seed(args.seed, 7),
                ),
            };
            (
                SyntheticSpec {
                    num_source_classes: args.source_classes,
                    num_target_classes: args.target_classes,
                    feature_dim: args.dim,
                    samples_per_source_class: args.source_samples,
                    samples_per_target_class: args.target_samples,
                    class_separation: args.separation,
                    target_perturbation: args.perturbation,
                    noise_scale: args.noise,
                    ground_truth_map: map,
                    seed: args.seed,
                },
                None,
            )
        }
    };

    let (source, target) = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    write_dataset(&source, &args.out_dir.join("source.ds"))?;
    write_dataset(&target, &args.out_dir.join("target.ds"))?;
    write_map_sidecar(
        &spec.ground_truth_map,
        &target.class_names,
        &source.class_names,
        &args.out_dir.join("map.csv"),
    )?;
    if let Some(fraction) = args.split.or(default_split) {
        let split_seed = args.split_seed.unwrap_or_else(|| mix_seed(spec.seed, 8));
        let (train_part, test_part) = split_dataset(&target, fraction, split_seed)?;
        write_dataset(&train_part, &args.out_dir.join("target_train.ds"))?;
        write_dataset(&test_part, &args.out_dir.join("target_test.ds"))?;
    }
    println!(
        "wrote {} source / {} target samples ({} classes each side) to {}",
        source.samples.len(),
        target.samples.len(),
        source.num_classes(),
        args.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let data = load_dataset(&args.data)?;
    let dr_ref = args.dr_ref.as_deref().map(load_model).transpose()?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        l2_weight: args.l2,
        dr_weight: if dr_ref.is_some() { args.dr_weight } else { 0.0 },
        dr_rank: dr_ref.is_some().then_some(args.dr_rank),
        seed: args.seed,
    };
    let sizes = [data.feature_dim, args.hidden, data.num_classes()];
    let init = match &dr_ref {
        // Share the reference's architecture so the penalty applies.
        Some(reference) => ClassifierModel::new(&reference.layer_sizes, args.seed)?,
        None => ClassifierModel::new(&sizes, args.seed)?,
    };
    let (model, trace) = train(&init, &data, &cfg, dr_ref.as_ref())?;
    save_model(&model, &args.out)?;
    let eval = evaluate(&model, &data)?;
    println!(
        "trained {} epochs: final loss {:.6}, training accuracy {:.4}{}",
        cfg.epochs,
        trace.epoch_loss.last().unwrap(),
        eval.accuracy,
        if trace.dr_skipped > 0 {
            format!(" ({} dr steps skipped on degenerate spectra)", trace.dr_skipped)
        } else {
            String::new()
        }
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

fn cmd_match(args: MatchArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let source = load_dataset(&args.source)?;
    let target_names: Vec<String> = match &args.target {
        Some(path) => load_dataset(path)?.class_names,
        None => (0..model.num_classes()).map(|q| format!("t{q}")).collect(),
    };
    let cfg = MatchConfig {
        samples_per_class: args
            .samples
            .unwrap_or_else(|| presets::default_match_samples(&source)),
        method: args.method.parse::<MatchMethod>()?,
        seed: args.seed,
    };
    let report = match_modes(&model, &source, &target_names, &cfg)?;
    report.write_csv(&args.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (target, source_name) in report.matched_names() {
        println!("{target} -> {source_name}");
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// Run configs: `key = value` lines, `#` comments. Keys mirror the pipeline
// configuration; see configs/ for committed examples.
// ---------------------------------------------------------------------------

struct RunFile {
    source_path: String,
    target_train_path: String,
    target_test_path: String,
    config: PipelineConfig,
    fractions: Vec<f64>,
    max_iterations: usize,
    seeds: Vec<u64>,
    include_random: bool,
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::InvalidInput(format!("{key}: expected true/false, got {value:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::InvalidInput(format!("{key}: could not parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn train_field(cfg: &mut TrainConfig, field: &str, key: &str, value: &str) -> Result<()> {
    match field {
        "epochs" => cfg.epochs = parse_num(key, value)?,
        "batch_size" => cfg.batch_size = parse_num(key, value)?,
        "learning_rate" => cfg.learning_rate = parse_num(key, value)?,
        "l2_weight" => cfg.l2_weight = parse_num(key, value)?,
        "dr_weight" => cfg.dr_weight = parse_num(key, value)?,
        "dr_rank" => cfg.dr_rank = Some(parse_num(key, value)?),
        "seed" => cfg.seed = parse_num(key, value)?,
        _ => return Err(Error::InvalidInput(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

fn parse_run_file(path: &Path) -> Result<RunFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut run = RunFile {
        source_path: String::new(),
        target_train_path: String::new(),
        target_test_path: String::new(),
        config: presets::pipeline_config(),
        fractions: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        max_iterations: 3,
        seeds: presets::comparison_seeds(),
        include_random: true,
    };
    let mut trim_window = None;
    let mut trim_stride = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let cfg = &mut run.config;
        match key {
            "source" => run.source_path = value.to_string(),
            "target_train" => run.target_train_path = value.to_string(),
            "target_test" => run.target_test_path = value.to_string(),
            "hidden" => cfg.hidden_size = parse_num(key, value)?,
            "augment_budget" => cfg.augment_budget = parse_num(key, value)?,
            "augment_seed" => cfg.augment_seed = parse_num(key, value)?,
            "iterations" => cfg.iterations = parse_num(key, value)?,
            "use_dr" => cfg.use_dr = parse_bool(key, value)?,
            "use_second_best" => {
                if parse_bool(key, value)? {
                    cfg.augment_from = AugmentFrom::SecondBest;
                }
            }
            "source_holdout_fraction" => cfg.source_holdout_fraction = parse_num(key, value)?,
            "match.method" => cfg.match_cfg.method = value.parse()?,
            "match.samples_per_class" => cfg.match_cfg.samples_per_class = parse_num(key, value)?,
            "match.seed" => cfg.match_cfg.seed = parse_num(key, value)?,
            "trim.window" => trim_window = Some(parse_num(key, value)?),
            "trim.stride" => trim_stride = Some(parse_num(key, value)?),
            "fractions" => run.fractions = parse_list(key, value)?,
            "max_iterations" => run.max_iterations = parse_num(key, value)?,
            "seeds" => run.seeds = parse_list(key, value)?,
            "include_random" => run.include_random = parse_bool(key, value)?,
            _ => match key.split_once('.') {
                Some(("baseline", field)) => train_field(&mut cfg.baseline, field, key, value)?,
                Some(("source", field)) => train_field(&mut cfg.source, field, key, value)?,
                Some(("retrain", field)) => train_field(&mut cfg.retrain, field, key, value)?,
                _ => {
                    return Err(Error::parse(path, idx + 1, format!("unknown config key {key:?}")));
                }
            },
        }
    }
    match (trim_window, trim_stride) {
        (None, None) => {}
        (Some(window), Some(stride)) => run.config.trim = Some(TrimConfig { window, stride }),
        _ => {
            return Err(Error::InvalidInput(
                "trim.window and trim.stride must be set together".into(),
            ));
        }
    }
    for (key, value) in [
        ("source", &run.source_path),
        ("target_train", &run.target_train_path),
        ("target_test", &run.target_test_path),
    ] {
        if value.is_empty() {
            return Err(Error::InvalidInput(format!("config is missing `{key} = <path>`")));
        }
    }
    Ok(run)
}

// ---------------------------------------------------------------------------
// pipeline / sweeps
// ---------------------------------------------------------------------------

fn cmd_pipeline(args: RunArgs) -> Result<ExitCode> {
    let run = parse_run_file(&args.config)?;
    let source = load_dataset(Path::new(&run.source_path))?;
    let train_part = load_dataset(Path::new(&run.target_train_path))?;
    let test_part = load_dataset(Path::new(&run.target_test_path))?;
    let result = run_pipeline(&source, &train_part, &test_part, &run.config)?;

    let spec = PipelineRunSpec {
        source_path: run.source_path,
        target_train_path: run.target_train_path,
        target_test_path: run.target_test_path,
        config: run.config,
    };
    let report = result.to_report(spec);
    write_text(&args.out.join("pipeline.json"), &to_json_string(&report))?;
    report.matching.write_csv(&args.out.join("report.csv"))?;
    save_model(&result.baseline_model, &args.out.join("baseline.model"))?;
    save_model(&result.source_model, &args.out.join("source.model"))?;
    save_model(&result.final_model, &args.out.join("final.model"))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "baseline accuracy {:.4} -> final accuracy {:.4} ({} round(s); artifacts in {})",
        result.baseline_accuracy,
        result.final_accuracy(),
        result.rounds.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

enum SweepKind {
    Augment,
    Iterate,
}

fn cmd_sweep(args: RunArgs, kind: SweepKind) -> Result<ExitCode> {
    let run = parse_run_file(&args.config)?;
    let source = load_dataset(Path::new(&run.source_path))?;
    let train_part = load_dataset(Path::new(&run.target_train_path))?;
    let test_part = load_dataset(Path::new(&run.target_test_path))?;

    let (outcome, stem): (SweepOutcome, &str) = match kind {
        SweepKind::Augment => (
            augmentation_sweep(
                &source,
                &train_part,
                &test_part,
                &run.config,
                &run.fractions,
                &run.seeds,
                run.include_random,
                args.workers,
            )?,
            "sweep_augment",
        ),
        SweepKind::Iterate => (
            iteration_sweep(
                &source,
                &train_part,
                &test_part,
                &run.config,
                run.max_iterations,
                &run.seeds,
                args.workers,
            )?,
            "sweep_iterate",
        ),
    };

    let spec = SweepRunSpec {
        kind: match kind {
            SweepKind::Augment => "augment".to_string(),
            SweepKind::Iterate => "iterate".to_string(),
        },
        source_path: run.source_path.clone(),
        target_train_path: run.target_train_path.clone(),
        target_test_path: run.target_test_path.clone(),
        config: run.config.clone(),
        fractions: match kind {
            SweepKind::Augment => run.fractions.clone(),
            SweepKind::Iterate => Vec::new(),
        },
        max_iterations: match kind {
            SweepKind::Augment => 0,
            SweepKind::Iterate => run.max_iterations,
        },
        seeds: run.seeds.clone(),
        include_random: run.include_random,
    };
    write_text(&args.out.join(format!("{stem}.csv")), &sweep_rows_to_csv(&outcome.rows))?;
    let summary = SweepSummary { run: spec, warnings: outcome.warnings.clone() };
    write_text(&args.out.join(format!("{stem}.json")), &to_json_string(&summary))?;
    for cell in &outcome.cells {
        let run_spec = PipelineRunSpec {
            source_path: run.source_path.clone(),
            target_train_path: run.target_train_path.clone(),
            target_test_path: run.target_test_path.clone(),
            config: run.config.clone(),
        };
        write_text(
            &args.out.join("runs").join(format!("{}.json", cell.key)),
            &to_json_string(&cell.result.to_report(run_spec)),
        )?;
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{} rows ({} pipeline runs) written to {}",
        outcome.rows.len(),
        outcome.cells.len(),
        args.out.display()
    );
    let truncated = outcome.warnings.iter().any(|w| w.contains("truncated"));
    Ok(if truncated { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let only: HashSet<usize> = match &args.only {
        Some(list) => list
            .split(',')
            .map(|s| parse_num::<usize>("--only", s.trim()))
            .collect::<Result<_>>()?,
        None => HashSet::new(),
    };
    let outcomes = crate::check::run_criteria(&args.dir, &only);
    let mut all_pass = true;
    for outcome in &outcomes {
        println!("{outcome}");
        all_pass &= outcome.passed;
    }
    if outcomes.is_empty() {
        eprintln!("error: no criteria selected");
        return Ok(ExitCode::from(2));
    }
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
