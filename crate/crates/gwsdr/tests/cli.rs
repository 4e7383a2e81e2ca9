//! Command-line surface: artifact formats, exit codes, and the printed
//! matched map. Exit codes: 0 success, 1 failed checks, 2 validation,
//! 3 partial/budget.

use std::path::{Path, PathBuf};
use std::process::Command;

use gwsdr::dataset::{load_dataset, load_map_sidecar};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gwsdr")
}

fn run_in(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small, fast datasets for command tests: the well-separated benchmark.
fn generate_matching(dir: &Path) {
    let out = run_in(
        dir,
        &["generate", "--preset", "matching", "--seed", "3", "--out-dir", "data", "--split", "0.5"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_mini_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("mini.conf");
    let base = "\
source = data/source.ds
target_train = data/target_train.ds
target_test = data/target_test.ds
hidden = 8
augment_budget = 6
iterations = 1
use_dr = true
baseline.epochs = 40
baseline.batch_size = 8
baseline.learning_rate = 0.15
source.epochs = 30
retrain.epochs = 30
retrain.dr_weight = 0.0625
retrain.dr_rank = 4
match.samples_per_class = 40
seeds = 1,2
fractions = 0.5,1,2
max_iterations = 2
";
    std::fs::write(&path, format!("{base}{extra}")).unwrap();
    path
}

#[test]
fn generate_writes_reloadable_files_and_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    let data = tmp.path().join("data");
    let source = load_dataset(&data.join("source.ds")).unwrap();
    let target = load_dataset(&data.join("target.ds")).unwrap();
    assert_eq!(source.num_classes(), 8);
    assert_eq!(target.num_classes(), 8);
    let map = load_map_sidecar(&data.join("map.csv")).unwrap();
    assert_eq!(map.len(), 8);
    assert!(map.iter().all(|&p| p < 8));
    // Split parts reload and partition the target per class.
    let train_part = load_dataset(&data.join("target_train.ds")).unwrap();
    let test_part = load_dataset(&data.join("target_test.ds")).unwrap();
    assert_eq!(train_part.class_counts(), vec![6; 8]);
    assert_eq!(test_part.class_counts(), vec![6; 8]);
}

#[test]
fn generate_rejects_more_target_classes_than_source() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["generate", "--source-classes", "3", "--target-classes", "5", "--out-dir", "data"],
    );
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("must not exceed"), "{err}");
}

#[test]
fn generate_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = run_in(
            tmp.path(),
            &["generate", "--preset", "matching", "--seed", "7", "--out-dir", dir],
        );
        assert_eq!(code(&out), 0);
    }
    for name in ["source.ds", "target.ds", "map.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn train_then_match_recovers_the_sidecar_map() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    let out = run_in(
        tmp.path(),
        &[
            "train", "--data", "data/target.ds", "--out", "target.model", "--hidden", "16",
            "--epochs", "100", "--lr", "0.15", "--seed", "5",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let matched = run_in(
        tmp.path(),
        &[
            "match", "--model", "target.model", "--source", "data/source.ds", "--target",
            "data/target.ds", "--out", "report.csv",
        ],
    );
    assert_eq!(code(&matched), 0, "{}", String::from_utf8_lossy(&matched.stderr));

    // The printed `tq -> sp` map equals the generator's sidecar.
    let map = load_map_sidecar(&tmp.path().join("data/map.csv")).unwrap();
    let printed = stdout(&matched);
    let lines: Vec<&str> = printed.lines().collect();
    assert_eq!(lines.len(), 8);
    for (q, line) in lines.iter().enumerate() {
        assert_eq!(*line, format!("t{q} -> s{}", map[q]));
    }

    // Same map under the exact likelihood method on this separable data.
    let by_likelihood = run_in(
        tmp.path(),
        &[
            "match", "--model", "target.model", "--source", "data/source.ds", "--target",
            "data/target.ds", "--out", "report2.csv", "--method", "likelihood",
        ],
    );
    assert_eq!(stdout(&by_likelihood), printed);

    let report = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert!(report.starts_with("target_class,rank,source_class,log_likelihood,argmax_count,mean_prob\n"));
    assert_eq!(report.lines().count(), 1 + 64);
}

#[test]
fn match_with_missing_model_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    let out = run_in(
        tmp.path(),
        &["match", "--model", "nope.model", "--source", "data/source.ds", "--out", "r.csv"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn pipeline_and_sweeps_emit_the_documented_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    let conf = write_mini_config(tmp.path(), "");

    let out = run_in(
        tmp.path(),
        &["pipeline", "--config", conf.to_str().unwrap(), "--out", "run"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/pipeline.json")).unwrap())
            .unwrap();
    assert!(report["baseline_accuracy"].is_number());
    assert_eq!(report["run"]["config"]["hidden_size"], 8);
    assert!(tmp.path().join("run/final.model").exists());

    let sweep = run_in(
        tmp.path(),
        &["sweep-augment", "--config", conf.to_str().unwrap(), "--out", "sw", "--workers", "2"],
    );
    assert_eq!(code(&sweep), 0, "{}", String::from_utf8_lossy(&sweep.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("sw/sweep_augment.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "variant,fraction_or_iter,seed,accuracy,separability"
    );
    // 3 fractions x 2 seeds x 4 variants (baseline row included per cell).
    assert_eq!(lines.count(), 3 * 2 * 4);

    // Byte-identical on a rerun.
    let rerun = run_in(
        tmp.path(),
        &["sweep-augment", "--config", conf.to_str().unwrap(), "--out", "sw2"],
    );
    assert_eq!(code(&rerun), 0);
    assert_eq!(
        std::fs::read(tmp.path().join("sw/sweep_augment.csv")).unwrap(),
        std::fs::read(tmp.path().join("sw2/sweep_augment.csv")).unwrap()
    );

    let iterate = run_in(
        tmp.path(),
        &["sweep-iterate", "--config", conf.to_str().unwrap(), "--out", "it"],
    );
    assert_eq!(code(&iterate), 0, "{}", String::from_utf8_lossy(&iterate.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("it/sweep_iterate.csv")).unwrap();
    // Per seed: 1 baseline row + 2 rounds x 2 variants.
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    let conf = write_mini_config(tmp.path(), "no_such_knob = 3\n");
    let out = run_in(
        tmp.path(),
        &["pipeline", "--config", conf.to_str().unwrap(), "--out", "run"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_knob"));
}

#[test]
fn exhausted_budget_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    // 40 samples per source class cannot cover 2 rounds of 25.
    let conf = write_mini_config(tmp.path(), "augment_budget = 25\niterations = 2\n");
    let out = run_in(
        tmp.path(),
        &["pipeline", "--config", conf.to_str().unwrap(), "--out", "run"],
    );
    assert_eq!(code(&out), 3);
}

#[test]
fn truncated_iteration_sweep_exits_3_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    generate_matching(tmp.path());
    // Budget 20 supports two rounds of the requested five.
    let conf = write_mini_config(tmp.path(), "augment_budget = 20\nmax_iterations = 5\n");
    let out = run_in(
        tmp.path(),
        &["sweep-iterate", "--config", conf.to_str().unwrap(), "--out", "it"],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
    assert!(tmp.path().join("it/sweep_iterate.csv").exists());
}

#[test]
fn check_fails_on_tampered_and_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();

    // Missing artifacts: the curve criteria fail naming the file.
    let missing = run_in(tmp.path(), &["check", ".", "--only", "6"]);
    assert_eq!(code(&missing), 1);
    assert!(stdout(&missing).contains("sweep_augment.csv"));

    // A curve tampered so guided augmentation never beats the baseline
    // flips the ordering criteria to FAIL.
    let mut csv = String::from("variant,fraction_or_iter,seed,accuracy,separability\n");
    for f in [0.25, 0.5, 1.0, 2.0, 4.0] {
        for seed in 1..=3 {
            csv.push_str(&format!("baseline,{f},{seed},0.800000,0.200000\n"));
            csv.push_str(&format!("gws,{f},{seed},0.500000,0.100000\n"));
            csv.push_str(&format!("gws_dr,{f},{seed},0.500000,0.100000\n"));
            csv.push_str(&format!("random,{f},{seed},0.900000,0.100000\n"));
        }
    }
    std::fs::write(tmp.path().join("sweep_augment.csv"), csv).unwrap();
    let tampered = run_in(tmp.path(), &["check", ".", "--only", "6,7,8"]);
    assert_eq!(code(&tampered), 1);
    let text = stdout(&tampered);
    assert!(text.contains("FAIL  6"), "{text}");
    assert!(text.contains("FAIL  7"), "{text}");
    assert!(text.contains("FAIL  8"), "{text}");

    // Artifact-free numeric criteria still pass anywhere.
    let numeric = run_in(tmp.path(), &["check", ".", "--only", "2,3"]);
    assert_eq!(code(&numeric), 0, "{}", stdout(&numeric));
}

#[test]
fn help_and_bad_usage_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let help = run_in(tmp.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    for verb in ["generate", "train", "match", "pipeline", "sweep-augment", "sweep-iterate", "check"] {
        assert!(stdout(&help).contains(verb), "help is missing {verb}");
    }
    let bad = run_in(tmp.path(), &["no-such-command"]);
    assert_eq!(code(&bad), 2);
}
