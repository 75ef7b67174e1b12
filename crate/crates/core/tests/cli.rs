//! End-to-end runs of the command-line front end on small fleets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use vcsel_rul::cli::{self, EXIT_OK, EXIT_USAGE, MANIFEST_FILE};
use vcsel_rul::dataset::{self, SPLIT_FILE};
use vcsel_rul::experiment::ExperimentConfig;
use vcsel_rul::metrics::REPORT_FILE;
use vcsel_rul::model::{Network, TrainedModel};

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["vcsel-rul", "--quiet"];
    full.extend_from_slice(args);
    cli::main_with_args(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A workspace holding a generated fleet and the dataset built from it.
struct Pipeline {
    root: TempDir,
    seed: u64,
}

impl Pipeline {
    fn new(seed: u64, devices: usize) -> Self {
        let p = Self { root: tempfile::tempdir().unwrap(), seed };
        let seed_arg = seed.to_string();
        let n = devices.to_string();
        assert_eq!(run(&["--seed", &seed_arg, "-o", s(&p.fleet()), "generate", "--devices", &n]), EXIT_OK);
        assert_eq!(
            run(&["--seed", &seed_arg, "-o", s(&p.dataset()), "build-dataset", "--fleet", s(&p.fleet())]),
            EXIT_OK
        );
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }

    fn fleet(&self) -> PathBuf {
        self.path("fleet")
    }

    fn dataset(&self) -> PathBuf {
        self.path("dataset")
    }

    fn train(&self, out: &str, extra: &[&str]) -> i32 {
        let seed = self.seed.to_string();
        let (out, dataset) = (self.path(out), self.dataset());
        let mut args = vec!["--seed", &seed, "-o", s(&out), "train", "--dataset", s(&dataset)];
        args.extend_from_slice(extra);
        run(&args)
    }
}

#[test]
fn refuses_to_overwrite_without_force() {
    let p = Pipeline::new(3, 20);
    let fleet = p.fleet();
    assert_eq!(run(&["-o", s(&fleet), "generate", "--devices", "20"]), EXIT_USAGE);
    assert_eq!(run(&["--force", "-o", s(&fleet), "generate", "--devices", "20"]), EXIT_OK);
}

#[test]
fn missing_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let nowhere = dir.path().join("nope");
    let out = dir.path().join("out");
    assert_eq!(run(&["-o", s(&out), "build-dataset", "--fleet", s(&nowhere)]), EXIT_USAGE);
    assert_eq!(run(&["-o", s(&out), "train", "--dataset", s(&nowhere)]), EXIT_USAGE);
    assert_eq!(run(&["-o", s(&out), "compare", s(&nowhere), s(&nowhere)]), EXIT_USAGE);
    assert_eq!(run(&["bogus-command"]), EXIT_USAGE);
}

#[test]
fn training_is_repeatable_and_records_history() {
    let p = Pipeline::new(5, 30);
    assert_eq!(p.train("a", &["--epochs", "4"]), EXIT_OK);
    assert_eq!(p.train("b", &["--epochs", "4"]), EXIT_OK);
    let history = fs::read_to_string(p.path("a").join(cli::LOSS_HISTORY_FILE)).unwrap();
    assert_eq!(history, fs::read_to_string(p.path("b").join(cli::LOSS_HISTORY_FILE)).unwrap());
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,val_loss,best_val_loss");
    assert_eq!(lines.len(), 5);
    assert_eq!(
        fs::read(p.path("a").join(cli::CHECKPOINT_FILE)).unwrap(),
        fs::read(p.path("b").join(cli::CHECKPOINT_FILE)).unwrap()
    );
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let p = Pipeline::new(6, 20);
    assert_eq!(p.train("m", &["--epochs", "0"]), EXIT_OK);
    let model = TrainedModel::load(&p.path("m").join(cli::CHECKPOINT_FILE)).unwrap();
    let fresh = Network::build(&ExperimentConfig::seeded(6).model).unwrap();
    assert_eq!(model.network().flat_params(), fresh.flat_params());
    assert_eq!(model.meta().epochs_run, 0);
}

#[test]
fn every_variant_trains_and_evaluates() {
    let p = Pipeline::new(7, 20);
    for variant in ["hybrid", "cnn-only", "lstm-only", "mlp"] {
        assert_eq!(p.train(variant, &["--epochs", "2", "--variant", variant]), EXIT_OK, "{variant}");
        let eval = p.path(&format!("eval-{variant}"));
        let ckpt = p.path(variant).join(cli::CHECKPOINT_FILE);
        assert_eq!(
            run(&["-o", s(&eval), "evaluate", "--dataset", s(&p.dataset()), "--checkpoint", s(&ckpt)]),
            EXIT_OK,
            "{variant}"
        );
        assert!(eval.join(REPORT_FILE).exists());
    }
}

#[test]
fn checkpoint_from_another_dataset_is_rejected() {
    let a = Pipeline::new(8, 20);
    let b = Pipeline::new(9, 20);
    assert_eq!(a.train("m", &["--epochs", "1"]), EXIT_OK);
    let ckpt = a.path("m").join(cli::CHECKPOINT_FILE);
    let out = b.path("eval");
    assert_eq!(
        run(&["-o", s(&out), "evaluate", "--dataset", s(&b.dataset()), "--checkpoint", s(&ckpt)]),
        EXIT_USAGE
    );
}

#[test]
fn trajectory_counts_down() {
    let p = Pipeline::new(10, 30);
    assert_eq!(p.train("m", &["--epochs", "2"]), EXIT_OK);
    let split: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.dataset().join(SPLIT_FILE)).unwrap()).unwrap();
    let device = split["test_devices"][0].as_str().unwrap().to_string();
    let out = p.path("eval");
    let ckpt = p.path("m").join(cli::CHECKPOINT_FILE);
    let code = run(&[
        "-o", s(&out), "evaluate", "--dataset", s(&p.dataset()), "--checkpoint", s(&ckpt), "--device", &device,
    ]);
    assert_eq!(code, EXIT_OK);
    let csv = fs::read_to_string(out.join(format!("trajectory_{device}.csv"))).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[0], f[1])
        })
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1));
}

#[test]
fn baseline_compared_with_itself_shows_no_change() {
    let p = Pipeline::new(11, 30);
    let eval = p.path("llsf");
    assert_eq!(
        run(&[
            "-o", s(&eval), "evaluate", "--dataset", s(&p.dataset()), "--baseline", "llsf", "--fleet", s(&p.fleet()),
        ]),
        EXIT_OK
    );
    let out = p.path("cmp");
    assert_eq!(run(&["-o", s(&out), "compare", s(&eval), s(&eval)]), EXIT_OK);
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(cli::COMPARISON_JSON_FILE)).unwrap()).unwrap();
    for row in cmp["rows"].as_array().unwrap() {
        for key in ["rmse_delta_pct", "mae_delta_pct", "score_delta_pct"] {
            assert_eq!(row[key].as_f64(), Some(0.0), "{key}");
        }
    }
}

#[test]
fn fleet_without_failures_builds_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let fleet = dir.path().join("fleet");
    let data = dir.path().join("data");
    assert_eq!(run(&["-o", s(&fleet), "generate", "--devices", "10", "--max-hours", "60"]), EXIT_OK);
    assert_eq!(run(&["-o", s(&data), "build-dataset", "--fleet", s(&fleet)]), EXIT_OK);
    assert!(dataset::read_samples(&data.join(dataset::DATASET_FILE)).unwrap().is_empty());
    let split: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join(SPLIT_FILE)).unwrap()).unwrap();
    assert!(split["train_devices"].as_array().unwrap().is_empty());
    assert!(!data.join(dataset::STATS_FILE).exists());
}

#[test]
fn every_command_writes_a_manifest() {
    let p = Pipeline::new(12, 20);
    for dir in [p.fleet(), p.dataset()] {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m["seed"].as_u64(), Some(12));
        for (name, digest) in m["outputs"].as_object().unwrap() {
            assert_eq!(cli::file_digest(&dir.join(name)).unwrap(), digest.as_str().unwrap());
        }
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(&config, "[generator]\ndevice_count = 7\n").unwrap();
    let count = |out: &Path| fs::read_to_string(out.join("conditions.csv")).unwrap().lines().count() - 1;

    let from_file = dir.path().join("a");
    assert_eq!(run(&["--config", s(&config), "-o", s(&from_file), "generate"]), EXIT_OK);
    assert_eq!(count(&from_file), 7);

    let from_flag = dir.path().join("b");
    assert_eq!(run(&["--config", s(&config), "-o", s(&from_flag), "generate", "--devices", "4"]), EXIT_OK);
    assert_eq!(count(&from_flag), 4);

    fs::write(&config, "[generator]\nno_such_key = 1\n").unwrap();
    assert_eq!(run(&["--config", s(&config), "-o", s(&dir.path().join("c")), "generate"]), EXIT_USAGE);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_vcsel-rul");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(EXIT_OK));
    assert_eq!(status(&["train"]), Some(EXIT_USAGE));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fleet");
    assert_eq!(status(&["-q", "-o", s(&out), "generate", "--devices", "3"]), Some(EXIT_OK));
    assert!(out.join("fleet.csv").exists());
}
