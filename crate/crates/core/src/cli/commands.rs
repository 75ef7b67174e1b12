use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::manifest::ManifestBuilder;
use super::{
    require_exists, BuildDatasetArgs, CliError, CompareArgs, Context, EvaluateArgs, GenerateArgs, TrainArgs,
    CHECKPOINT_FILE, COMPARISON_JSON_FILE, COMPARISON_TEXT_FILE, LOSS_HISTORY_FILE,
};
use crate::dataset::{self, Sample, DATASET_FILE, SPLIT_FILE, STATS_FILE};
use crate::llsf::llsf_evaluate;
use crate::metrics::{make_report, EvalReport, ReportFile, REPORT_FILE};
use crate::model::{self, EpochLoss, ModelSpec, Network, TrainError, TrainedModel};
use crate::synth::{self, CONDITIONS_FILE, FLEET_FILE};

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn generate(mut ctx: Context, args: GenerateArgs) -> Result<(), CliError> {
    let g = &mut ctx.config.generator;
    if let Some(n) = args.devices {
        g.device_count = n;
    }
    if let Some(v) = args.interval_h {
        g.sampling_interval_h = v;
    }
    if let Some(v) = args.max_hours {
        g.max_test_hours = v;
    }
    if let Some(v) = args.noise {
        g.noise_std_relative = v;
    }
    g.validate()?;
    let g = g.clone();
    ctx.prepare_out()?;
    let manifest = ManifestBuilder::start("generate", g.master_seed, &g);
    let fleet = synth::generate_fleet(&g)?;
    synth::write_fleet(&ctx.out, &fleet)?;
    manifest.finish(&ctx.out)?;

    let failed = fleet.iter().filter(|d| !d.censored).count();
    let infant = fleet
        .iter()
        .filter(|d| d.failure_time_h.is_some_and(|t| t < synth::INFANT_MORTALITY_HOURS))
        .count();
    ctx.say(format!(
        "generated {} devices ({failed} failed, {} censored, {infant} infant failures) -> {}",
        fleet.len(),
        fleet.len() - failed,
        ctx.out.display()
    ));
    Ok(())
}

pub fn build_dataset(mut ctx: Context, args: BuildDatasetArgs) -> Result<(), CliError> {
    let fleet_csv = args.fleet.join(FLEET_FILE);
    require_exists(&fleet_csv, "fleet file")?;
    require_exists(&args.fleet.join(CONDITIONS_FILE), "conditions file")?;
    if let Some(w) = args.window {
        ctx.config.window = w;
    }
    if let Some(f) = args.train_fraction {
        ctx.config.train_fraction = f;
    }
    let cfg = &ctx.config;
    if cfg.window == 0 {
        return Err(CliError::Usage("window must be ≥ 1".into()));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(CliError::Usage(format!(
            "train fraction must lie in (0, 1), got {}",
            cfg.train_fraction
        )));
    }
    let resolved = json!({
        "window": cfg.window,
        "train_fraction": cfg.train_fraction,
        "split_seed": cfg.split_seed,
    });
    let fleet = synth::read_fleet(&args.fleet)?;
    let samples = dataset::build_samples(&fleet, cfg.window);
    let devices: BTreeSet<&str> = samples.iter().map(|s| s.device_id.as_str()).collect();

    ctx.prepare_out()?;
    let mut manifest = ManifestBuilder::start("build-dataset", cfg.split_seed, resolved);
    manifest.input(&fleet_csv);
    manifest.input(args.fleet.join(CONDITIONS_FILE));
    if samples.is_empty() {
        eprintln!(
            "warning: no device in {} failed after {} h; the dataset is empty",
            args.fleet.display(),
            synth::INFANT_MORTALITY_HOURS
        );
        dataset::write_empty_dataset(&ctx.out, cfg.split_seed)?;
        manifest.finish(&ctx.out)?;
        ctx.say("train: 0 samples, test: 0 samples");
        return Ok(());
    }
    if devices.len() < 2 {
        return Err(CliError::Usage(format!(
            "only {} device produced samples; a device-level split needs at least 2",
            devices.len()
        )));
    }
    let split = dataset::split(&samples, cfg.split_seed, cfg.train_fraction)?;
    dataset::write_dataset(&ctx.out, &samples, &split)?;
    manifest.finish(&ctx.out)?;
    ctx.say(format!(
        "train: {} samples from {} devices, test: {} samples from {} devices -> {}",
        split.train.len(),
        split.train_devices.len(),
        split.test.len(),
        split.test_devices.len(),
        ctx.out.display()
    ));
    Ok(())
}

fn dataset_inputs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    require_exists(dir, "dataset directory")?;
    let files: Vec<PathBuf> = [DATASET_FILE, STATS_FILE, SPLIT_FILE].iter().map(|f| dir.join(f)).collect();
    for f in &files {
        require_exists(f, "dataset file")?;
    }
    Ok(files)
}

fn loss_history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,best_val_loss\n");
    for h in history {
        writeln!(out, "{},{},{},{}", h.epoch, h.train_loss, h.val_loss, h.best_val_loss).unwrap();
    }
    out
}

pub fn train(mut ctx: Context, args: TrainArgs) -> Result<(), CliError> {
    let inputs = dataset_inputs(&args.dataset)?;
    let t = &mut ctx.config.training;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.optimizer {
        t.optimizer = v;
    }
    if let Some(v) = args.patience {
        t.patience = v;
    }
    if let Some(v) = args.validation_fraction {
        t.validation_fraction = v;
    }
    t.validate()?;
    if let Some(v) = args.variant {
        ctx.config.model.variant = v;
    }

    let (_, split) = dataset::read_dataset(&args.dataset)?;
    if split.train.is_empty() {
        return Err(CliError::Usage(format!(
            "dataset {} has no training samples",
            args.dataset.display()
        )));
    }
    let spec = ModelSpec {
        window: split.train[0].window_power.len(),
        ..ctx.config.model.clone()
    };
    let tcfg = ctx.config.training.clone();
    let network = Network::build(&spec)?;
    ctx.prepare_out()?;
    let mut manifest = ManifestBuilder::start("train", tcfg.seed, json!({ "model": spec, "training": tcfg }));
    for f in inputs {
        manifest.input(f);
    }

    let quiet = ctx.quiet;
    let result = model::train_observed(network, &split, &tcfg, &mut |e| {
        if !quiet && (e.epoch == 1 || e.epoch % 10 == 0) {
            eprintln!(
                "epoch {:4}  train {:.6}  val {:.6}  best {:.6}",
                e.epoch, e.train_loss, e.val_loss, e.best_val_loss
            );
        }
    });
    let ckpt = ctx.out.join(CHECKPOINT_FILE);
    match result {
        Ok(outcome) => {
            outcome.model.save(&ckpt)?;
            write_text(&ctx.out.join(LOSS_HISTORY_FILE), &loss_history_csv(&outcome.history))?;
            manifest.finish(&ctx.out)?;
            let meta = outcome.model.meta();
            ctx.say(format!(
                "trained {} for {} epochs (best epoch {}, val loss {}) -> {}",
                spec.variant,
                meta.epochs_run,
                meta.best_epoch.map_or("-".into(), |e| e.to_string()),
                meta.final_val_loss.map_or("-".into(), |v| format!("{v:.6}")),
                ckpt.display()
            ));
            Ok(())
        }
        Err(TrainError::NumericalFailure {
            epoch,
            last_good,
            history,
        }) => {
            last_good.save(&ckpt)?;
            write_text(&ctx.out.join(LOSS_HISTORY_FILE), &loss_history_csv(&history))?;
            manifest.finish(&ctx.out)?;
            Err(CliError::Numerical(format!(
                "training diverged in epoch {epoch}; last good parameters saved to {}",
                ckpt.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn trajectory_csv(samples: &[&Sample], pred: &[f64]) -> String {
    let mut out = String::from("time_h,rul_true_h,rul_pred_h\n");
    for (s, p) in samples.iter().zip(pred) {
        writeln!(out, "{},{},{}", s.window_end_time_h, s.rul_h, p).unwrap();
    }
    out
}

pub fn evaluate(ctx: Context, args: EvaluateArgs) -> Result<(), CliError> {
    let inputs = dataset_inputs(&args.dataset)?;
    let bins = args.bins.unwrap_or(ctx.config.histogram_bins);
    let score = ctx.config.score;
    let (samples, split) = dataset::read_dataset(&args.dataset)?;
    if split.test.is_empty() {
        return Err(CliError::Usage(format!("dataset {} has no test samples", args.dataset.display())));
    }
    let device_samples: Option<(String, Vec<&Sample>)> = match &args.device {
        Some(id) => {
            let mut mine: Vec<&Sample> = samples.iter().filter(|s| &s.device_id == id).collect();
            if mine.is_empty() {
                return Err(CliError::Usage(format!("device {id} has no samples in {}", args.dataset.display())));
            }
            mine.sort_by(|a, b| a.window_end_time_h.total_cmp(&b.window_end_time_h));
            Some((id.clone(), mine))
        }
        None => None,
    };

    let mut extra_inputs = Vec::new();
    let mut metadata = BTreeMap::new();
    metadata.insert("split_seed".to_string(), json!(split.split_seed));
    metadata.insert("stats_fingerprint".to_string(), json!(split.stats.fingerprint().to_string()));
    let (method, report, trajectory): (String, EvalReport, Option<Vec<f64>>) = if args.baseline.is_some() {
        let fleet_dir = args.fleet.as_ref().expect("clap enforces --fleet with --baseline");
        let fleet_csv = fleet_dir.join(FLEET_FILE);
        require_exists(&fleet_csv, "fleet file")?;
        extra_inputs.push(fleet_csv);
        extra_inputs.push(fleet_dir.join(CONDITIONS_FILE));
        let fleet = synth::read_fleet(fleet_dir)?;
        let report = llsf_evaluate(&split.test, &fleet, split.stats.rul_cap_h, bins, &score)?;
        let trajectory = match &device_samples {
            Some((_, mine)) => {
                let owned: Vec<Sample> = mine.iter().map(|s| (*s).clone()).collect();
                let r = llsf_evaluate(&owned, &fleet, split.stats.rul_cap_h, 1, &score)?;
                Some(r.pairs.iter().map(|(_, p)| *p).collect())
            }
            None => None,
        };
        ("llsf".to_string(), report, trajectory)
    } else {
        let path = args.checkpoint.as_ref().expect("clap enforces --checkpoint");
        require_exists(path, "checkpoint")?;
        extra_inputs.push(path.clone());
        let model = TrainedModel::load(path)?;
        if model.fingerprint() != split.stats.fingerprint() {
            return Err(CliError::Usage(format!(
                "checkpoint {} was trained with normalization {}, but {} uses {}",
                path.display(),
                model.fingerprint(),
                args.dataset.display(),
                split.stats.fingerprint()
            )));
        }
        let pred = model.predict_rul(&split.stats.apply_all(&split.test))?;
        let truth: Vec<f64> = split.test.iter().map(|s| s.rul_h).collect();
        let report = make_report(&truth, &pred, bins, &score)?;
        let trajectory = match &device_samples {
            Some((_, mine)) => {
                let owned: Vec<Sample> = mine.iter().map(|s| (*s).clone()).collect();
                Some(model.predict_rul(&split.stats.apply_all(&owned))?)
            }
            None => None,
        };
        metadata.insert("variant".to_string(), json!(model.network().spec().variant.name()));
        (model.network().spec().variant.name().to_string(), report, trajectory)
    };

    ctx.prepare_out()?;
    let mut manifest = ManifestBuilder::start(
        "evaluate",
        split.split_seed,
        json!({ "method": method, "histogram_bins": bins, "score": score, "device": args.device }),
    );
    for f in inputs.into_iter().chain(extra_inputs) {
        manifest.input(f);
    }
    report
        .write_files(&ctx.out, &method, metadata)
        .map_err(|e| CliError::io(&ctx.out, e))?;
    if let (Some((id, mine)), Some(pred)) = (&device_samples, &trajectory) {
        write_text(&ctx.out.join(format!("trajectory_{id}.csv")), &trajectory_csv(mine, pred))?;
    }
    manifest.finish(&ctx.out)?;
    ctx.say(format!(
        "{method}: n = {}, rmse = {:.2} h, mae = {:.2} h, S = {:.6e} -> {}",
        report.n,
        report.rmse_h,
        report.mae_h,
        report.score_s,
        ctx.out.join(REPORT_FILE).display()
    ));
    Ok(())
}

pub fn compare(ctx: Context, args: CompareArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for p in &args.reports {
        let file = if p.is_dir() { p.join(REPORT_FILE) } else { p.clone() };
        require_exists(&file, "report")?;
        let report = ReportFile::load(&file).map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => CliError::Usage(e.to_string()),
            _ => CliError::io(&file, e),
        })?;
        reports.push((file.display().to_string(), report));
        files.push(file);
    }
    let reference = match &args.reference {
        Some(name) => reports.iter().position(|(_, r)| &r.method == name).ok_or_else(|| {
            let names: Vec<&str> = reports.iter().map(|(_, r)| r.method.as_str()).collect();
            CliError::Usage(format!("no report for method {name:?} (have: {})", names.join(", ")))
        })?,
        None => 0,
    };
    let cmp = super::compare(&reports, reference);
    ctx.prepare_out()?;
    let mut manifest = ManifestBuilder::start(
        "compare",
        ctx.seed_flag.unwrap_or(0),
        json!({ "reference": cmp.reference }),
    );
    for f in files {
        manifest.input(f);
    }
    let text = cmp.to_text();
    write_text(&ctx.out.join(COMPARISON_TEXT_FILE), &text)?;
    let mut js = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
    js.push('\n');
    write_text(&ctx.out.join(COMPARISON_JSON_FILE), &js)?;
    manifest.finish(&ctx.out)?;
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    if !ctx.quiet {
        print!("{text}");
    }
    Ok(())
}
