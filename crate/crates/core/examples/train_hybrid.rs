//! Trains one network variant on a small fleet and reports test metrics.
//!
//! ```text
//! cargo run --release --example train_hybrid -- [variant] [epochs]
//! ```
//!
//! `variant` is one of hybrid, cnn-only, lstm-only, mlp.

use vcsel_rul::experiment::{self, ExperimentConfig};
use vcsel_rul::model::{self, Network, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().as_deref().unwrap_or("hybrid").parse()?;
    let epochs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(60);

    let mut cfg = ExperimentConfig::seeded(7);
    cfg.generator.device_count = 120;
    cfg.model.variant = variant;
    cfg.training.epochs = epochs;

    let (_, _, split) = experiment::prepare(&cfg)?;
    let network = Network::build(&cfg.model)?;
    println!("{variant}: {} parameters", network.param_count());

    let outcome = model::train_observed(network, &split, &cfg.training, &mut |e| {
        if e.epoch % 10 == 0 || e.epoch == 1 {
            println!("epoch {:4}  train {:.5}  val {:.5}", e.epoch, e.train_loss, e.val_loss);
        }
    })?;
    let meta = outcome.model.meta();
    println!(
        "kept epoch {:?} of {}{}",
        meta.best_epoch,
        meta.epochs_run,
        if outcome.stopped_early { " (stopped early)" } else { "" }
    );

    let report = experiment::evaluate_model(&outcome.model, &split.test, cfg.histogram_bins, &cfg.score)?;
    println!("test: rmse {:.1} h, mae {:.1} h, S {:.4e}", report.rmse_h, report.mae_h, report.score_s);
    Ok(())
}
