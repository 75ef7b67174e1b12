//! End-to-end benchmark: hybrid network vs. least-squares baseline on a
//! synthetic fleet.
//!
//! ```text
//! cargo run --release --example benchmark -- [seed]
//! ```

use std::time::Instant;

use vcsel_rul::experiment::{self, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let cfg = ExperimentConfig::seeded(seed);
    let start = Instant::now();
    let res = experiment::run_observed(&cfg, &mut |e| {
        if e.epoch % 10 == 0 {
            eprintln!("epoch {:4}  train {:.5}  val {:.5}", e.epoch, e.train_loss, e.val_loss);
        }
    })?;
    println!(
        "seed {seed}: {} devices, {} train / {} test samples, {} epochs in {:.1?}",
        res.fleet.len(),
        res.split.train.len(),
        res.split.test.len(),
        res.training.history.len(),
        start.elapsed()
    );
    println!("{:<8} {:>10} {:>10} {:>14}", "method", "rmse_h", "mae_h", "score_s");
    for (name, r) in [("hybrid", &res.model_report), ("llsf", &res.baseline_report)] {
        println!("{name:<8} {:>10.1} {:>10.1} {:>14.4e}", r.rmse_h, r.mae_h, r.score_s);
    }
    Ok(())
}
