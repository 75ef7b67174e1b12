//! Saves a briefly trained model, reloads it and checks that predictions
//! are bit-identical.
//!
//! ```text
//! cargo run --release --example checkpoint
//! ```

use vcsel_rul::experiment::{self, ExperimentConfig};
use vcsel_rul::model::{self, Network, TrainedModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::seeded(3);
    cfg.generator.device_count = 40;
    cfg.training.epochs = 5;
    let (_, _, split) = experiment::prepare(&cfg)?;
    let trained = model::train(Network::build(&cfg.model)?, &split, &cfg.training)?.model;

    let path = std::env::temp_dir().join("vcsel-rul-example.ckpt");
    trained.save(&path)?;
    let text = std::fs::read_to_string(&path)?;
    println!("wrote {} ({} lines); header:", path.display(), text.lines().count());
    for line in text.lines().take_while(|l| *l != "[params]").take(8) {
        println!("  {line}");
    }

    let loaded = TrainedModel::load(&path)?;
    let before = trained.predict_samples(&split.test)?;
    let after = loaded.predict_samples(&split.test)?;
    let identical = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("{} test predictions identical after reload: {identical}", before.len());
    std::fs::remove_file(&path)?;
    Ok(())
}
