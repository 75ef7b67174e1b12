//! Turns a fleet into labelled windows, splits by device and fits the
//! normalization statistics on the train side.
//!
//! ```text
//! cargo run --example build_dataset
//! ```

use vcsel_rul::dataset::{self, CONDITION_NAMES};
use vcsel_rul::synth::{self, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fleet = synth::generate_fleet(&GeneratorConfig { device_count: 80, ..GeneratorConfig::default() })?;
    let kept = dataset::filter_devices(&fleet);
    let samples = dataset::build_samples(&fleet, dataset::DEFAULT_WINDOW);
    println!(
        "{} of {} devices usable, {} windows of {} points",
        kept.len(),
        fleet.len(),
        samples.len(),
        dataset::DEFAULT_WINDOW
    );

    let s = &samples[0];
    println!(
        "first window: {} powers {:?} ending at {} h, RUL {} h",
        s.device_id, s.window_power, s.window_end_time_h, s.rul_h
    );

    let split = dataset::split(&samples, 42, dataset::DEFAULT_TRAIN_FRACTION)?;
    println!(
        "train {} samples / {} devices, test {} samples / {} devices (fraction {:.3})",
        split.train.len(),
        split.train_devices.len(),
        split.test.len(),
        split.test_devices.len(),
        split.train_fraction()
    );

    let stats = &split.stats;
    for (name, range) in CONDITION_NAMES.iter().zip(&stats.conditions) {
        println!("  {name:<9} [{:.3}, {:.3}]", range.min, range.max);
    }
    let n = stats.apply(&split.test[0]);
    println!("normalized test window {:?}, target {:.4}", n.window, n.target);
    Ok(())
}
