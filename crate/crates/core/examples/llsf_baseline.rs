//! The least-squares baseline: fit a line to a device's power history and
//! extrapolate to the failure threshold.
//!
//! ```text
//! cargo run --example llsf_baseline
//! ```

use vcsel_rul::dataset::{self, RUL_CAP_H};
use vcsel_rul::llsf::{llsf_evaluate, llsf_predict_rul, LlsfFit};
use vcsel_rul::metrics::ScoreParams;
use vcsel_rul::synth::{self, GeneratorConfig, DEFAULT_DROP_FRACTION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fleet = synth::generate_fleet(&GeneratorConfig { device_count: 60, ..GeneratorConfig::default() })?;
    let device = dataset::filter_devices(&fleet).into_iter().next().ok_or("no failed device")?;
    let t_f = device.failure_time_h.unwrap();
    let threshold = device.power_mw[0] * (1.0 - DEFAULT_DROP_FRACTION);
    println!("{}: fails at {t_f:.0} h, threshold {threshold:.4} mW", device.device_id);

    println!("{:>8} {:>10} {:>10} {:>10}", "now_h", "slope", "pred_rul", "true_rul");
    for k in (3..device.times_h.len()).step_by(6) {
        let (times, powers) = (&device.times_h[..k], &device.power_mw[..k]);
        let now = times[k - 1];
        let fit = LlsfFit::fit(times, powers)?;
        let pred = llsf_predict_rul(times, powers, now, threshold, RUL_CAP_H)?;
        println!("{now:>8.0} {:>10.2e} {pred:>10.0} {:>10.0}", fit.slope, t_f - now);
    }

    let samples = dataset::build_samples(&fleet, dataset::DEFAULT_WINDOW);
    let report = llsf_evaluate(&samples, &fleet, RUL_CAP_H, 40, &ScoreParams::default())?;
    println!(
        "\nwhole fleet: {} samples, rmse {:.1} h, mae {:.1} h, S {:.4e}",
        report.n, report.rmse_h, report.mae_h, report.score_s
    );
    Ok(())
}
