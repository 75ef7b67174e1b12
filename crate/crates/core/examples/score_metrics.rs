//! The asymmetric score next to RMSE and MAE: late predictions cost more
//! than early ones of the same size.
//!
//! ```text
//! cargo run --example score_metrics
//! ```

use vcsel_rul::metrics::{make_report, score_s, ScoreParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = ScoreParams::default();
    println!("a1 (early) = {} h, a2 (late) = {} h", params.a1, params.a2);
    println!("{:>8} {:>12} {:>12}", "|d| h", "early", "late");
    for d in [10.0, 100.0, 250.0, 500.0, 1000.0] {
        let early = score_s(&[1000.0], &[1000.0 - d], &params)?;
        let late = score_s(&[1000.0], &[1000.0 + d], &params)?;
        println!("{d:>8} {early:>12.4} {late:>12.4}");
    }

    let truth = [400.0, 900.0, 1500.0, 2200.0, 3100.0];
    let optimistic = [520.0, 1010.0, 1640.0, 2290.0, 3260.0];
    let cautious = [280.0, 790.0, 1360.0, 2110.0, 2940.0];
    for (name, pred) in [("optimistic", optimistic), ("cautious", cautious)] {
        let r = make_report(&truth, &pred, 4, &params)?;
        println!(
            "{name:<10} rmse {:>6.1}  mae {:>6.1}  S {:>7.3}  histogram {:?}",
            r.rmse_h, r.mae_h, r.score_s, r.error_histogram.counts
        );
    }
    Ok(())
}
