//! Simulates an aging fleet and summarizes failure times per junction
//! temperature. Pass a directory to also write `fleet.csv` and
//! `conditions.csv` there.
//!
//! ```text
//! cargo run --example generate_fleet -- [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use vcsel_rul::synth::{self, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GeneratorConfig { device_count: 120, ..GeneratorConfig::default() };
    let fleet = synth::generate_fleet(&config)?;

    let censored = fleet.iter().filter(|d| d.censored).count();
    println!("{} devices, {} censored at {} h", fleet.len(), censored, config.max_test_hours);

    // ambient temperature -> failure times
    let mut by_temp: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for d in &fleet {
        if let Some(t_f) = d.failure_time_h {
            by_temp.entry(d.conditions.ambient_temp_c as i64).or_default().push(t_f);
        }
    }
    println!("{:>6} {:>6} {:>12}", "T_c", "failed", "median_t_f_h");
    for (t, mut times) in by_temp {
        times.sort_by(f64::total_cmp);
        println!("{t:>6} {:>6} {:>12.0}", times.len(), times[times.len() / 2]);
    }

    let d = &fleet[0];
    println!("\n{} at Tj {:.1} C, I {} mA:", d.device_id, d.conditions.junction_temp_c, d.conditions.current_ma);
    for (t, p) in d.times_h.iter().zip(&d.power_mw).step_by(8) {
        println!("  {t:>6.0} h  {p:.4} mW");
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        synth::write_fleet(&dir, &fleet)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
