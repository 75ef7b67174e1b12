//! Compares backpropagated gradients of every network variant with central
//! finite differences.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use vcsel_rul::model::{ModelSpec, Network, Variant};

const STEP: f64 = 1e-5;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let window = [0.9, 0.7, 0.4];
    let conditions = [0.2, 0.8, 0.5, 0.3, 0.6, 0.1];
    let target = 0.35;

    for variant in Variant::ALL {
        let spec = ModelSpec {
            variant,
            conv_filters: vec![4, 4, 4],
            lstm_cells: vec![4, 3, 3],
            head_width: 6,
            seed: 1,
            ..ModelSpec::default()
        };
        let mut net = Network::build(&spec)?;
        // nudge biases off exactly zero
        let nudged: Vec<f64> = net.flat_params().iter().enumerate().map(|(i, v)| v + 0.01 * ((i % 7) as f64 - 3.0)).collect();
        net.load_flat(&nudged)?;

        let y = net.forward_train(&window, &conditions)?;
        net.backward(y - target)?;
        let analytic = net.flat_grads();

        let loss = |params: &[f64]| -> f64 {
            let mut n = net.clone();
            n.load_flat(params).unwrap();
            0.5 * (n.predict_one(&window, &conditions).unwrap() - target).powi(2)
        };
        let mut probe = nudged.clone();
        let mut worst = 0.0f64;
        for i in 0..probe.len() {
            probe[i] = nudged[i] + STEP;
            let up = loss(&probe);
            probe[i] = nudged[i] - STEP;
            let down = loss(&probe);
            probe[i] = nudged[i];
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max((analytic[i] - numeric).abs() / numeric.abs().max(1.0));
        }
        println!("{:<10} {:>5} params  worst relative error {worst:.2e}", variant.name(), analytic.len());
    }
    Ok(())
}
