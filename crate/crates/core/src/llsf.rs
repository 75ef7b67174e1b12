//! Conventional baseline: fit a straight line to power vs. time by least
//! squares and extrapolate it to the failure threshold.

use std::collections::HashMap;

use thiserror::Error;

use crate::dataset::Sample;
use crate::metrics::{make_report, EvalReport, MetricsError, ScoreParams};
use crate::synth::{DeviceRecord, DEFAULT_DROP_FRACTION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlsfError {
    #[error("least-squares fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("least-squares fit needs distinct times")]
    DegenerateTimes,
    #[error("{0} times but {1} power values")]
    LengthMismatch(usize, usize),
    #[error("no device record for {0}")]
    MissingDevice(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Straight line `power = intercept + slope · t` fitted to `n_points`
/// measurements spanning `[first_time_h, last_time_h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlsfFit {
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
    pub first_time_h: f64,
    pub last_time_h: f64,
}

impl LlsfFit {
    pub fn fit(times_h: &[f64], powers: &[f64]) -> Result<Self, LlsfError> {
        if times_h.len() != powers.len() {
            return Err(LlsfError::LengthMismatch(times_h.len(), powers.len()));
        }
        let n = times_h.len();
        if n < 2 {
            return Err(LlsfError::TooFewPoints(n));
        }
        let nf = n as f64;
        let t_mean = times_h.iter().sum::<f64>() / nf;
        let p_mean = powers.iter().sum::<f64>() / nf;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (t, p) in times_h.iter().zip(powers) {
            let dt = t - t_mean;
            sxx += dt * dt;
            sxy += dt * (p - p_mean);
        }
        if sxx == 0.0 {
            return Err(LlsfError::DegenerateTimes);
        }
        let slope = sxy / sxx;
        Ok(Self {
            slope,
            intercept: p_mean - slope * t_mean,
            n_points: n,
            first_time_h: times_h.iter().copied().fold(f64::INFINITY, f64::min),
            last_time_h: times_h.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Time at which the fitted line reaches `threshold`, if it is falling.
    pub fn crossing_time(&self, threshold: f64) -> Option<f64> {
        (self.slope < 0.0).then(|| (threshold - self.intercept) / self.slope)
    }
}

/// RUL from a line fitted to the given history, clamped to `[0, rul_cap_h]`.
/// A flat or rising fit returns the cap; a crossing already behind `now_h`
/// returns 0.
pub fn llsf_predict_rul(
    times_h: &[f64],
    powers: &[f64],
    now_h: f64,
    threshold_power: f64,
    rul_cap_h: f64,
) -> Result<f64, LlsfError> {
    let fit = LlsfFit::fit(times_h, powers)?;
    let Some(t_cross) = fit.crossing_time(threshold_power) else {
        return Ok(rul_cap_h);
    };
    let rul = t_cross - now_h;
    if !rul.is_finite() {
        return Ok(if rul > 0.0 { rul_cap_h } else { 0.0 });
    }
    Ok(rul.clamp(0.0, rul_cap_h))
}

/// Scores the baseline on `samples`, fitting each one on its device's full
/// history up to the sample's window end.
pub fn llsf_evaluate(
    samples: &[Sample],
    fleet: &[DeviceRecord],
    rul_cap_h: f64,
    histogram_bins: usize,
    score: &ScoreParams,
) -> Result<EvalReport, LlsfError> {
    let by_id: HashMap<&str, &DeviceRecord> =
        fleet.iter().map(|d| (d.device_id.as_str(), d)).collect();
    let mut truth = Vec::with_capacity(samples.len());
    let mut pred = Vec::with_capacity(samples.len());
    for s in samples {
        let device = by_id
            .get(s.device_id.as_str())
            .ok_or_else(|| LlsfError::MissingDevice(s.device_id.clone()))?;
        let visible = device.times_h.partition_point(|&t| t <= s.window_end_time_h);
        let threshold = device.power_mw[0] * (1.0 - DEFAULT_DROP_FRACTION);
        let rul = llsf_predict_rul(
            &device.times_h[..visible],
            &device.power_mw[..visible],
            s.window_end_time_h,
            threshold,
            rul_cap_h,
        )?;
        truth.push(s.rul_h);
        pred.push(rul);
    }
    Ok(make_report(&truth, &pred, histogram_bins, score)?)
}
