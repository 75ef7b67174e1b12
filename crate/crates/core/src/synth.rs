//! Synthetic accelerated-aging telemetry for VCSEL-like devices.
//!
//! Each device is held at constant operating conditions while its optical
//! output power follows `P(t) = P0 · (1 - k · t^m)` with multiplicative
//! Gaussian measurement noise. The rate `k` grows with current density and
//! junction temperature:
//!
//! ```text
//! k = A · J^n · exp(-Ea / (kB · Tj[K])) · exp(σ · z),   z ~ N(0, 1)
//! ```
//!
//! A device fails when its power first drops 20 % (about 1 dB) below the
//! first measurement; the crossing time is linearly interpolated between
//! the straddling samples. Traces are recorded up to and including the first
//! sample below threshold, or to the end of the test for survivors.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617_333_262e-5;
/// Power drop that defines failure (1 dB is rounded to 20 %).
pub const DEFAULT_DROP_FRACTION: f64 = 0.2;
/// Failures earlier than this are treated as manufacturing defects.
pub const INFANT_MORTALITY_HOURS: f64 = 100.0;
/// Aperture at which `resistance_ref_ohm` applies.
const RESISTANCE_REF_APERTURE_UM: f64 = 6.0;

pub const FLEET_FILE: &str = "fleet.csv";
pub const CONDITIONS_FILE: &str = "conditions.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("invalid device data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
}

/// Per-device constants, fed to the network in this field order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingConditions {
    pub oxide_aperture_um: f64,
    pub junction_temp_c: f64,
    pub current_ma: f64,
    pub ambient_temp_c: f64,
    pub current_density_ka_cm2: f64,
    pub resistance_ohm: f64,
}

impl OperatingConditions {
    /// `[OA, Tj, I, T, J, R]`
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.oxide_aperture_um,
            self.junction_temp_c,
            self.current_ma,
            self.ambient_temp_c,
            self.current_density_ka_cm2,
            self.resistance_ohm,
        ]
    }
}

/// Current density in kA/cm² through a circular aperture.
pub fn current_density_ka_cm2(current_ma: f64, aperture_um: f64) -> f64 {
    let radius_cm = aperture_um * 0.5e-4;
    let area_cm2 = std::f64::consts::PI * radius_cm * radius_cm;
    current_ma * 1e-3 / area_cm2 / 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub device_id: String,
    pub conditions: OperatingConditions,
    pub times_h: Vec<f64>,
    pub power_mw: Vec<f64>,
    pub failure_time_h: Option<f64>,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub device_count: usize,
    pub sampling_interval_h: f64,
    pub max_test_hours: f64,
    pub temperature_levels_c: Vec<f64>,
    pub current_levels_ma: Vec<f64>,
    pub oxide_aperture_levels_um: Vec<f64>,
    /// `A` in the rate law.
    pub rate_prefactor: f64,
    pub activation_energy_ev: f64,
    pub current_density_exponent: f64,
    pub time_exponent: f64,
    /// Log-normal device-to-device spread of the rate.
    pub rate_spread_log_std: f64,
    /// `Tj = T + self_heating_c_per_ma · I`
    pub self_heating_c_per_ma: f64,
    pub resistance_ref_ohm: f64,
    pub resistance_jitter_relative: f64,
    /// Initial power is mapped linearly from the current level onto this range.
    pub initial_power_min_mw: f64,
    pub initial_power_max_mw: f64,
    pub initial_power_jitter_relative: f64,
    pub noise_std_relative: f64,
    pub infant_mortality_fraction: f64,
    pub master_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            device_count: 240,
            sampling_interval_h: 50.0,
            max_test_hours: 3500.0,
            temperature_levels_c: vec![85.0, 100.0, 125.0, 150.0],
            current_levels_ma: vec![6.0, 8.0, 11.0, 14.0],
            oxide_aperture_levels_um: vec![4.0, 6.0, 8.0],
            rate_prefactor: 0.032,
            activation_energy_ev: 0.5,
            current_density_exponent: 1.5,
            time_exponent: 1.5,
            rate_spread_log_std: 0.25,
            self_heating_c_per_ma: 1.5,
            resistance_ref_ohm: 50.0,
            resistance_jitter_relative: 0.03,
            initial_power_min_mw: 1.0,
            initial_power_max_mw: 3.0,
            initial_power_jitter_relative: 0.01,
            noise_std_relative: 0.005,
            infant_mortality_fraction: 0.04,
            master_seed: 42,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if !(self.sampling_interval_h > 0.0) {
            return fail(format!("sampling_interval_h must be > 0, got {}", self.sampling_interval_h));
        }
        if !(self.max_test_hours >= self.sampling_interval_h) {
            return fail(format!(
                "max_test_hours ({}) must be ≥ sampling_interval_h ({})",
                self.max_test_hours, self.sampling_interval_h
            ));
        }
        for (name, levels) in [
            ("temperature_levels_c", &self.temperature_levels_c),
            ("current_levels_ma", &self.current_levels_ma),
            ("oxide_aperture_levels_um", &self.oxide_aperture_levels_um),
        ] {
            if levels.is_empty() {
                return fail(format!("{name} must not be empty"));
            }
        }
        if let Some(t) = self.temperature_levels_c.iter().find(|t| !(85.0..=150.0).contains(*t)) {
            return fail(format!("temperature level {t} °C outside the 85–150 °C sweep"));
        }
        if self.current_levels_ma.iter().chain(&self.oxide_aperture_levels_um).any(|v| !(*v > 0.0)) {
            return fail("currents and apertures must be positive".into());
        }
        if !(self.rate_prefactor > 0.0) || !self.rate_prefactor.is_finite() {
            return fail(format!(
                "rate_prefactor {} gives zero degradation rate for every device",
                self.rate_prefactor
            ));
        }
        if !(self.time_exponent > 0.0) {
            return fail(format!("time_exponent must be > 0, got {}", self.time_exponent));
        }
        if !(self.initial_power_min_mw > 0.0 && self.initial_power_max_mw >= self.initial_power_min_mw) {
            return fail("initial power range must be positive and ordered".into());
        }
        for (name, v) in [
            ("noise_std_relative", self.noise_std_relative),
            ("rate_spread_log_std", self.rate_spread_log_std),
            ("resistance_jitter_relative", self.resistance_jitter_relative),
            ("initial_power_jitter_relative", self.initial_power_jitter_relative),
        ] {
            if !(v >= 0.0) {
                return fail(format!("{name} must be ≥ 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.infant_mortality_fraction) {
            return fail(format!(
                "infant_mortality_fraction must lie in [0, 1], got {}",
                self.infant_mortality_fraction
            ));
        }
        Ok(())
    }

    /// Noise-free degradation rate for the given conditions.
    pub fn nominal_rate(&self, conditions: &OperatingConditions) -> f64 {
        let tj_k = conditions.junction_temp_c + 273.15;
        self.rate_prefactor
            * conditions.current_density_ka_cm2.powf(self.current_density_exponent)
            * (-self.activation_energy_ev / (BOLTZMANN_EV * tj_k)).exp()
    }

    /// Sample times `0, Δ, 2Δ, … ≤ max_test_hours`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.max_test_hours / self.sampling_interval_h + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.sampling_interval_h).collect()
    }
}

/// `P(t) = P0 · (1 - k · t^m)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationLaw {
    pub initial_power_mw: f64,
    pub rate: f64,
    pub time_exponent: f64,
}

impl DegradationLaw {
    pub fn power_at(&self, t_h: f64) -> f64 {
        self.initial_power_mw * (1.0 - self.rate * t_h.powf(self.time_exponent))
    }

    /// Closed-form time at which power has dropped by `drop_fraction`.
    pub fn failure_time(&self, drop_fraction: f64) -> f64 {
        (drop_fraction / self.rate).powf(1.0 / self.time_exponent)
    }
}

fn pick<R: Rng>(rng: &mut R, levels: &[f64]) -> f64 {
    levels[rng.random_range(0..levels.len())]
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Device identifier for a fleet index.
pub fn device_id(index: usize) -> String {
    format!("D{index:04}")
}

/// Per-device draws, shared by [`generate_device`] and [`device_law`]. The
/// returned RNG is positioned to draw measurement noise.
fn draw_device(config: &GeneratorConfig, index: usize) -> (OperatingConditions, DegradationLaw, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index as u64);

    let ambient = pick(&mut rng, &config.temperature_levels_c);
    let current = pick(&mut rng, &config.current_levels_ma);
    let aperture = pick(&mut rng, &config.oxide_aperture_levels_um);
    let resistance_z = normal(&mut rng);
    let power_z = normal(&mut rng);
    let rate_z = normal(&mut rng);
    let infant_u: f64 = rng.random();
    let infant_t: f64 = rng.random_range(10.0..95.0);

    let ratio = RESISTANCE_REF_APERTURE_UM / aperture;
    let conditions = OperatingConditions {
        oxide_aperture_um: aperture,
        junction_temp_c: ambient + config.self_heating_c_per_ma * current,
        current_ma: current,
        ambient_temp_c: ambient,
        current_density_ka_cm2: current_density_ka_cm2(current, aperture),
        resistance_ohm: config.resistance_ref_ohm
            * ratio
            * ratio
            * (1.0 + config.resistance_jitter_relative * resistance_z).max(0.5),
    };

    let (i_lo, i_hi) = config
        .current_levels_ma
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let position = if i_hi > i_lo { (current - i_lo) / (i_hi - i_lo) } else { 0.5 };
    let p0 = (config.initial_power_min_mw
        + (config.initial_power_max_mw - config.initial_power_min_mw) * position)
        * (1.0 + config.initial_power_jitter_relative * power_z).max(0.5);

    let m = config.time_exponent;
    let rate = if infant_u < config.infant_mortality_fraction {
        DEFAULT_DROP_FRACTION / infant_t.powf(m)
    } else {
        config.nominal_rate(&conditions) * (config.rate_spread_log_std * rate_z).exp()
    };
    let law = DegradationLaw {
        initial_power_mw: p0,
        rate,
        time_exponent: m,
    };
    (conditions, law, rng)
}

/// The noiseless law behind device `index`.
pub fn device_law(config: &GeneratorConfig, index: usize) -> DegradationLaw {
    draw_device(config, index).1
}

/// Generates device `index` of the fleet. Every device draws from its own
/// ChaCha stream keyed by `(master_seed, index)`, so the result does not
/// depend on which other devices are generated or in what order.
pub fn generate_device(config: &GeneratorConfig, index: usize) -> DeviceRecord {
    let (conditions, law, mut rng) = draw_device(config, index);
    let p0 = law.initial_power_mw;
    let mut times_h = Vec::new();
    let mut power_mw = Vec::new();
    let mut threshold = None;
    for t in config.sample_times() {
        let noise = 1.0 + config.noise_std_relative * normal(&mut rng);
        let p = (law.power_at(t) * noise).max(1e-3 * p0);
        times_h.push(t);
        power_mw.push(p);
        let thr = *threshold.get_or_insert(p * (1.0 - DEFAULT_DROP_FRACTION));
        if p < thr {
            break;
        }
    }
    let failure_time_h = detect_failure_in(&times_h, &power_mw, DEFAULT_DROP_FRACTION)
        .expect("generated traces have a positive first sample");
    DeviceRecord {
        device_id: device_id(index),
        conditions,
        times_h,
        power_mw,
        censored: failure_time_h.is_none(),
        failure_time_h,
    }
}

pub fn generate_fleet(config: &GeneratorConfig) -> Result<Vec<DeviceRecord>, SynthError> {
    config.validate()?;
    Ok((0..config.device_count)
        .map(|i| generate_device(config, i))
        .collect())
}

/// Failure time of a trace under the relative-drop rule, or `None` if the
/// power never falls below `P0 · (1 - drop_fraction)`.
pub fn detect_failure(record: &DeviceRecord, drop_fraction: f64) -> Result<Option<f64>, SynthError> {
    detect_failure_in(&record.times_h, &record.power_mw, drop_fraction)
        .map_err(|e| SynthError::Data(format!("{}: {e}", record.device_id)))
}

/// Slice form of [`detect_failure`]. Returns the crossing time interpolated
/// between the last sample at or above threshold and the first sample below.
pub fn detect_failure_in(times_h: &[f64], power_mw: &[f64], drop_fraction: f64) -> Result<Option<f64>, String> {
    if times_h.len() != power_mw.len() {
        return Err(format!(
            "{} times but {} power samples",
            times_h.len(),
            power_mw.len()
        ));
    }
    if power_mw.len() < 2 {
        return Err("need at least 2 samples to locate a failure".into());
    }
    if !(drop_fraction > 0.0 && drop_fraction < 1.0) {
        return Err(format!("drop fraction must lie in (0, 1), got {drop_fraction}"));
    }
    let p0 = power_mw[0];
    if !(p0 > 0.0) {
        return Err(format!("initial power must be positive, got {p0}"));
    }
    let threshold = p0 * (1.0 - drop_fraction);
    let Some(below) = power_mw.iter().position(|&p| p < threshold) else {
        return Ok(None);
    };
    let above = below - 1;
    let (t0, t1) = (times_h[above], times_h[below]);
    let (p_hi, p_lo) = (power_mw[above], power_mw[below]);
    Ok(Some(t0 + (p_hi - threshold) / (p_hi - p_lo) * (t1 - t0)))
}

/// Writes `fleet.csv` and `conditions.csv` into `dir`.
pub fn write_fleet(dir: &Path, fleet: &[DeviceRecord]) -> Result<(), SynthError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut series = String::from("device_id,time_h,power_mw\n");
    let mut conds = String::from("device_id,oa_um,tj_c,i_ma,t_c,j_ka_cm2,r_ohm,t_f_h,censored\n");
    for d in fleet {
        for (t, p) in d.times_h.iter().zip(&d.power_mw) {
            let _ = writeln!(series, "{},{t},{p}", d.device_id);
        }
        let c = &d.conditions;
        let t_f = d.failure_time_h.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            conds,
            "{},{},{},{},{},{},{},{t_f},{}",
            d.device_id,
            c.oxide_aperture_um,
            c.junction_temp_c,
            c.current_ma,
            c.ambient_temp_c,
            c.current_density_ka_cm2,
            c.resistance_ohm,
            d.censored
        );
    }
    let fleet_path = dir.join(FLEET_FILE);
    fs::write(&fleet_path, series).map_err(io_err(&fleet_path))?;
    let cond_path = dir.join(CONDITIONS_FILE);
    fs::write(&cond_path, conds).map_err(io_err(&cond_path))?;
    Ok(())
}

/// Reads a fleet written by [`write_fleet`]. Device order follows
/// `conditions.csv`.
pub fn read_fleet(dir: &Path) -> Result<Vec<DeviceRecord>, SynthError> {
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let conds_text = read(CONDITIONS_FILE)?;
    let series_text = read(FLEET_FILE)?;

    let parse_err = |file: &str, line: usize, message: String| SynthError::Parse {
        file: file.to_string(),
        line,
        message,
    };
    let num = |file: &str, line: usize, field: &str, s: &str| {
        s.parse::<f64>()
            .map_err(|_| parse_err(file, line, format!("field `{field}`: not a number: {s:?}")))
    };

    let mut fleet = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (n, line) in conds_text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(parse_err(CONDITIONS_FILE, n + 1, format!("expected 9 fields, got {}", f.len())));
        }
        let c = |k: usize, name: &str| num(CONDITIONS_FILE, n + 1, name, f[k]);
        let conditions = OperatingConditions {
            oxide_aperture_um: c(1, "oa_um")?,
            junction_temp_c: c(2, "tj_c")?,
            current_ma: c(3, "i_ma")?,
            ambient_temp_c: c(4, "t_c")?,
            current_density_ka_cm2: c(5, "j_ka_cm2")?,
            resistance_ohm: c(6, "r_ohm")?,
        };
        let failure_time_h = if f[7].is_empty() { None } else { Some(c(7, "t_f_h")?) };
        let censored = match f[8] {
            "true" => true,
            "false" => false,
            other => return Err(parse_err(CONDITIONS_FILE, n + 1, format!("field `censored`: {other:?}"))),
        };
        if censored != failure_time_h.is_none() {
            return Err(parse_err(
                CONDITIONS_FILE,
                n + 1,
                "censored flag disagrees with t_f_h".into(),
            ));
        }
        index.insert(f[0].to_string(), fleet.len());
        fleet.push(DeviceRecord {
            device_id: f[0].to_string(),
            conditions,
            times_h: Vec::new(),
            power_mw: Vec::new(),
            failure_time_h,
            censored,
        });
    }
    for (n, line) in series_text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(FLEET_FILE, n + 1, format!("expected 3 fields, got {}", f.len())));
        }
        let Some(&slot) = index.get(f[0]) else {
            return Err(parse_err(FLEET_FILE, n + 1, format!("unknown device {}", f[0])));
        };
        let t = num(FLEET_FILE, n + 1, "time_h", f[1])?;
        let p = num(FLEET_FILE, n + 1, "power_mw", f[2])?;
        let rec = &mut fleet[slot];
        if rec.times_h.last().is_some_and(|&last| t <= last) {
            return Err(parse_err(FLEET_FILE, n + 1, format!("time {t} not increasing for {}", f[0])));
        }
        rec.times_h.push(t);
        rec.power_mw.push(p);
    }
    Ok(fleet)
}
