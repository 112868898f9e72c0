//! Seeded synthetic cabin telemetry.
//!
//! Produces 1 Hz frames with an orbital magnetic signature, crew-activity CO2
//! square waves, sparse acceleration spikes, and particulate bursts that
//! tend to follow those spikes within a minute. That spike-to-burst lag is
//! the signal a forecaster can learn.
//!
//! Baselines (pressure 1013 hPa, 23 °C, 40 %RH, 2500 ppm CO2, ~40 µT) are
//! plausible fixture values, not measurements.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::frame::TelemetryFrame;
use super::TelemetryError;

pub const BASE_PRESSURE_HPA: f64 = 1013.0;
pub const BASE_TEMP_C: f64 = 23.0;
pub const BASE_RH_PCT: f64 = 40.0;
pub const BASE_CO2_PPM: f64 = 2500.0;
pub const CREW_CO2_RISE_PPM: f64 = 400.0;
/// Cabin ventilation time constant smoothing the crew CO2 square wave.
pub const CO2_VENT_TAU_S: f64 = 300.0;
pub const BASE_MAG_UT: f64 = 40.0;

/// Mass per particle (µg/m³ per count/0.1 L) for the size bins
/// 0.3–0.5, 0.5–1, 1–2.5, 2.5–5, 5–10 and >10 µm.
pub const BIN_MASS_COEFF: [f64; 6] = [0.01, 0.03, 0.15, 1.0, 4.0, 10.0];

/// Mean cumulative fraction of the >0.3 µm count seen in each ladder step.
const LADDER_FRACTIONS: [f64; 6] = [1.0, 0.35, 0.12, 0.03, 0.008, 0.002];

/// Derives PM1.0, PM2.5 and PM10 mass from cumulative counts by a fixed
/// linear map over the differential size bins.
pub fn mass_from_counts(counts: &[f64; 6]) -> [f64; 3] {
    let mut bins = [0.0; 6];
    for k in 0..5 {
        bins[k] = counts[k] - counts[k + 1];
    }
    bins[5] = counts[5];
    let m: Vec<f64> = bins.iter().zip(BIN_MASS_COEFF).map(|(b, c)| b * c).collect();
    let pm1 = m[0] + m[1];
    let pm2_5 = pm1 + m[2];
    let pm10 = pm2_5 + m[3] + m[4];
    [pm1, pm2_5, pm10]
}

/// Per-channel noise standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub pressure_hpa: f64,
    pub temp_c: f64,
    pub rh_pct: f64,
    pub co2_ppm: f64,
    pub accel_g: f64,
    pub mag_ut: f64,
    /// Relative (multiplicative) noise on particle counts.
    pub count_rel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            pressure_hpa: 0.05,
            temp_c: 0.02,
            rh_pct: 0.1,
            co2_ppm: 5.0,
            accel_g: 0.01,
            mag_ut: 0.2,
            count_rel: 0.05,
        }
    }
}

impl NoiseConfig {
    pub fn zero() -> Self {
        Self {
            pressure_hpa: 0.0,
            temp_c: 0.0,
            rh_pct: 0.0,
            co2_ppm: 0.0,
            accel_g: 0.0,
            mag_ut: 0.0,
            count_rel: 0.0,
        }
    }
}

/// An acceleration spike placed at a fixed offset, optionally followed by a
/// particulate burst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEvent {
    pub offset_s: u64,
    pub spike_g: f64,
    /// Delay from the spike to burst onset; `None` means no burst.
    pub burst_delay_s: Option<u64>,
    /// Peak >0.3 µm count of the burst.
    pub peak_pc03: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub start_s: i64,
    pub duration_s: u64,
    pub orbital_period_s: u64,
    /// Base rate of acceleration spikes while the crew is idle.
    pub event_rate_per_hour: f64,
    /// Probability that an acceleration spike resuspends particulates.
    pub resuspension_gain: f64,
    /// Spike-rate multiplier while crew activity (high CO2) is on.
    pub crew_activity_gain: f64,
    /// Rate of bursts with no preceding spike, as a fraction of the spike rate.
    pub spontaneous_fraction: f64,
    pub burst_delay_min_s: u64,
    pub burst_delay_max_s: u64,
    pub burst_decay_s: f64,
    /// Median peak >0.3 µm count of a burst. The default puts a median
    /// burst's PM2.5 peak near 300 µg/m³.
    pub burst_peak_pc03: f64,
    pub crew_cycle_s: u64,
    pub crew_duty: f64,
    pub noise: NoiseConfig,
    /// Emit an occasional second reading within the same second.
    pub emit_duplicates: bool,
    pub duplicate_fraction: f64,
    pub scripted_events: Vec<ScriptedEvent>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            start_s: 1_640_995_200,
            duration_s: 86_400,
            orbital_period_s: 5_400,
            event_rate_per_hour: 6.0,
            resuspension_gain: 0.9,
            crew_activity_gain: 2.0,
            spontaneous_fraction: 0.1,
            burst_delay_min_s: 5,
            burst_delay_max_s: 60,
            burst_decay_s: 20.0,
            burst_peak_pc03: 12000.0,
            crew_cycle_s: 7_200,
            crew_duty: 0.5,
            noise: NoiseConfig::default(),
            emit_duplicates: false,
            duplicate_fraction: 0.01,
            scripted_events: Vec::new(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        let bad = |m: &str| Err(TelemetryError::InvalidConfig(m.to_string()));
        if self.duration_s == 0 {
            return bad("duration_s must be > 0");
        }
        if self.orbital_period_s == 0 {
            return bad("orbital_period_s must be > 0");
        }
        if !self.event_rate_per_hour.is_finite() || self.event_rate_per_hour < 0.0 {
            return bad("event_rate_per_hour must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.resuspension_gain) {
            return bad("resuspension_gain must lie in [0, 1]");
        }
        if self.crew_activity_gain < 0.0 || self.spontaneous_fraction < 0.0 {
            return bad("gains must be >= 0");
        }
        if self.burst_delay_min_s > self.burst_delay_max_s {
            return bad("burst_delay_min_s exceeds burst_delay_max_s");
        }
        if self.burst_decay_s.is_nan() || self.burst_decay_s <= 0.0 {
            return bad("burst_decay_s must be > 0");
        }
        if self.crew_cycle_s == 0 || !(0.0..=1.0).contains(&self.crew_duty) {
            return bad("crew cycle must be > 0 with duty in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Burst {
    onset: u64,
    peak: f64,
    fractions: [f64; 6],
}

const BURST_RISE_S: f64 = 3.0;

impl Burst {
    fn level(&self, t: u64, decay_s: f64) -> f64 {
        if t < self.onset {
            return 0.0;
        }
        let dt = (t - self.onset) as f64;
        if dt < BURST_RISE_S {
            self.peak * (dt + 1.0) / (BURST_RISE_S + 1.0)
        } else {
            self.peak * (-(dt - BURST_RISE_S) / decay_s).exp()
        }
    }
}

// Acceleration events are sustained offsets along the longitudinal (+x)
// axis, where crew translation and hatch operations push: a few noise sigmas
// high, so they are learnable yet survive robust-z outlier screening.
#[derive(Debug, Clone)]
struct Spike {
    at: u64,
    accel: [f64; 3],
}

pub const SPIKE_DURATION_S: u64 = 20;
pub const SPIKE_MIN_G: f64 = 0.015;
pub const SPIKE_MAX_G: f64 = 0.025;

fn crew_active(cfg: &SynthConfig, t: u64, phase: u64) -> bool {
    let pos = (t + phase) % cfg.crew_cycle_s;
    (pos as f64) < cfg.crew_duty * cfg.crew_cycle_s as f64
}

fn draw_fractions(rng: &mut ChaCha8Rng) -> [f64; 6] {
    let mut f = [1.0; 6];
    for k in 1..6 {
        let ratio = LADDER_FRACTIONS[k] / LADDER_FRACTIONS[k - 1];
        let jitter: f64 = rng.random_range(0.8..1.2);
        f[k] = f[k - 1] * (ratio * jitter).min(1.0);
    }
    f
}

fn draw_peak(rng: &mut ChaCha8Rng, median: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    median * (0.4 * z).exp()
}

/// Generates `duration_s` seconds of 1 Hz telemetry. Output is a pure
/// function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<TelemetryFrame>, TelemetryError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let crew_phase = rng.random_range(0..cfg.crew_cycle_s);
    let orbit_phase: f64 = rng.random_range(0.0..TAU);

    // Event schedule first, so noise draws never perturb event timing.
    let mut spikes: Vec<Spike> = Vec::new();
    let mut bursts: Vec<Burst> = Vec::new();
    let p_base = cfg.event_rate_per_hour / 3600.0;
    for t in 0..cfg.duration_s {
        let p_spike = if crew_active(cfg, t, crew_phase) {
            p_base * cfg.crew_activity_gain
        } else {
            p_base
        };
        let u_spike: f64 = rng.random();
        let u_spont: f64 = rng.random();
        if u_spike < p_spike {
            let magnitude: f64 = rng.random_range(SPIKE_MIN_G..SPIKE_MAX_G);
            spikes.push(Spike {
                at: t,
                accel: [magnitude, 0.0, 0.0],
            });
            let u_burst: f64 = rng.random();
            if u_burst < cfg.resuspension_gain {
                let delay = rng.random_range(cfg.burst_delay_min_s..=cfg.burst_delay_max_s);
                let peak = draw_peak(&mut rng, cfg.burst_peak_pc03);
                let fractions = draw_fractions(&mut rng);
                bursts.push(Burst {
                    onset: t + delay,
                    peak,
                    fractions,
                });
            }
        }
        if u_spont < p_base * cfg.spontaneous_fraction {
            let peak = draw_peak(&mut rng, cfg.burst_peak_pc03);
            let fractions = draw_fractions(&mut rng);
            bursts.push(Burst {
                onset: t,
                peak,
                fractions,
            });
        }
    }
    for ev in &cfg.scripted_events {
        spikes.push(Spike {
            at: ev.offset_s,
            accel: [ev.spike_g, 0.0, 0.0],
        });
        if let Some(delay) = ev.burst_delay_s {
            let fractions = draw_fractions(&mut rng);
            bursts.push(Burst {
                onset: ev.offset_s + delay,
                peak: ev.peak_pc03,
                fractions,
            });
        }
    }

    let mut co2_level = Vec::with_capacity(cfg.duration_s as usize);
    let alpha = 1.0 - (-1.0 / CO2_VENT_TAU_S).exp();
    let mut level = if crew_active(cfg, 0, crew_phase) {
        CREW_CO2_RISE_PPM
    } else {
        0.0
    };
    for t in 0..cfg.duration_s {
        let drive = if crew_active(cfg, t, crew_phase) {
            CREW_CO2_RISE_PPM
        } else {
            0.0
        };
        level += alpha * (drive - level);
        co2_level.push(BASE_CO2_PPM + level);
    }

    let n = &cfg.noise;
    let mut frames = Vec::with_capacity(cfg.duration_s as usize);
    for t in 0..cfg.duration_s {
        let theta = TAU * t as f64 / cfg.orbital_period_s as f64 + orbit_phase;
        let emit = |rng: &mut ChaCha8Rng, frames: &mut Vec<TelemetryFrame>| {
            let mut gauss = |sd: f64| -> f64 {
                if sd == 0.0 {
                    0.0
                } else {
                    let v: f64 = StandardNormal.sample(&mut *rng);
                    sd * v
                }
            };
            let co2 = co2_level[t as usize] + gauss(n.co2_ppm);
            let mut accel = [gauss(n.accel_g), gauss(n.accel_g), gauss(n.accel_g)];
            for s in &spikes {
                if s.at <= t && t - s.at < SPIKE_DURATION_S {
                    for (a, d) in accel.iter_mut().zip(&s.accel) {
                        *a += d;
                    }
                }
            }
            let mag = [
                BASE_MAG_UT * theta.cos() + gauss(n.mag_ut),
                0.5 * BASE_MAG_UT * theta.sin() + gauss(n.mag_ut),
                0.3 * BASE_MAG_UT + gauss(n.mag_ut),
            ];
            let mut levels = [0.0f64; 6];
            for b in &bursts {
                let l = b.level(t, cfg.burst_decay_s);
                if l > 0.0 {
                    for (lv, f) in levels.iter_mut().zip(&b.fractions) {
                        *lv += l * f;
                    }
                }
            }
            let mut counts = [0.0; 6];
            if levels[0] > 0.0 {
                let mult = (1.0 + gauss(n.count_rel)).max(0.0);
                for k in 0..6 {
                    counts[k] = (levels[k] * mult).round();
                }
            }
            let rh = (BASE_RH_PCT - 1.0 * theta.sin() + gauss(n.rh_pct)).clamp(0.0, 100.0);
            frames.push(TelemetryFrame {
                timestamp_s: cfg.start_s + t as i64,
                pressure_hpa: BASE_PRESSURE_HPA + gauss(n.pressure_hpa),
                temp_c: BASE_TEMP_C + 0.3 * theta.sin() + gauss(n.temp_c),
                rh_pct: rh,
                co2_ppm: co2,
                accel_g: accel,
                mag_ut: mag,
                particle_counts: counts,
                pm_mass_ugm3: mass_from_counts(&counts),
            });
        };
        emit(&mut rng, &mut frames);
        if cfg.emit_duplicates {
            let u: f64 = rng.random();
            if u < cfg.duplicate_fraction {
                emit(&mut rng, &mut frames);
            }
        }
    }
    Ok(frames)
}
