use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TelemetryError;

/// Missing-value sentinel held in memory. Serialized as an empty CSV cell.
pub const MISSING: f64 = f64::NAN;

/// Size thresholds (µm) of the cumulative particle-count ladder.
pub const COUNT_LADDER_UM: [f64; 6] = [0.3, 0.5, 1.0, 2.5, 5.0, 10.0];

/// One sensor channel of a [`TelemetryFrame`], in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Channel {
    PressureHpa,
    TempC,
    RhPct,
    Co2Ppm,
    AccelX,
    AccelY,
    AccelZ,
    MagX,
    MagY,
    MagZ,
    Pc0_3,
    Pc0_5,
    Pc1_0,
    Pc2_5,
    Pc5_0,
    Pc10_0,
    Pm1,
    Pm2_5,
    Pm10,
}

impl Channel {
    pub const ALL: [Channel; 19] = [
        Channel::PressureHpa,
        Channel::TempC,
        Channel::RhPct,
        Channel::Co2Ppm,
        Channel::AccelX,
        Channel::AccelY,
        Channel::AccelZ,
        Channel::MagX,
        Channel::MagY,
        Channel::MagZ,
        Channel::Pc0_3,
        Channel::Pc0_5,
        Channel::Pc1_0,
        Channel::Pc2_5,
        Channel::Pc5_0,
        Channel::Pc10_0,
        Channel::Pm1,
        Channel::Pm2_5,
        Channel::Pm10,
    ];

    pub const COUNTS: [Channel; 6] = [
        Channel::Pc0_3,
        Channel::Pc0_5,
        Channel::Pc1_0,
        Channel::Pc2_5,
        Channel::Pc5_0,
        Channel::Pc10_0,
    ];

    /// Column name in the canonical CSV header.
    pub fn name(self) -> &'static str {
        match self {
            Channel::PressureHpa => "pressure_hpa",
            Channel::TempC => "temp_c",
            Channel::RhPct => "rh_pct",
            Channel::Co2Ppm => "co2_ppm",
            Channel::AccelX => "accel_x_g",
            Channel::AccelY => "accel_y_g",
            Channel::AccelZ => "accel_z_g",
            Channel::MagX => "mag_x_ut",
            Channel::MagY => "mag_y_ut",
            Channel::MagZ => "mag_z_ut",
            Channel::Pc0_3 => "pc0_3",
            Channel::Pc0_5 => "pc0_5",
            Channel::Pc1_0 => "pc1_0",
            Channel::Pc2_5 => "pc2_5",
            Channel::Pc5_0 => "pc5_0",
            Channel::Pc10_0 => "pc10_0",
            Channel::Pm1 => "pm1_ugm3",
            Channel::Pm2_5 => "pm2_5_ugm3",
            Channel::Pm10 => "pm10_ugm3",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::PressureHpa => "hPa",
            Channel::TempC => "degC",
            Channel::RhPct => "%",
            Channel::Co2Ppm => "ppm",
            Channel::AccelX | Channel::AccelY | Channel::AccelZ => "g",
            Channel::MagX | Channel::MagY | Channel::MagZ => "uT",
            Channel::Pc0_3 | Channel::Pc0_5 | Channel::Pc1_0 | Channel::Pc2_5 | Channel::Pc5_0 | Channel::Pc10_0 => {
                "count/0.1L"
            }
            Channel::Pm1 | Channel::Pm2_5 | Channel::Pm10 => "ug/m3",
        }
    }

    /// Particle counts and particulate mass cannot be negative.
    pub fn is_particulate(self) -> bool {
        matches!(
            self,
            Channel::Pc0_3
                | Channel::Pc0_5
                | Channel::Pc1_0
                | Channel::Pc2_5
                | Channel::Pc5_0
                | Channel::Pc10_0
                | Channel::Pm1
                | Channel::Pm2_5
                | Channel::Pm10
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| TelemetryError::UnknownChannel(s.to_string()))
    }
}

impl From<Channel> for String {
    fn from(c: Channel) -> Self {
        c.name().to_string()
    }
}

impl TryFrom<String> for Channel {
    type Error = TelemetryError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One timestamped reading of every sensor channel.
///
/// Any value may be [`MISSING`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryFrame {
    pub timestamp_s: i64,
    pub pressure_hpa: f64,
    pub temp_c: f64,
    pub rh_pct: f64,
    pub co2_ppm: f64,
    pub accel_g: [f64; 3],
    pub mag_ut: [f64; 3],
    /// Cumulative counts per 0.1 L of particles larger than each
    /// [`COUNT_LADDER_UM`] size.
    pub particle_counts: [f64; 6],
    /// PM1.0, PM2.5, PM10 mass concentration.
    pub pm_mass_ugm3: [f64; 3],
}

impl TelemetryFrame {
    /// A frame with every channel missing.
    pub fn empty(timestamp_s: i64) -> Self {
        Self::from_values(timestamp_s, &[MISSING; 19])
    }

    pub fn from_values(timestamp_s: i64, v: &[f64; 19]) -> Self {
        Self {
            timestamp_s,
            pressure_hpa: v[0],
            temp_c: v[1],
            rh_pct: v[2],
            co2_ppm: v[3],
            accel_g: [v[4], v[5], v[6]],
            mag_ut: [v[7], v[8], v[9]],
            particle_counts: [v[10], v[11], v[12], v[13], v[14], v[15]],
            pm_mass_ugm3: [v[16], v[17], v[18]],
        }
    }

    /// Channel values in canonical order.
    pub fn values(&self) -> [f64; 19] {
        let mut v = [0.0; 19];
        v[0] = self.pressure_hpa;
        v[1] = self.temp_c;
        v[2] = self.rh_pct;
        v[3] = self.co2_ppm;
        v[4..7].copy_from_slice(&self.accel_g);
        v[7..10].copy_from_slice(&self.mag_ut);
        v[10..16].copy_from_slice(&self.particle_counts);
        v[16..19].copy_from_slice(&self.pm_mass_ugm3);
        v
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.values()[channel.index()]
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        let mut v = self.values();
        v[channel.index()] = value;
        *self = Self::from_values(self.timestamp_s, &v);
    }

    pub fn has_missing(&self) -> bool {
        self.values().iter().any(|v| v.is_nan())
    }

    /// Checks the physical invariants on every present value: counts and
    /// masses non-negative, humidity within [0, 100], and the cumulative
    /// count ladder non-increasing with particle size.
    pub fn validate(&self) -> Result<(), TelemetryError> {
        let bad = |what: &str| TelemetryError::InvalidFrame {
            timestamp_s: self.timestamp_s,
            reason: what.to_string(),
        };
        if self.values().iter().any(|v| v.is_infinite()) {
            return Err(bad("infinite value"));
        }
        if self.rh_pct < 0.0 || self.rh_pct > 100.0 {
            return Err(bad("rh_pct outside [0, 100]"));
        }
        if self.particle_counts.iter().any(|&c| c < 0.0) {
            return Err(bad("negative particle count"));
        }
        if self.pm_mass_ugm3.iter().any(|&m| m < 0.0) {
            return Err(bad("negative particulate mass"));
        }
        let present: Vec<f64> = self.particle_counts.iter().copied().filter(|c| !c.is_nan()).collect();
        if present.windows(2).any(|w| w[1] > w[0]) {
            return Err(bad("particle counts increase with size"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), c);
            assert_eq!(Channel::ALL[c.index()], c);
        }
        assert!("pm25".parse::<Channel>().is_err());
    }

    #[test]
    fn values_round_trip() {
        let v: [f64; 19] = std::array::from_fn(|i| i as f64 * 1.5);
        let f = TelemetryFrame::from_values(9, &v);
        assert_eq!(f.values(), v);
        assert_eq!(f.get(Channel::Pm2_5), v[17]);
    }

    #[test]
    fn ladder_violation_rejected() {
        let mut f = TelemetryFrame::from_values(0, &[0.0; 19]);
        f.rh_pct = 40.0;
        f.particle_counts = [10.0, 8.0, 8.0, 2.0, 0.0, 0.0];
        assert!(f.validate().is_ok());
        f.particle_counts[3] = 9.0;
        assert!(f.validate().is_err());
        // missing entries are skipped by the ladder check
        f.particle_counts = [10.0, MISSING, 4.0, 2.0, 0.0, 0.0];
        assert!(f.validate().is_ok());
    }
}
