//! System and device parameters, random scenario generation, and link rates.
//!
//! Rates are `B * log2(1 + SNR)` in bits per second throughout, so sensing
//! rates, link rates and the edge capacity share one unit. The noise power
//! is the total over the full band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Devices are dropped uniformly on `(0, MAX_DISTANCE]` meters.
pub const MAX_DISTANCE: f64 = 50.0;
pub const DEFAULT_MAX_POWER: f64 = 1.0;
/// Fading draws with a smaller squared magnitude are redrawn.
pub const MIN_FADING_POWER: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Frame length in seconds.
    #[serde(rename = "frame_T")]
    pub frame: f64,
    /// Hz.
    #[serde(rename = "bandwidth_B")]
    pub bandwidth: f64,
    /// Full-band noise power in watts.
    #[serde(rename = "noise_N0")]
    pub noise: f64,
    /// Edge server capacity in offloaded bits per second.
    #[serde(rename = "edge_capacity_C")]
    pub edge_capacity: f64,
    pub pathloss_c: f64,
    pub pathloss_gamma: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            frame: 1.0,
            bandwidth: 1e6,
            noise: 1e-9,
            edge_capacity: 1e7,
            pathloss_c: 1e-3,
            pathloss_gamma: 3.5,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("frame_T", self.frame),
            ("bandwidth_B", self.bandwidth),
            ("noise_N0", self.noise),
            ("edge_capacity_C", self.edge_capacity),
            ("pathloss_c", self.pathloss_c),
            ("pathloss_gamma", self.pathloss_gamma),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_capacity(self, edge_capacity: f64) -> Self {
        Self { edge_capacity, ..self }
    }

    /// Channel power gain `c * d^-gamma * rho^2`.
    pub fn channel_gain(&self, distance: f64, fading: f64) -> f64 {
        self.pathloss_c * distance.powf(-self.pathloss_gamma) * fading * fading
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    /// Meters; absent for hand-built devices.
    #[serde(rename = "distance_d")]
    pub distance: Option<f64>,
    #[serde(rename = "fading_rho")]
    pub fading: Option<f64>,
    #[serde(rename = "gain_h")]
    pub gain: f64,
    /// Bits per second.
    #[serde(rename = "sensing_s")]
    pub sensing_rate: f64,
    /// Watts.
    #[serde(rename = "max_power_P")]
    pub max_power: f64,
    #[serde(rename = "weight_w")]
    pub weight: f64,
}

impl Device {
    /// A device given directly by its gain, with unit weight.
    pub fn new(id: usize, gain: f64, sensing_rate: f64, max_power: f64) -> Self {
        Self {
            id,
            distance: None,
            fading: None,
            gain,
            sensing_rate,
            max_power,
            weight: 1.0,
        }
    }

    pub fn with_weight(self, weight: f64) -> Self {
        Self { weight, ..self }
    }

    /// Received signal-to-noise ratio at full power, `P * h / N0`.
    pub fn snr(&self, system: &SystemParams) -> f64 {
        self.max_power * self.gain / system.noise
    }

    fn validate(&self) -> Result<()> {
        let id = self.id;
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(param(format!("device {id}: gain_h must be positive")));
        }
        if !(self.sensing_rate.is_finite() && self.sensing_rate > 0.0) {
            return Err(param(format!("device {id}: sensing_s must be positive")));
        }
        if !(self.max_power.is_finite() && self.max_power >= 0.0) {
            return Err(param(format!("device {id}: max_power_P must be nonnegative")));
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return Err(param(format!("device {id}: weight_w must be nonnegative")));
        }
        Ok(())
    }
}

/// Achievable rate `B * log2(1 + P h / (N0 + interference))` at full power.
pub fn link_rate(device: &Device, system: &SystemParams, interference: f64) -> f64 {
    let snr = device.max_power * device.gain / (system.noise + interference);
    system.bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemParams,
    pub devices: Vec<Device>,
}

impl Scenario {
    pub fn new(system: SystemParams, devices: Vec<Device>) -> Result<Self> {
        let s = Self { system, devices };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.devices.is_empty() {
            return Err(param("a scenario needs at least one device"));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if d.id != i {
                return Err(param(format!("device at position {i} has id {}", d.id)));
            }
            d.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Interference-free full-power rate of every device.
    pub fn link_rates(&self) -> Vec<f64> {
        self.devices
            .iter()
            .map(|d| link_rate(d, &self.system, 0.0))
            .collect()
    }

    pub fn sensing_rates(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.sensing_rate).collect()
    }

    /// The common sensing rate, if every device senses at the same rate.
    pub fn common_sensing_rate(&self) -> Option<f64> {
        let s0 = self.devices[0].sensing_rate;
        self.devices
            .iter()
            .all(|d| (d.sensing_rate - s0).abs() <= 1e-12 * s0)
            .then_some(s0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(src)?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fading {
    /// `rho ~ N(0, 1)`, redrawn while `rho^2 < MIN_FADING_POWER`.
    #[default]
    StandardNormal,
    /// `rho = 1`; gains follow the pathloss model exactly.
    Disabled,
}

/// Random scenario with unit weights and `DEFAULT_MAX_POWER` per device.
pub fn generate_scenario(
    params: SystemParams,
    n_devices: usize,
    sensing_range: (f64, f64),
    seed: u64,
) -> Result<Scenario> {
    generate_scenario_with(params, n_devices, sensing_range, seed, Fading::StandardNormal)
}

pub fn generate_scenario_with(
    params: SystemParams,
    n_devices: usize,
    sensing_range: (f64, f64),
    seed: u64,
    fading: Fading,
) -> Result<Scenario> {
    params.validate()?;
    let (s_min, s_max) = sensing_range;
    if n_devices == 0 {
        return Err(param("n_devices must be at least 1"));
    }
    if !(s_min.is_finite() && s_max.is_finite() && s_min > 0.0 && s_min <= s_max) {
        return Err(param(format!("invalid sensing range [{s_min}, {s_max}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = (0..n_devices)
        .map(|id| {
            // 1 - U[0,1) lies in (0, 1].
            let distance = MAX_DISTANCE * (1.0 - rng.random::<f64>());
            let rho = match fading {
                Fading::StandardNormal => loop {
                    let rho: f64 = rng.sample(StandardNormal);
                    if rho * rho >= MIN_FADING_POWER {
                        break rho;
                    }
                },
                Fading::Disabled => 1.0,
            };
            let sensing_rate = if s_min == s_max {
                s_min
            } else {
                rng.random_range(s_min..=s_max)
            };
            Device {
                id,
                distance: Some(distance),
                fading: Some(rho),
                gain: params.channel_gain(distance, rho),
                sensing_rate,
                max_power: DEFAULT_MAX_POWER,
                weight: 1.0,
            }
        })
        .collect();
    Scenario::new(params, devices)
}
