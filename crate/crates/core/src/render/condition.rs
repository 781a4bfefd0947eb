//! Weather and lighting degradation applied to RGB only.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FrameBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionName {
    #[default]
    ExtraSunny,
    CloudyRain,
    NightThunderstorm,
}

impl ConditionName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExtraSunny => "extra-sunny",
            Self::CloudyRain => "cloudy-rain",
            Self::NightThunderstorm => "night-thunderstorm",
        }
    }
}

impl std::str::FromStr for ConditionName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sunny" | "extra-sunny" => Ok(Self::ExtraSunny),
            "rain" | "cloudy-rain" => Ok(Self::CloudyRain),
            "storm" | "night-thunderstorm" => Ok(Self::NightThunderstorm),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionProfile {
    pub name: ConditionName,
    /// Additive gaussian noise, 8-bit units.
    pub noise_sigma: f64,
    /// Exponent applied to normalized intensities; > 1 darkens.
    pub gamma: f64,
    pub flash_probability: f64,
    pub flash_gain: f64,
}

impl ConditionProfile {
    pub fn extra_sunny() -> Self {
        Self {
            name: ConditionName::ExtraSunny,
            noise_sigma: 0.0,
            gamma: 1.0,
            flash_probability: 0.0,
            flash_gain: 1.0,
        }
    }

    pub fn cloudy_rain() -> Self {
        Self {
            name: ConditionName::CloudyRain,
            noise_sigma: 6.0,
            gamma: 1.4,
            flash_probability: 0.0,
            flash_gain: 1.0,
        }
    }

    pub fn night_thunderstorm() -> Self {
        Self {
            name: ConditionName::NightThunderstorm,
            noise_sigma: 12.0,
            gamma: 2.2,
            flash_probability: 0.05,
            flash_gain: 4.0,
        }
    }

    pub fn from_name(name: ConditionName) -> Self {
        match name {
            ConditionName::ExtraSunny => Self::extra_sunny(),
            ConditionName::CloudyRain => Self::cloudy_rain(),
            ConditionName::NightThunderstorm => Self::night_thunderstorm(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.noise_sigma == 0.0 && self.gamma == 1.0 && self.flash_probability == 0.0
    }
}

/// Degrades the RGB raster; depth, ids and pose are passed through.
///
/// Per pixel: gamma, then the frame-wide flash gain (drawn once per frame),
/// then additive noise, then rounding and clamping to `[0, 255]`.
pub fn apply_condition<R: Rng + ?Sized>(
    frame: &FrameBuffer,
    profile: &ConditionProfile,
    rng: &mut R,
) -> FrameBuffer {
    let mut out = frame.clone();
    if profile.is_identity() {
        return out;
    }
    let flash = profile.flash_probability > 0.0 && rng.random::<f64>() < profile.flash_probability;
    let gain = if flash { profile.flash_gain } else { 1.0 };
    let noise = (profile.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, profile.noise_sigma).expect("finite sigma"));
    for c in out.rgb.iter_mut() {
        let mut v = (*c as f64 / 255.0).powf(profile.gamma) * 255.0 * gain;
        if let Some(n) = &noise {
            v += n.sample(rng);
        }
        *c = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}
