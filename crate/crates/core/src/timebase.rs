//! In-game and real-world time conversion.
//!
//! Timestamps are logged in in-game seconds. Real seconds are derived from
//! them through the game-day model, never the other way round.

use thiserror::Error;

use crate::scalar::{lit, Real};

/// Real seconds in one day.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimebaseError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Relationship between the game clock and wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameDayModel<T: Real> {
    /// Real seconds per in-game day.
    pub day_real_seconds: T,
    /// In-game seconds between consecutive stereo pairs.
    pub pair_interval: T,
}

impl<T: Real> Default for GameDayModel<T> {
    fn default() -> Self {
        Self {
            day_real_seconds: lit(2880.0),
            pair_interval: lit(2.5),
        }
    }
}

impl<T: Real> GameDayModel<T> {
    pub fn new(day_real_seconds: T, pair_interval: T) -> Result<Self, TimebaseError> {
        check_positive("D_r", day_real_seconds)?;
        check_positive("T_g", pair_interval)?;
        Ok(Self {
            day_real_seconds,
            pair_interval,
        })
    }

    pub fn real_pair_interval(&self) -> Result<T, TimebaseError> {
        game_to_real(self.pair_interval, self.day_real_seconds)
    }

    pub fn camera_frequency(&self) -> Result<T, TimebaseError> {
        cam_freq(self.pair_interval, self.day_real_seconds)
    }
}

fn check_positive<T: Real>(name: &'static str, value: T) -> Result<(), TimebaseError> {
    if value > T::zero() {
        Ok(())
    } else {
        Err(TimebaseError::NonPositive {
            name,
            value: crate::scalar::to_f64(value),
        })
    }
}

/// Real seconds elapsed while `game_seconds` pass on the game clock.
pub fn game_to_real<T: Real>(game_seconds: T, day_real_seconds: T) -> Result<T, TimebaseError> {
    check_positive("T_g", game_seconds)?;
    check_positive("D_r", day_real_seconds)?;
    Ok(game_seconds * (day_real_seconds / lit(SECONDS_PER_DAY)))
}

/// Effective capture frequency in frames per real second.
pub fn cam_freq<T: Real>(game_seconds: T, day_real_seconds: T) -> Result<T, TimebaseError> {
    check_positive("T_g", game_seconds)?;
    check_positive("D_r", day_real_seconds)?;
    // 86400 / (T_g * D_r) is the same reciprocal with a single rounding.
    Ok(lit::<T>(SECONDS_PER_DAY) / (game_seconds * day_real_seconds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_capture_interval() {
        let real = game_to_real(2.5_f64, 2880.0).unwrap();
        assert!((real - 0.083_333_333_333).abs() < 1e-9);
        assert_eq!(cam_freq(2.5_f64, 2880.0).unwrap(), 12.0);
    }

    #[test]
    fn real_time_clock() {
        assert_eq!(game_to_real(1.0_f64, 86_400.0).unwrap(), 1.0);
        assert_eq!(cam_freq(1.0_f64, 86_400.0).unwrap(), 1.0);
    }

    #[test]
    fn five_second_interval() {
        assert!((game_to_real(5.0_f64, 2880.0).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((cam_freq(5.0_f64, 2880.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(game_to_real(0.0_f64, 2880.0).is_err());
        assert!(cam_freq(2.5_f64, -1.0).is_err());
        assert!(GameDayModel::new(0.0_f32, 1.0).is_err());
    }

    #[test]
    fn default_model_in_f32() {
        let m = GameDayModel::<f32>::default();
        assert!((m.camera_frequency().unwrap() - 12.0).abs() < 1e-5);
    }

    proptest::proptest! {
        #[test]
        fn frequency_is_reciprocal(t_g in 1e-3_f64..1e3, d_r in 1.0_f64..1e6) {
            let f = cam_freq(t_g, d_r).unwrap();
            let r = game_to_real(t_g, d_r).unwrap();
            proptest::prop_assert!((f * r - 1.0).abs() < 1e-12);
        }
    }
}
