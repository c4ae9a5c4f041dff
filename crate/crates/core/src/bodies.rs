//! Celestial bodies and their gravitational parameters.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// The three bodies modeled by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Body {
    Earth,
    Moon,
    Sun,
}

impl Body {
    pub const ALL: [Body; 3] = [Body::Earth, Body::Moon, Body::Sun];

    pub fn name(&self) -> &'static str {
        match self {
            Body::Earth => "earth",
            Body::Moon => "moon",
            Body::Sun => "sun",
        }
    }

    pub fn parse(s: &str) -> Result<Body> {
        match s.trim().to_ascii_lowercase().as_str() {
            "earth" => Ok(Body::Earth),
            "moon" => Ok(Body::Moon),
            "sun" => Ok(Body::Sun),
            other => Err(Error::Config(format!("unknown body name '{other}'"))),
        }
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gravitational parameters in km^3/s^2 for the three bodies.
///
/// Defaults are the DE440-consistent values; every entry can be overridden
/// from a flat key/value file (see [`BodyConstants::from_file`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyConstants {
    pub mu_earth: f64,
    pub mu_moon: f64,
    pub mu_sun: f64,
    /// Characteristic length, km (mean Earth-Moon distance).
    pub l_star: f64,
}

/// Mean Earth-Moon distance, km.
pub const L_STAR_KM: f64 = 384_400.0;
/// DE440 GM values, km^3/s^2.
pub const MU_EARTH_KM3S2: f64 = 398_600.435507;
pub const MU_MOON_KM3S2: f64 = 4_902.800118;
pub const MU_SUN_KM3S2: f64 = 1.327_124_400_41e11;
/// Astronomical unit, km.
pub const AU_KM: f64 = 149_597_870.7;

impl Default for BodyConstants {
    fn default() -> Self {
        BodyConstants {
            mu_earth: MU_EARTH_KM3S2,
            mu_moon: MU_MOON_KM3S2,
            mu_sun: MU_SUN_KM3S2,
            l_star: L_STAR_KM,
        }
    }
}

impl BodyConstants {
    pub fn mu(&self, body: Body) -> f64 {
        match body {
            Body::Earth => self.mu_earth,
            Body::Moon => self.mu_moon,
            Body::Sun => self.mu_sun,
        }
    }

    /// Load overrides from a flat TOML-style key/value file.
    ///
    /// Recognized keys: `mu_earth_km3s2`, `mu_moon_km3s2`, `mu_sun_km3s2`,
    /// `l_star_km`. Missing keys keep their defaults; unknown keys are
    /// rejected so typos do not silently fall back.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("constants file: {e}")))?;
        let mut constants = BodyConstants::default();
        for (key, value) in &table {
            let number = value.as_float().or_else(|| value.as_integer().map(|i| i as f64));
            let number = number
                .ok_or_else(|| Error::Config(format!("constants key '{key}' must be a number")))?;
            if number <= 0.0 || !number.is_finite() {
                return Err(Error::Config(format!(
                    "constants key '{key}' must be positive and finite, got {number}"
                )));
            }
            match key.as_str() {
                "mu_earth_km3s2" => constants.mu_earth = number,
                "mu_moon_km3s2" => constants.mu_moon = number,
                "mu_sun_km3s2" => constants.mu_sun = number,
                "l_star_km" => constants.l_star = number,
                other => {
                    return Err(Error::Config(format!("unknown constants key '{other}'")));
                }
            }
        }
        Ok(constants)
    }
}
