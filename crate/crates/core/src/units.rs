//! Canonical (nondimensional) unit system.
//!
//! All internal computation runs in canonical units derived from the
//! Earth-Moon system: the characteristic length is the mean Earth-Moon
//! distance and the characteristic time follows from the combined
//! Earth-Moon gravitational parameter. Dimensional quantities (km, km/s,
//! seconds, days) appear only at I/O boundaries.

use crate::bodies::BodyConstants;
use crate::error::{Error, Result};
use crate::state::CartesianState;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Characteristic quantities of the canonical unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalUnits {
    /// Characteristic length, km.
    pub l_star: f64,
    /// Combined gravitational parameter of the two primaries, km^3/s^2.
    pub gm_sum: f64,
    /// Characteristic time, s: sqrt(l*^3 / gm_sum).
    pub t_star: f64,
    /// Characteristic speed, km/s: l* / t*.
    pub v_star: f64,
}

impl CanonicalUnits {
    /// Build the unit system from the characteristic length and the two
    /// primary gravitational parameters.
    pub fn new(l_star_km: f64, mu_earth: f64, mu_moon: f64) -> Result<Self> {
        if !(l_star_km > 0.0) || !(mu_earth > 0.0) || !(mu_moon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "canonical units need positive inputs, got l* = {l_star_km}, \
                 mu_earth = {mu_earth}, mu_moon = {mu_moon}"
            )));
        }
        let gm_sum = mu_earth + mu_moon;
        let t_star = (l_star_km.powi(3) / gm_sum).sqrt();
        Ok(CanonicalUnits {
            l_star: l_star_km,
            gm_sum,
            t_star,
            v_star: l_star_km / t_star,
        })
    }

    pub fn from_constants(constants: &BodyConstants) -> Result<Self> {
        Self::new(constants.l_star, constants.mu_earth, constants.mu_moon)
    }

    /// Rebuild the unit system from its characteristic length and time (the
    /// combined gravitational parameter follows from t* = sqrt(l*^3/gm)).
    pub fn from_length_time(l_star_km: f64, t_star_s: f64) -> Result<Self> {
        if !(l_star_km > 0.0) || !(t_star_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "characteristic quantities must be positive, got l* = {l_star_km}, t* = {t_star_s}"
            )));
        }
        Ok(CanonicalUnits {
            l_star: l_star_km,
            gm_sum: l_star_km.powi(3) / (t_star_s * t_star_s),
            t_star: t_star_s,
            v_star: l_star_km / t_star_s,
        })
    }

    /// Gravitational parameter in canonical units (km^3/s^2 in, l*^3/t*^2 out).
    pub fn mu_canonical(&self, mu_km3s2: f64) -> f64 {
        mu_km3s2 / self.gm_sum
    }

    pub fn km_to_canonical(&self, km: f64) -> f64 {
        km / self.l_star
    }

    pub fn canonical_to_km(&self, length: f64) -> f64 {
        length * self.l_star
    }

    pub fn kms_to_canonical(&self, km_per_s: f64) -> f64 {
        km_per_s / self.v_star
    }

    pub fn canonical_to_kms(&self, speed: f64) -> f64 {
        speed * self.v_star
    }

    pub fn seconds_to_canonical(&self, seconds: f64) -> f64 {
        seconds / self.t_star
    }

    pub fn canonical_to_seconds(&self, time: f64) -> f64 {
        time * self.t_star
    }

    pub fn days_to_canonical(&self, days: f64) -> f64 {
        self.seconds_to_canonical(days * SECONDS_PER_DAY)
    }

    pub fn canonical_to_days(&self, time: f64) -> f64 {
        self.canonical_to_seconds(time) / SECONDS_PER_DAY
    }

    /// Scale a dimensional state (km, km/s) into canonical units.
    pub fn nondimensionalize(&self, state: &CartesianState) -> CartesianState {
        CartesianState {
            r: state.r / self.l_star,
            v: state.v / self.v_star,
        }
    }

    /// Scale a canonical state back to km and km/s. Exact inverse of
    /// [`CanonicalUnits::nondimensionalize`].
    pub fn dimensionalize(&self, state: &CartesianState) -> CartesianState {
        CartesianState {
            r: state.r * self.l_star,
            v: state.v * self.v_star,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::CartesianState;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn characteristic_time_earth_moon() {
        // Independent evaluation of sqrt(l*^3 / (mu_e + mu_m)).
        let units = CanonicalUnits::new(384_400.0, 398_600.44, 4_902.80).unwrap();
        assert_relative_eq!(units.t_star, 375_190.259_860_651_2, max_relative = 1e-12);
        assert_relative_eq!(units.v_star, 1.024_546_852_956_069, max_relative = 1e-12);
    }

    #[test]
    fn unit_inputs_give_unit_time() {
        let units = CanonicalUnits::new(1.0, 0.5, 0.5).unwrap();
        assert_eq!(units.t_star, 1.0);
        assert_eq!(units.v_star, 1.0);
    }

    #[test]
    fn identities_hold_to_one_ulp() {
        let units = CanonicalUnits::from_constants(&BodyConstants::default()).unwrap();
        let recomputed = (units.l_star.powi(3) / units.gm_sum).sqrt();
        assert_eq!(units.t_star, recomputed);
        assert_eq!(units.v_star, units.l_star / units.t_star);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        assert!(CanonicalUnits::new(0.0, 1.0, 1.0).is_err());
        assert!(CanonicalUnits::new(1.0, -1.0, 1.0).is_err());
        assert!(CanonicalUnits::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn nondimensionalize_definitions() {
        let units = CanonicalUnits::from_constants(&BodyConstants::default()).unwrap();
        let state = CartesianState::new(
            Vector3::new(384_400.0, 0.0, 0.0),
            Vector3::new(units.v_star, 0.0, 0.0),
        );
        let canonical = units.nondimensionalize(&state);
        assert_relative_eq!(canonical.r.x, 1.0, max_relative = 1e-15);
        assert_relative_eq!(canonical.v.x, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn round_trip_is_identity() {
        let units = CanonicalUnits::from_constants(&BodyConstants::default()).unwrap();
        let state = CartesianState::new(
            Vector3::new(12_345.6, -98_765.4, 4_321.0),
            Vector3::new(1.234, -0.567, 0.089),
        );
        let back = units.dimensionalize(&units.nondimensionalize(&state));
        assert_relative_eq!(back.r, state.r, max_relative = 1e-15);
        assert_relative_eq!(back.v, state.v, max_relative = 1e-15);
    }
}
