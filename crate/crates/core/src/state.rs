//! Epochs and Cartesian states.

use nalgebra::{Vector3, Vector6};

/// Nondimensional time since the scenario reference epoch.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epoch(pub f64);

impl Epoch {
    pub fn value(&self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Epoch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Inertial position and velocity, canonical units unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl CartesianState {
    pub fn new(r: Vector3<f64>, v: Vector3<f64>) -> Self {
        CartesianState { r, v }
    }

    pub fn from_vector(y: &Vector6<f64>) -> Self {
        CartesianState {
            r: Vector3::new(y[0], y[1], y[2]),
            v: Vector3::new(y[3], y[4], y[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn radius(&self) -> f64 {
        self.r.norm()
    }

    pub fn speed(&self) -> f64 {
        self.v.norm()
    }

    /// Radial velocity component, r_dot = (r . v) / |r|.
    pub fn radial_rate(&self) -> f64 {
        self.r.dot(&self.v) / self.r.norm()
    }

    /// Specific angular momentum vector r x v.
    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.r.cross(&self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}
