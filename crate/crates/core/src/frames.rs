//! Orbital and Earth-Moon rotating reference frames.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::state::CartesianState;

/// Radial / transverse / normal basis attached to an orbiting object.
#[derive(Debug, Clone, Copy)]
pub struct OrbitalFrame {
    /// Along the position vector.
    pub e_r: Vector3<f64>,
    /// Completes the right-handed triad (transverse, along-track for
    /// circular motion).
    pub e_f: Vector3<f64>,
    /// Along the angular momentum vector.
    pub e_h: Vector3<f64>,
}

const RECTILINEAR_TOL: f64 = 1e-12;

/// Build the orbital frame basis from an inertial state.
pub fn orbital_frame_basis(state: &CartesianState) -> Result<OrbitalFrame> {
    let r_norm = state.r.norm();
    if r_norm <= 0.0 {
        return Err(Error::DegenerateGeometry("zero position vector".into()));
    }
    let h_vec = state.r.cross(&state.v);
    let h_norm = h_vec.norm();
    if h_norm <= RECTILINEAR_TOL * r_norm * state.v.norm() || h_norm == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "rectilinear motion: |r x v| = {h_norm:.3e}"
        )));
    }
    let e_r = state.r / r_norm;
    let e_h = h_vec / h_norm;
    let e_f = e_h.cross(&e_r);
    Ok(OrbitalFrame { e_r, e_f, e_h })
}

/// Instantaneous Earth-Moon rotating frame: x along the Earth-to-Moon line,
/// z along the Earth-Moon orbital angular momentum. The frame shares its
/// origin with the inertial frame of the inputs; only orientation and the
/// frame-rotation transport term change.
#[derive(Debug, Clone, Copy)]
pub struct RotatingFrame {
    /// Columns are the rotating axes expressed in inertial coordinates.
    rotation: Matrix3<f64>,
    /// Frame angular velocity in inertial coordinates.
    omega: Vector3<f64>,
}

impl RotatingFrame {
    /// Build the frame from the Earth and Moon states (any common inertial
    /// frame; typically one of them is the zero state of the central body).
    pub fn earth_moon(earth: &CartesianState, moon: &CartesianState) -> Result<Self> {
        let d = moon.r - earth.r;
        let d_dot = moon.v - earth.v;
        let d_norm = d.norm();
        if d_norm <= 0.0 {
            return Err(Error::DegenerateGeometry("coincident primaries".into()));
        }
        let w_vec = d.cross(&d_dot);
        let w_norm = w_vec.norm();
        if w_norm <= RECTILINEAR_TOL * d_norm * d_dot.norm() || w_norm == 0.0 {
            return Err(Error::DegenerateGeometry(
                "rectilinear Earth-Moon relative motion".into(),
            ));
        }
        let x_hat = d / d_norm;
        let z_hat = w_vec / w_norm;
        let y_hat = z_hat.cross(&x_hat);
        let omega = w_vec / (d_norm * d_norm);
        Ok(RotatingFrame {
            rotation: Matrix3::from_columns(&[x_hat, y_hat, z_hat]),
            omega,
        })
    }

    /// Express an inertial state in the rotating frame; the velocity picks
    /// up the -omega x r transport term.
    pub fn from_inertial(&self, state: &CartesianState) -> CartesianState {
        let rt = self.rotation.transpose();
        CartesianState {
            r: rt * state.r,
            v: rt * (state.v - self.omega.cross(&state.r)),
        }
    }

    /// Inverse of [`RotatingFrame::from_inertial`].
    pub fn to_inertial(&self, state: &CartesianState) -> CartesianState {
        let r_inertial = self.rotation * state.r;
        CartesianState {
            r: r_inertial,
            v: self.rotation * state.v + self.omega.cross(&r_inertial),
        }
    }
}

/// Convenience wrapper matching the per-state call pattern.
pub fn inertial_to_rotating(
    state: &CartesianState,
    earth: &CartesianState,
    moon: &CartesianState,
) -> Result<CartesianState> {
    Ok(RotatingFrame::earth_moon(earth, moon)?.from_inertial(state))
}

pub fn rotating_to_inertial(
    state: &CartesianState,
    earth: &CartesianState,
    moon: &CartesianState,
) -> Result<CartesianState> {
    Ok(RotatingFrame::earth_moon(earth, moon)?.to_inertial(state))
}
