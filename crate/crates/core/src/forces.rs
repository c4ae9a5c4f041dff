//! Perturbing potentials and forces.
//!
//! The potential energy convention here makes the total perturbing force
//! F = P - grad(U): the stored third-body potential is the negative of the
//! classical disturbing function, so that -grad(U) reproduces the standard
//! tidal acceleration used by the Cartesian N-body propagator. Solar gravity
//! never enters as a potential; it is carried as an external force P and
//! contributes to the energy rate through the P projections only.

use nalgebra::Vector3;

use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::frames::orbital_frame_basis;
use crate::state::CartesianState;

/// Distance below which an object is considered to have collided with a
/// perturbing body (canonical units).
pub const PROXIMITY_TOL: f64 = 1e-9;

/// Safety margin added to the trajectory-maximum potential offset; finite
/// sampling can undershoot the true supremum.
pub const OFFSET_MARGIN: f64 = 1e-10;

/// Which bodies perturb, and how.
///
/// `potential_bodies` enter the element formulation through the potential U
/// (and through -grad U in the force); `force_bodies` enter as external
/// forces P only. The constant `u_offset` keeps the effective potential
/// nonnegative and is physically inert: forces depend only on the potential
/// gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationModel {
    pub central: Body,
    pub potential_bodies: Vec<(Body, f64)>,
    pub force_bodies: Vec<(Body, f64)>,
    pub u_offset: f64,
}

impl PerturbationModel {
    pub fn new(
        central: Body,
        potential_bodies: Vec<(Body, f64)>,
        force_bodies: Vec<(Body, f64)>,
    ) -> Result<Self> {
        for (body, mu) in potential_bodies.iter().chain(force_bodies.iter()) {
            if *body == central {
                return Err(Error::InvalidArgument(format!(
                    "central body {central} cannot also perturb"
                )));
            }
            if !(*mu > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "perturber {body} needs a positive mu, got {mu}"
                )));
            }
        }
        Ok(PerturbationModel {
            central,
            potential_bodies,
            force_bodies,
            u_offset: 0.0,
        })
    }

    pub fn with_offset(mut self, u_offset: f64) -> Self {
        self.u_offset = u_offset;
        self
    }

    /// All perturbing bodies regardless of slot (for the Cartesian N-body
    /// right-hand side, where every perturber is an acceleration).
    pub fn all_bodies(&self) -> impl Iterator<Item = (Body, f64)> + '_ {
        self.potential_bodies
            .iter()
            .chain(self.force_bodies.iter())
            .copied()
    }
}

fn check_proximity(body: Body, distance: f64) -> Result<()> {
    if distance < PROXIMITY_TOL {
        return Err(Error::Proximity { body, distance });
    }
    Ok(())
}

/// Third-body perturbing potential energy per unit mass:
/// U = -mu_p (1/|r - r_cp| - r.r_cp / |r_cp|^3).
pub fn third_body_potential(
    r: &Vector3<f64>,
    r_cp: &Vector3<f64>,
    mu_p: f64,
    body: Body,
) -> Result<f64> {
    let r_psc = (r - r_cp).norm();
    check_proximity(body, r_psc)?;
    let r_cp_norm = r_cp.norm();
    Ok(-mu_p * (1.0 / r_psc - r.dot(r_cp) / r_cp_norm.powi(3)))
}

/// Standard third-body tidal acceleration:
/// a = mu_p [ (r_cp - r)/|r_cp - r|^3 - r_cp/|r_cp|^3 ].
/// Equal to -grad of [`third_body_potential`] analytically.
pub fn third_body_acceleration(
    r: &Vector3<f64>,
    r_cp: &Vector3<f64>,
    mu_p: f64,
    body: Body,
) -> Result<Vector3<f64>> {
    let sep = r_cp - r;
    let sep_norm = sep.norm();
    check_proximity(body, sep_norm)?;
    let r_cp_norm = r_cp.norm();
    Ok(mu_p * (sep / sep_norm.powi(3) - r_cp / r_cp_norm.powi(3)))
}

/// Partial of the third-body potential with respect to time at fixed object
/// position, differentiating through the perturber motion r_cp(t) only.
pub fn potential_time_partial(
    r: &Vector3<f64>,
    r_cp: &Vector3<f64>,
    v_cp: &Vector3<f64>,
    mu_p: f64,
    body: Body,
) -> Result<f64> {
    let sep = r - r_cp;
    let sep_norm = sep.norm();
    check_proximity(body, sep_norm)?;
    let r_cp_norm = r_cp.norm();
    // d/dt (1/|r - r_cp|) = (r - r_cp).v_cp / |r - r_cp|^3
    let direct = sep.dot(v_cp) / sep_norm.powi(3);
    // d/dt (r.r_cp / |r_cp|^3)
    let indirect = r.dot(v_cp) / r_cp_norm.powi(3)
        - 3.0 * r.dot(r_cp) * r_cp.dot(v_cp) / r_cp_norm.powi(5);
    Ok(-mu_p * (direct - indirect))
}

/// Orbital-frame projections of the total perturbing force F and of the
/// non-potential part P.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForceProjection {
    pub f_r: f64,
    pub f_f: f64,
    pub f_h: f64,
    pub p_r: f64,
    pub p_f: f64,
    pub p_h: f64,
}

pub fn project_forces(
    f_total: &Vector3<f64>,
    p_external: &Vector3<f64>,
    state: &CartesianState,
) -> Result<ForceProjection> {
    let frame = orbital_frame_basis(state)?;
    Ok(ForceProjection {
        f_r: f_total.dot(&frame.e_r),
        f_f: f_total.dot(&frame.e_f),
        f_h: f_total.dot(&frame.e_h),
        p_r: p_external.dot(&frame.e_r),
        p_f: p_external.dot(&frame.e_f),
        p_h: p_external.dot(&frame.e_h),
    })
}

/// Rate of change of the total energy:
/// E_dot = dU/dt + r_dot P_r + (h / r) P_f.
pub fn energy_rate(du_dt: f64, r_dot: f64, h: f64, r: f64, p_r: f64, p_f: f64) -> f64 {
    du_dt + r_dot * p_r + (h / r) * p_f
}

/// Instantaneous potential offset that keeps the effective potential
/// nonnegative at this state: -U - h^2/(2 r^2) - r_dot^2/4 + mu/(2 r).
pub fn instantaneous_offset(state: &CartesianState, u: f64, mu: f64) -> f64 {
    let r = state.radius();
    let h = state.angular_momentum().norm();
    let r_dot = state.radial_rate();
    -u - h * h / (2.0 * r * r) - r_dot * r_dot / 4.0 + mu / (2.0 * r)
}

/// Constant offset for a whole propagation: the maximum instantaneous offset
/// over the sampled states plus a small safety margin.
///
/// `potential_at` evaluates the (un-offset) perturbing potential at a sampled
/// state and its epoch.
pub fn offset_for_states<I, F>(states: I, potential_at: F, mu: f64) -> Result<f64>
where
    I: IntoIterator<Item = (f64, CartesianState)>,
    F: Fn(f64, &CartesianState) -> Result<f64>,
{
    let mut max_offset = f64::NEG_INFINITY;
    let mut any = false;
    for (epoch, state) in states {
        any = true;
        let u = potential_at(epoch, &state)?;
        max_offset = max_offset.max(instantaneous_offset(&state, u, mu));
    }
    if !any {
        return Err(Error::InvalidArgument(
            "offset requested for an empty trajectory".into(),
        ));
    }
    Ok(max_offset + OFFSET_MARGIN)
}
