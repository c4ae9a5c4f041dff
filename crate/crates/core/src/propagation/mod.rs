//! Dynamics right-hand sides and trajectory propagation.
//!
//! Two formulations of the same Earth-Moon-Sun physics: the relative N-body
//! equations in Cartesian coordinates, and the element-rate equations in the
//! modified generalized equinoctial set. Cross-propagating the two and
//! comparing is the primary correctness check for everything downstream.

mod integrator;

pub use integrator::{integrate, ButcherTableau, Method, OdeSettings, DORMAND_PRINCE_54, FEHLBERG_78};

use std::sync::Arc;

use nalgebra::{Vector3, Vector6};

use crate::bodies::Body;
use crate::elements::{
    align_longitude, cart_to_mgeqoe, equinoctial_basis, mgeqoe_to_cart, MGeqoeState,
    ECCENTRICITY_TOL,
};
use crate::ephemeris::{recenter, EphemerisProvider};
use crate::error::{Error, Result};
use crate::forces::{
    energy_rate, potential_time_partial, project_forces, third_body_acceleration,
    third_body_potential, PerturbationModel, PROXIMITY_TOL,
};
use crate::state::{CartesianState, Epoch};
use crate::units::CanonicalUnits;

/// Coordinate kind of a six-component state or trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordKind {
    Cartesian,
    MGeqoe,
}

impl CoordKind {
    pub fn name(&self) -> &'static str {
        match self {
            CoordKind::Cartesian => "cartesian",
            CoordKind::MGeqoe => "mgeqoe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cartesian" | "cart" => Ok(CoordKind::Cartesian),
            "mgeqoe" | "elements" => Ok(CoordKind::MGeqoe),
            other => Err(Error::Config(format!("unknown coordinate kind '{other}'"))),
        }
    }
}

/// Time-tagged state history in one coordinate kind.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: CoordKind,
    pub center: Body,
    pub epochs: Vec<f64>,
    pub states: Vec<Vector6<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Index of the minimum-radius grid epoch (Cartesian kind only).
    pub fn periapsis_index(&self) -> Option<usize> {
        if self.kind != CoordKind::Cartesian {
            return None;
        }
        self.states
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let ra = a.fixed_rows::<3>(0).norm();
                let rb = b.fixed_rows::<3>(0).norm();
                ra.partial_cmp(&rb).unwrap()
            })
            .map(|(i, _)| i)
    }
}

/// Everything the right-hand sides need: central body, perturbation slots,
/// and the ephemeris resolving perturber positions.
#[derive(Clone)]
pub struct DynamicsConfig {
    pub central: Body,
    /// Central-body gravitational parameter, canonical.
    pub mu_central: f64,
    pub perturbations: PerturbationModel,
    pub ephemeris: Arc<dyn EphemerisProvider>,
}

impl DynamicsConfig {
    /// Perturber state relative to the central body.
    pub fn perturber_state(&self, body: Body, epoch: Epoch) -> Result<(Vector3<f64>, Vector3<f64>)> {
        recenter(self.ephemeris.as_ref(), self.central, body, epoch)
    }

    /// Third-body potential at a position, without the constant offset.
    pub fn raw_potential(&self, r: &Vector3<f64>, epoch: Epoch) -> Result<f64> {
        let mut u = 0.0;
        for &(body, mu) in &self.perturbations.potential_bodies {
            let (r_cp, _) = self.perturber_state(body, epoch)?;
            u += third_body_potential(r, &r_cp, mu, body)?;
        }
        Ok(u)
    }

    /// Offset-inclusive potential, the one the element formulation sees.
    pub fn potential(&self, r: &Vector3<f64>, epoch: Epoch) -> Result<f64> {
        Ok(self.raw_potential(r, epoch)? + self.perturbations.u_offset)
    }

    /// Replace the stored constant offset.
    pub fn with_offset(&self, u_offset: f64) -> Self {
        let mut config = self.clone();
        config.perturbations.u_offset = u_offset;
        config
    }
}

/// Cartesian N-body right-hand side: central gravity plus the tidal
/// acceleration of every perturbing body.
pub fn cartesian_rhs(epoch: f64, y: &Vector6<f64>, config: &DynamicsConfig) -> Result<Vector6<f64>> {
    let r = Vector3::new(y[0], y[1], y[2]);
    let r_norm = r.norm();
    if r_norm < PROXIMITY_TOL {
        return Err(Error::Proximity {
            body: config.central,
            distance: r_norm,
        });
    }
    let mut accel = -config.mu_central / (r_norm * r_norm * r_norm) * r;
    for (body, mu) in config.perturbations.all_bodies() {
        let (r_cp, _) = config.perturber_state(body, Epoch(epoch))?;
        accel += third_body_acceleration(&r, &r_cp, mu, body)?;
    }
    Ok(Vector6::new(y[3], y[4], y[5], accel.x, accel.y, accel.z))
}

/// Element-space right-hand side.
///
/// Sequence: reconstruct the Cartesian state (offset-inclusive potential),
/// evaluate forces and the potential time partial, project into the orbital
/// frame, then assemble the six rates. The frame angular-velocity term in
/// the p1/p2 rates is the e_h projection w_h = -F_h (r/h)(q2 sin L - q1 cos L).
pub fn mgeqoe_rhs(epoch: f64, y: &Vector6<f64>, config: &DynamicsConfig) -> Result<Vector6<f64>> {
    let elements = MGeqoeState::from_vector(y);
    let ecc_sq = elements.p1 * elements.p1 + elements.p2 * elements.p2;
    if ecc_sq >= 1.0 - ECCENTRICITY_TOL {
        return Err(Error::EccentricitySingularity { norm_sq: ecc_sq });
    }
    let mu = config.mu_central;
    let at = Epoch(epoch);

    let state = mgeqoe_to_cart(&elements, mu, |r, e| config.potential(r, e), at)?;
    let r_vec = state.r;
    let r = elements.p_tilde / elements.radius_denominator();
    let (sin_l, cos_l) = elements.true_longitude.sin_cos();
    let x = r * cos_l;
    let y_eq = r * sin_l;

    let u = config.potential(&r_vec, at)?;
    let h_tilde = (elements.p_tilde * mu).sqrt();
    let h_sq = h_tilde * h_tilde - 2.0 * r * r * u;
    if h_sq < 0.0 {
        return Err(Error::InconsistentPotential { value: h_sq });
    }
    let h = h_sq.sqrt();
    let r_dot = (mu / h_tilde) * (elements.p2 * sin_l - elements.p1 * cos_l);

    // forces: potential bodies through -grad U, force bodies as external P
    let mut f_total = Vector3::zeros();
    let mut p_ext = Vector3::zeros();
    let mut du_dt = 0.0;
    for &(body, mu_p) in &config.perturbations.potential_bodies {
        let (r_cp, v_cp) = config.perturber_state(body, at)?;
        f_total += third_body_acceleration(&r_vec, &r_cp, mu_p, body)?;
        du_dt += potential_time_partial(&r_vec, &r_cp, &v_cp, mu_p, body)?;
    }
    for &(body, mu_p) in &config.perturbations.force_bodies {
        let (r_cp, _) = config.perturber_state(body, at)?;
        let accel = third_body_acceleration(&r_vec, &r_cp, mu_p, body)?;
        f_total += accel;
        p_ext += accel;
    }

    let proj = project_forces(&f_total, &p_ext, &state)?;
    let e_dot = energy_rate(du_dt, r_dot, h, r, proj.p_r, proj.p_f);

    let a_tilde = elements.p_tilde / (1.0 - ecc_sq);
    let q_sq = 1.0 + elements.q1 * elements.q1 + elements.q2 * elements.q2;
    let tan_half_i_term = elements.q2 * sin_l - elements.q1 * cos_l;
    let w_x = proj.f_h * (r / h) * cos_l;
    let w_y = proj.f_h * (r / h) * sin_l;
    let w_h = -proj.f_h * (r / h) * tan_half_i_term;
    let work = 2.0 * u - r * proj.f_r;

    let dp_tilde =
        (2.0 * h_tilde / mu) * (r * r * e_dot / h_tilde + (r * r_dot / h_tilde) * work);
    let dp1 = elements.p2 * ((h - h_tilde) / (r * r) - w_h)
        + (x / a_tilde + 2.0 * elements.p2) * work / h_tilde
        + (y_eq * (r + elements.p_tilde) + r * r * elements.p1) * e_dot / (h_tilde * h_tilde);
    let dp2 = elements.p1 * (w_h - (h - h_tilde) / (r * r))
        - (y_eq / a_tilde + 2.0 * elements.p1) * work / h_tilde
        + (x * (r + elements.p_tilde) + r * r * elements.p2) * e_dot / (h_tilde * h_tilde);
    let dq1 = 0.5 * w_y * q_sq;
    let dq2 = 0.5 * w_x * q_sq;
    let dl = h / (r * r) + (r / h) * proj.f_h * tan_half_i_term;

    Ok(Vector6::new(dp_tilde, dp1, dp2, dq1, dq2, dl))
}

/// Propagate an initial state of the given kind over the output grid.
pub fn propagate(
    kind: CoordKind,
    initial: Vector6<f64>,
    t0: f64,
    grid: &[f64],
    config: &DynamicsConfig,
    settings: &OdeSettings,
) -> Result<Trajectory> {
    let states = match kind {
        CoordKind::Cartesian => integrate(
            |t, y| cartesian_rhs(t, y, config),
            t0,
            initial,
            grid,
            settings,
        )?,
        CoordKind::MGeqoe => integrate(
            |t, y| mgeqoe_rhs(t, y, config),
            t0,
            initial,
            grid,
            settings,
        )?,
    };
    Ok(Trajectory {
        kind,
        center: config.central,
        epochs: grid.to_vec(),
        states,
    })
}

/// Map an element trajectory to Cartesian coordinates epoch by epoch.
pub fn trajectory_to_cartesian(traj: &Trajectory, config: &DynamicsConfig) -> Result<Trajectory> {
    match traj.kind {
        CoordKind::Cartesian => Ok(traj.clone()),
        CoordKind::MGeqoe => {
            let mut states = Vec::with_capacity(traj.len());
            for (&epoch, y) in traj.epochs.iter().zip(&traj.states) {
                let elements = MGeqoeState::from_vector(y);
                let state =
                    mgeqoe_to_cart(&elements, config.mu_central, |r, e| config.potential(r, e), Epoch(epoch))?;
                states.push(state.to_vector());
            }
            Ok(Trajectory {
                kind: CoordKind::Cartesian,
                center: traj.center,
                epochs: traj.epochs.clone(),
                states,
            })
        }
    }
}

/// Map a Cartesian trajectory into elements epoch by epoch, unwrapping the
/// longitude so the history is continuous.
pub fn trajectory_to_mgeqoe(traj: &Trajectory, config: &DynamicsConfig) -> Result<Trajectory> {
    match traj.kind {
        CoordKind::MGeqoe => Ok(traj.clone()),
        CoordKind::Cartesian => {
            let mut states = Vec::with_capacity(traj.len());
            let mut previous_l: Option<f64> = None;
            for (&epoch, y) in traj.epochs.iter().zip(&traj.states) {
                let state = CartesianState::from_vector(y);
                let u = config.potential(&state.r, Epoch(epoch))?;
                let mut elements = cart_to_mgeqoe(&state, u, config.mu_central, Epoch(epoch))?;
                if let Some(prev) = previous_l {
                    elements.true_longitude = align_longitude(elements.true_longitude, prev);
                }
                previous_l = Some(elements.true_longitude);
                states.push(elements.to_vector());
            }
            Ok(Trajectory {
                kind: CoordKind::MGeqoe,
                center: traj.center,
                epochs: traj.epochs.clone(),
                states,
            })
        }
    }
}

/// Constant potential offset for an element-space run, evaluated along a
/// Cartesian pre-propagation of the same scenario on the same grid.
pub fn offset_for_trajectory(traj: &Trajectory, config: &DynamicsConfig) -> Result<f64> {
    if traj.kind != CoordKind::Cartesian {
        return Err(Error::InvalidArgument(
            "the offset pre-pass must be a Cartesian trajectory".into(),
        ));
    }
    crate::forces::offset_for_states(
        traj.epochs
            .iter()
            .zip(&traj.states)
            .map(|(&t, y)| (t, CartesianState::from_vector(y))),
        |t, s| config.raw_potential(&s.r, Epoch(t)),
        config.mu_central,
    )
}

/// Per-epoch position and velocity error norms between two Cartesian
/// trajectories on identical grids, reported dimensionally.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    pub epochs: Vec<f64>,
    pub pos_err_km: Vec<f64>,
    pub vel_err_kms: Vec<f64>,
}

pub fn compare_trajectories(
    a: &Trajectory,
    b: &Trajectory,
    units: &CanonicalUnits,
) -> Result<ErrorSeries> {
    if a.kind != CoordKind::Cartesian || b.kind != CoordKind::Cartesian {
        return Err(Error::GridMismatch(
            "comparison needs Cartesian trajectories (convert elements first)".into(),
        ));
    }
    if a.center != b.center {
        return Err(Error::GridMismatch(format!(
            "centers differ: {} vs {}",
            a.center, b.center
        )));
    }
    if a.epochs != b.epochs {
        return Err(Error::GridMismatch(format!(
            "epoch grids differ ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    let mut pos_err_km = Vec::with_capacity(a.len());
    let mut vel_err_kms = Vec::with_capacity(a.len());
    for (ya, yb) in a.states.iter().zip(&b.states) {
        let dr = (ya.fixed_rows::<3>(0) - yb.fixed_rows::<3>(0)).norm();
        let dv = (ya.fixed_rows::<3>(3) - yb.fixed_rows::<3>(3)).norm();
        pos_err_km.push(units.canonical_to_km(dr));
        vel_err_kms.push(units.canonical_to_kms(dv));
    }
    Ok(ErrorSeries {
        epochs: a.epochs.clone(),
        pos_err_km,
        vel_err_kms,
    })
}

/// Total energy v^2/2 - mu/r + U of a Cartesian state (diagnostics).
pub fn total_energy(state: &CartesianState, u: f64, mu: f64) -> f64 {
    state.v.norm_squared() / 2.0 - mu / state.radius() + u
}

/// Rebuild the radius from elements without a full transform (diagnostics).
pub fn element_radius(elements: &MGeqoeState) -> f64 {
    elements.p_tilde / elements.radius_denominator()
}

/// Equinoctial-frame position angle consistency check used in tests: the
/// basis vectors at (q1, q2) applied to X, Y reproduce the element radius.
pub fn element_position(elements: &MGeqoeState) -> Vector3<f64> {
    let r = element_radius(elements);
    let (sin_l, cos_l) = elements.true_longitude.sin_cos();
    let basis = equinoctial_basis(elements.q1, elements.q2);
    r * cos_l * basis.e_x + r * sin_l * basis.e_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::BodyConstants;
    use crate::ephemeris::AnalyticEphemeris;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn kepler_config(mu: f64) -> DynamicsConfig {
        let constants = BodyConstants::default();
        let units = CanonicalUnits::from_constants(&constants).unwrap();
        DynamicsConfig {
            central: Body::Earth,
            mu_central: mu,
            perturbations: PerturbationModel::new(Body::Earth, vec![], vec![]).unwrap(),
            ephemeris: Arc::new(
                AnalyticEphemeris::earth_moon_sun(&constants, &units, 0.0, 0.0).unwrap(),
            ),
        }
    }

    fn moon_config() -> DynamicsConfig {
        let constants = BodyConstants::default();
        let units = CanonicalUnits::from_constants(&constants).unwrap();
        let mu_moon = units.mu_canonical(constants.mu_moon);
        let mu_earth = units.mu_canonical(constants.mu_earth);
        let mu_sun = units.mu_canonical(constants.mu_sun);
        DynamicsConfig {
            central: Body::Moon,
            mu_central: mu_moon,
            perturbations: PerturbationModel::new(
                Body::Moon,
                vec![(Body::Earth, mu_earth)],
                vec![(Body::Sun, mu_sun)],
            )
            .unwrap(),
            ephemeris: Arc::new(
                AnalyticEphemeris::earth_moon_sun(&constants, &units, 0.0, 0.0).unwrap(),
            ),
        }
    }

    #[test]
    fn two_body_limit_is_centripetal() {
        let config = kepler_config(1.0);
        let y = Vector6::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let dy = cartesian_rhs(0.0, &y, &config).unwrap();
        assert_relative_eq!(dy[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(dy[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(dy[3], -1.0, epsilon = 1e-15);
        assert_relative_eq!(dy[4], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn distant_perturber_recovers_two_body() {
        // sun at ~389 canonical barely perturbs a 1-canonical orbit
        let config = moon_config();
        let two_body = kepler_config(config.mu_central);
        let y = Vector6::new(0.01, 0.0, 0.0, 0.0, 1.1, 0.0);
        let perturbed = cartesian_rhs(0.0, &y, &config).unwrap();
        let pure = cartesian_rhs(0.0, &y, &two_body).unwrap();
        // earth tide dominates the difference; solar tide is tiny
        assert!((perturbed - pure).norm() < 2e-2 * pure.norm());
    }

    #[test]
    fn keplerian_element_rates_reduce_to_longitude_rate() {
        let config = kepler_config(1.0);
        let state = CartesianState::new(
            Vector3::new(0.9, 0.1, 0.05),
            Vector3::new(-0.1, 1.0, 0.02),
        );
        let elements = cart_to_mgeqoe(&state, 0.0, 1.0, Epoch(0.0)).unwrap();
        let rates = mgeqoe_rhs(0.0, &elements.to_vector(), &config).unwrap();
        for i in 0..5 {
            assert!(rates[i].abs() < 1e-15, "element {i} rate {}", rates[i]);
        }
        let r = state.radius();
        let h = state.angular_momentum().norm();
        assert_relative_eq!(rates[5], h / (r * r), max_relative = 1e-13);
    }

    #[test]
    fn keplerian_energy_conserved_over_ten_periods() {
        let config = kepler_config(1.0);
        let y0 = Vector6::new(1.05, 0.0, 0.0, 0.0, 0.93, 0.05);
        let state0 = CartesianState::from_vector(&y0);
        let e0 = total_energy(&state0, 0.0, 1.0);
        let a = -1.0 / (2.0 * e0);
        let period = TAU * a.powi(3).sqrt();
        let grid: Vec<f64> = (1..=40).map(|i| i as f64 * period / 4.0).collect();
        let traj = propagate(
            CoordKind::Cartesian,
            y0,
            0.0,
            &grid,
            &config,
            &OdeSettings::default(),
        )
        .unwrap();
        for y in &traj.states {
            let e = total_energy(&CartesianState::from_vector(y), 0.0, 1.0);
            assert!(
                (e - e0).abs() < 1e-10,
                "energy drift {:e}",
                (e - e0).abs()
            );
        }
    }

    #[test]
    fn keplerian_elements_frozen_in_element_propagation() {
        let config = kepler_config(1.0);
        let state0 = CartesianState::new(
            Vector3::new(1.1, 0.0, 0.1),
            Vector3::new(0.0, 0.92, 0.05),
        );
        let elements0 = cart_to_mgeqoe(&state0, 0.0, 1.0, Epoch(0.0)).unwrap();
        let grid: Vec<f64> = (1..=30).map(|i| i as f64 * 2.0).collect();
        let traj = propagate(
            CoordKind::MGeqoe,
            elements0.to_vector(),
            0.0,
            &grid,
            &config,
            &OdeSettings::default(),
        )
        .unwrap();
        let y0 = elements0.to_vector();
        for y in &traj.states {
            for i in 0..5 {
                assert!(
                    (y[i] - y0[i]).abs() < 1e-12,
                    "element {i} drifted by {:e}",
                    (y[i] - y0[i]).abs()
                );
            }
        }
        // longitude is unwrapped: strictly increasing, well past 2 pi
        assert!(traj.states.last().unwrap()[5] > TAU);
    }

    #[test]
    fn perturbed_cross_propagation_agrees() {
        // moon-centered eccentric orbit under earth + sun perturbation
        let config = moon_config();
        let mu: f64 = config.mu_central;
        let r0: Vector3<f64> = Vector3::new(0.02, 0.0, 0.01);
        let rn = r0.norm();
        let v_circ = (mu / rn).sqrt();
        let v0 = Vector3::new(0.0, 1.15 * v_circ, 0.0);
        let y0 = CartesianState::new(r0, v0).to_vector();
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let settings = OdeSettings::default();

        let cart = propagate(CoordKind::Cartesian, y0, 0.0, &grid, &config, &settings).unwrap();

        // offset from the cartesian pre-pass
        let offset = offset_for_trajectory(&cart, &config).unwrap();
        let config_off = config.with_offset(offset);

        let state0 = CartesianState::from_vector(&y0);
        let u0 = config_off.potential(&state0.r, Epoch(0.0)).unwrap();
        let elements0 = cart_to_mgeqoe(&state0, u0, mu, Epoch(0.0)).unwrap();
        let elem_traj = propagate(
            CoordKind::MGeqoe,
            elements0.to_vector(),
            0.0,
            &grid,
            &config_off,
            &settings,
        )
        .unwrap();
        let mapped = trajectory_to_cartesian(&elem_traj, &config_off).unwrap();

        for (ya, yb) in cart.states.iter().zip(&mapped.states) {
            let dr = (ya.fixed_rows::<3>(0) - yb.fixed_rows::<3>(0)).norm();
            assert!(dr < 1e-9, "cross-propagation position error {dr:e}");
        }
    }

    #[test]
    fn compare_detects_offsets_and_mismatches() {
        let units = CanonicalUnits::from_constants(&BodyConstants::default()).unwrap();
        let traj = Trajectory {
            kind: CoordKind::Cartesian,
            center: Body::Earth,
            epochs: vec![0.0, 1.0],
            states: vec![Vector6::zeros(), Vector6::repeat(1.0)],
        };
        let same = compare_trajectories(&traj, &traj, &units).unwrap();
        assert!(same.pos_err_km.iter().all(|&e| e == 0.0));

        let mut shifted = traj.clone();
        let dx = units.km_to_canonical(1.0);
        for y in &mut shifted.states {
            y[0] += dx;
        }
        let series = compare_trajectories(&traj, &shifted, &units).unwrap();
        for e in &series.pos_err_km {
            // adding 2.6e-6 canonical to a unit component costs ~1e-10 of
            // the shift to rounding before the subtraction recovers it
            assert_relative_eq!(*e, 1.0, max_relative = 1e-9);
        }

        let mut bad_grid = traj.clone();
        bad_grid.epochs[1] = 2.0;
        assert!(matches!(
            compare_trajectories(&traj, &bad_grid, &units),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn periapsis_index_finds_radius_minimum() {
        let traj = Trajectory {
            kind: CoordKind::Cartesian,
            center: Body::Earth,
            epochs: vec![0.0, 1.0, 2.0],
            states: vec![
                Vector6::new(2.0, 0.0, 0.0, 0.0, 0.0, 0.0),
                Vector6::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.0),
                Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            ],
        };
        assert_eq!(traj.periapsis_index(), Some(1));
    }
}
