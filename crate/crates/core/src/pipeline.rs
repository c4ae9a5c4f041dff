//! Scenario-driven pipelines shared by the command-line front end and the
//! language bindings.
//!
//! Element-space runs always follow the same order: a Cartesian
//! pre-propagation on the output grid, the constant potential offset from
//! that pass, element initialization with the offset-inclusive potential,
//! and only then the element propagation.

use std::path::Path;

use crate::bodies::Body;
use crate::elements::cart_to_mgeqoe;
use crate::ephemeris::recenter;
use crate::error::Result;
use crate::frames::RotatingFrame;
use crate::output;
use crate::propagation::{
    compare_trajectories, offset_for_trajectory, propagate, trajectory_to_cartesian,
    trajectory_to_mgeqoe, CoordKind, DynamicsConfig, ErrorSeries, Trajectory,
};
use crate::scenario::Scenario;
use crate::state::{CartesianState, Epoch};
use crate::uncertainty::{
    eigenspace_projection, hz_series, propagate_ensemble, sample_initial_ensemble,
    transform_samples_to_elements, EigenProjection, Ensemble, HzSeries, DEFAULT_ALPHA,
};

/// Everything a propagate run produces, in memory.
#[derive(Debug, Clone)]
pub struct PropagationProducts {
    pub u_offset: f64,
    /// Direct Cartesian run (when requested).
    pub cartesian: Option<Trajectory>,
    /// Element history of the Cartesian run.
    pub cartesian_elements: Option<Trajectory>,
    /// Element-space run (when requested).
    pub mgeqoe: Option<Trajectory>,
    /// Element-space run mapped to Cartesian coordinates.
    pub mgeqoe_cartesian: Option<Trajectory>,
    /// Position/velocity error series when both runs exist.
    pub errors: Option<ErrorSeries>,
}

/// The constant offset for a scenario: zero when nothing feeds the
/// potential (a nonnegative effective potential needs no shift), otherwise
/// the trajectory maximum from the Cartesian pre-pass.
fn scenario_offset(pre_pass: &Trajectory, config: &DynamicsConfig) -> Result<f64> {
    if config.perturbations.potential_bodies.is_empty() {
        return Ok(0.0);
    }
    offset_for_trajectory(pre_pass, config)
}

/// Run the full propagate pipeline for a scenario.
pub fn run_propagation(scenario: &Scenario) -> Result<PropagationProducts> {
    let config = scenario.dynamics()?;
    let grid = scenario.output_grid();
    let t0 = scenario.t0();
    let initial = scenario.initial_state();

    let pre_pass = propagate(
        CoordKind::Cartesian,
        initial.to_vector(),
        t0,
        &grid,
        &config,
        &scenario.ode,
    )?;
    let u_offset = scenario_offset(&pre_pass, &config)?;
    let config = config.with_offset(u_offset);

    let want_cartesian = scenario.kinds.contains(&CoordKind::Cartesian);
    let want_elements = scenario.kinds.contains(&CoordKind::MGeqoe);

    let cartesian = want_cartesian.then(|| pre_pass.clone());
    let cartesian_elements = if want_cartesian {
        Some(trajectory_to_mgeqoe(&pre_pass, &config)?)
    } else {
        None
    };

    let (mgeqoe, mgeqoe_cartesian) = if want_elements {
        let u0 = config.potential(&initial.r, Epoch(t0))?;
        let elements0 = cart_to_mgeqoe(&initial, u0, config.mu_central, Epoch(t0))?;
        let element_run = propagate(
            CoordKind::MGeqoe,
            elements0.to_vector(),
            t0,
            &grid,
            &config,
            &scenario.ode,
        )?;
        let mapped = trajectory_to_cartesian(&element_run, &config)?;
        (Some(element_run), Some(mapped))
    } else {
        (None, None)
    };

    let errors = match (&cartesian, &mgeqoe_cartesian) {
        (Some(a), Some(b)) => Some(compare_trajectories(a, b, &scenario.units)?),
        _ => None,
    };

    Ok(PropagationProducts {
        u_offset,
        cartesian,
        cartesian_elements,
        mgeqoe,
        mgeqoe_cartesian,
        errors,
    })
}

/// Express a Cartesian trajectory in the instantaneous Earth-Moon rotating
/// frame, epoch by epoch.
pub fn to_rotating_frame(traj: &Trajectory, config: &DynamicsConfig) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(traj.len());
    for (&epoch, y) in traj.epochs.iter().zip(&traj.states) {
        let (earth_r, earth_v) =
            recenter(config.ephemeris.as_ref(), traj.center, Body::Earth, Epoch(epoch))?;
        let (moon_r, moon_v) =
            recenter(config.ephemeris.as_ref(), traj.center, Body::Moon, Epoch(epoch))?;
        let frame = RotatingFrame::earth_moon(
            &CartesianState::new(earth_r, earth_v),
            &CartesianState::new(moon_r, moon_v),
        )?;
        states.push(
            frame
                .from_inertial(&CartesianState::from_vector(y))
                .to_vector(),
        );
    }
    Ok(Trajectory {
        kind: CoordKind::Cartesian,
        center: traj.center,
        epochs: traj.epochs.clone(),
        states,
    })
}

/// Write every propagate product for a scenario into `out_dir`.
pub fn write_propagation_products(
    scenario: &Scenario,
    products: &PropagationProducts,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::Error::io(out_dir, e))?;
    let config = scenario.dynamics()?.with_offset(products.u_offset);
    let units = &scenario.units;
    let name = &scenario.name;
    let file = |suffix: &str| out_dir.join(format!("{name}_{suffix}.csv"));

    if let Some(traj) = &products.cartesian {
        output::write_trajectory(&file("cartesian"), traj, units, products.u_offset)?;
        output::write_state_view(&file("inertial_cartesian"), traj, units)?;
        let rotating = to_rotating_frame(traj, &config)?;
        output::write_state_view(&file("rotating_cartesian"), &rotating, units)?;
    }
    if let Some(history) = &products.cartesian_elements {
        output::write_element_history(&file("history_cartesian"), history)?;
    }
    if let Some(traj) = &products.mgeqoe {
        output::write_trajectory(&file("mgeqoe"), traj, units, products.u_offset)?;
        output::write_element_history(&file("history_mgeqoe"), traj)?;
    }
    if let Some(traj) = &products.mgeqoe_cartesian {
        output::write_trajectory(&file("mgeqoe_cartesian"), traj, units, products.u_offset)?;
        output::write_state_view(&file("inertial_mgeqoe"), traj, units)?;
        let rotating = to_rotating_frame(traj, &config)?;
        output::write_state_view(&file("rotating_mgeqoe"), &rotating, units)?;
    }
    if let Some(errors) = &products.errors {
        output::write_error_series(&file("error"), errors)?;
    }
    Ok(())
}

/// Options of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    pub alpha: f64,
    /// Pairs-plot epochs (days); defaults to the periapsis of the mean
    /// Cartesian trajectory (grid radius minimum).
    pub snapshot_epochs_days: Option<Vec<f64>>,
    /// Bound on the O(N^2) kernel sample count.
    pub hz_subsample: Option<usize>,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            alpha: DEFAULT_ALPHA,
            snapshot_epochs_days: None,
            hz_subsample: None,
        }
    }
}

/// One coordinate kind's Monte Carlo results.
#[derive(Debug, Clone)]
pub struct KindResults {
    pub ensemble: Ensemble,
    pub hz: HzSeries,
    /// Eigenspace projections at each snapshot index.
    pub eigen: Vec<EigenProjection>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloProducts {
    pub u_offset: f64,
    /// Mean-state Cartesian trajectory (the pre-pass).
    pub mean_trajectory: Trajectory,
    /// Grid indices of the snapshot epochs.
    pub snapshot_indices: Vec<usize>,
    pub cartesian: Option<KindResults>,
    pub mgeqoe: Option<KindResults>,
}

/// Run the Monte Carlo pipeline for a scenario with an `[ensemble]` block.
pub fn run_monte_carlo(
    scenario: &Scenario,
    options: &MonteCarloOptions,
) -> Result<MonteCarloProducts> {
    let spec = scenario.ensemble.ok_or_else(|| {
        crate::error::Error::Config("scenario has no [ensemble] block".into())
    })?;
    let config = scenario.dynamics()?;
    let grid = scenario.output_grid();
    let t0 = scenario.t0();
    let initial = scenario.initial_state();

    let mean_trajectory = propagate(
        CoordKind::Cartesian,
        initial.to_vector(),
        t0,
        &grid,
        &config,
        &scenario.ode,
    )?;
    let u_offset = scenario_offset(&mean_trajectory, &config)?;
    let config = config.with_offset(u_offset);

    let snapshot_indices = match &options.snapshot_epochs_days {
        Some(days) => {
            let mut indices: Vec<usize> = days
                .iter()
                .map(|d| {
                    let target = scenario.units.days_to_canonical(*d);
                    nearest_index(&grid, target)
                })
                .collect();
            indices.sort_unstable();
            indices.dedup();
            indices
        }
        None => vec![mean_trajectory.periapsis_index().unwrap_or(grid.len() - 1)],
    };

    let initial_samples = sample_initial_ensemble(&initial, &spec, &scenario.units)?;

    let run_kind = |kind: CoordKind| -> Result<KindResults> {
        let seeds = match kind {
            CoordKind::Cartesian => initial_samples.clone(),
            CoordKind::MGeqoe => transform_samples_to_elements(&initial_samples, t0, &config)?,
        };
        let ensemble = propagate_ensemble(&seeds, kind, t0, &grid, &config, &scenario.ode)?;
        let hz = hz_series(&ensemble, options.alpha, options.hz_subsample)?;
        let eigen = snapshot_indices
            .iter()
            .map(|&e| eigenspace_projection(ensemble.at_epoch(e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KindResults { ensemble, hz, eigen })
    };

    let cartesian = if scenario.kinds.contains(&CoordKind::Cartesian) {
        Some(run_kind(CoordKind::Cartesian)?)
    } else {
        None
    };
    let mgeqoe = if scenario.kinds.contains(&CoordKind::MGeqoe) {
        Some(run_kind(CoordKind::MGeqoe)?)
    } else {
        None
    };

    Ok(MonteCarloProducts {
        u_offset,
        mean_trajectory,
        snapshot_indices,
        cartesian,
        mgeqoe,
    })
}

fn nearest_index(grid: &[f64], target: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (*a - target)
                .abs()
                .partial_cmp(&(*b - target).abs())
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Write every Monte Carlo product for a scenario into `out_dir`.
pub fn write_monte_carlo_products(
    scenario: &Scenario,
    products: &MonteCarloProducts,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::Error::io(out_dir, e))?;
    let spec = scenario.ensemble.expect("checked by run_monte_carlo");
    let name = &scenario.name;

    for results in [&products.cartesian, &products.mgeqoe].into_iter().flatten() {
        let kind = results.ensemble.kind.name();
        output::write_hz_series(
            &out_dir.join(format!("{name}_hz_{kind}.csv")),
            &results.hz,
        )?;
        output::write_ensemble_snapshot(
            &out_dir.join(format!("{name}_ensemble_{kind}.csv")),
            &results.ensemble,
            &products.snapshot_indices,
            spec.seed,
            spec.sigma_pos_km,
            spec.sigma_vel_kms,
            products.u_offset,
        )?;
        for (slot, &e) in products.snapshot_indices.iter().enumerate() {
            output::write_sample_matrix(
                &out_dir.join(format!("{name}_pairs_{kind}_snap{slot}.csv")),
                "x1,x2,x3,x4,x5,x6",
                results.ensemble.at_epoch(e),
            )?;
            output::write_sample_matrix(
                &out_dir.join(format!("{name}_eigpairs_{kind}_snap{slot}.csv")),
                "lambda_1,lambda_2,lambda_3,lambda_4,lambda_5,lambda_6",
                &results.eigen[slot].projected,
            )?;
        }
    }
    Ok(())
}
