//! Scenario configuration: one TOML file per run, dimensional inputs
//! (km, km/s, days), converted to canonical units at load time.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;

use crate::bodies::{Body, BodyConstants};
use crate::ephemeris::{AnalyticEphemeris, EphemerisProvider, TabulatedEphemeris};
use crate::error::{Error, Result};
use crate::forces::PerturbationModel;
use crate::propagation::{CoordKind, DynamicsConfig, Method, OdeSettings};
use crate::state::CartesianState;
use crate::uncertainty::EnsembleSpec;
use crate::units::CanonicalUnits;

/// Default number of output-grid intervals per span.
pub const DEFAULT_GRID_INTERVALS: usize = 1000;

#[derive(Debug, Clone)]
pub enum EphemerisChoice {
    Analytic {
        moon_phase_rad: f64,
        sun_phase_rad: f64,
    },
    Tabulated {
        path: PathBuf,
    },
}

/// A fully validated scenario, still carrying dimensional values; canonical
/// quantities come from the accessor methods.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub central: Body,
    pub kinds: Vec<CoordKind>,
    pub constants: BodyConstants,
    pub units: CanonicalUnits,
    pub initial_position_km: Vector3<f64>,
    pub initial_velocity_kms: Vector3<f64>,
    pub epoch_days: f64,
    pub span_days: f64,
    pub grid_step_s: Option<f64>,
    pub ode: OdeSettings,
    pub ephemeris: EphemerisChoice,
    pub third_body: bool,
    pub sun: bool,
    pub ensemble: Option<EnsembleSpec>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parse scenario TOML; relative file references resolve against `base`.
    /// Unknown keys are rejected everywhere so misplaced or misspelled
    /// settings cannot be silently ignored.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        check_keys(
            &table,
            &[
                "name",
                "central",
                "kinds",
                "constants_file",
                "initial_state",
                "time",
                "ode",
                "ephemeris",
                "perturbations",
                "ensemble",
            ],
            "scenario",
        )?;

        let name = get_str(&table, "name")?;
        let central = Body::parse(&get_str(&table, "central")?)?;
        if central == Body::Sun {
            return Err(Error::Config("the sun cannot be the central body".into()));
        }
        let kinds = match table.get("kinds") {
            None => vec![CoordKind::Cartesian, CoordKind::MGeqoe],
            Some(value) => value
                .as_array()
                .ok_or_else(|| Error::Config("'kinds' must be an array".into()))?
                .iter()
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| Error::Config("'kinds' entries must be strings".into()))
                        .and_then(CoordKind::parse)
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if kinds.is_empty() {
            return Err(Error::Config("'kinds' must name at least one kind".into()));
        }

        let constants = match table.get("constants_file") {
            None => BodyConstants::default(),
            Some(value) => {
                let rel = value
                    .as_str()
                    .ok_or_else(|| Error::Config("'constants_file' must be a path".into()))?;
                BodyConstants::from_file(&base.join(rel))?
            }
        };
        let units = CanonicalUnits::from_constants(&constants)?;

        let initial = sub_table(&table, "initial_state")?;
        check_keys(
            initial,
            &["position_km", "velocity_kms", "epoch_days"],
            "initial_state",
        )?;
        let initial_position_km = get_vec3(initial, "position_km")?;
        let initial_velocity_kms = get_vec3(initial, "velocity_kms")?;
        let epoch_days = get_f64_or(initial, "epoch_days", 0.0)?;
        if !initial_position_km.iter().all(|v| v.is_finite())
            || !initial_velocity_kms.iter().all(|v| v.is_finite())
        {
            return Err(Error::Config("initial state must be finite".into()));
        }

        let time = sub_table(&table, "time")?;
        check_keys(time, &["span_days", "grid_step_s"], "time")?;
        let span_days = get_f64(time, "span_days")?;
        if !(span_days > 0.0) {
            return Err(Error::Config(format!(
                "span_days must be positive, got {span_days}"
            )));
        }
        let grid_step_s = match time.get("grid_step_s") {
            None => None,
            Some(v) => {
                let step = as_f64(v, "grid_step_s")?;
                if !(step > 0.0) {
                    return Err(Error::Config(format!(
                        "grid_step_s must be positive, got {step}"
                    )));
                }
                Some(step)
            }
        };

        let mut ode = OdeSettings::default();
        if let Some(value) = table.get("ode") {
            let ode_table = value
                .as_table()
                .ok_or_else(|| Error::Config("'ode' must be a table".into()))?;
            check_keys(
                ode_table,
                &["rel_tol", "abs_tol", "h_min", "h_max", "h_init", "method"],
                "ode",
            )?;
            ode.rel_tol = get_f64_or(ode_table, "rel_tol", ode.rel_tol)?;
            ode.abs_tol = get_f64_or(ode_table, "abs_tol", ode.abs_tol)?;
            ode.h_min = get_f64_or(ode_table, "h_min", ode.h_min)?;
            ode.h_max = get_f64_or(ode_table, "h_max", ode.h_max)?;
            ode.h_init = get_f64_or(ode_table, "h_init", ode.h_init)?;
            if let Some(m) = ode_table.get("method") {
                ode.method = Method::parse(
                    m.as_str()
                        .ok_or_else(|| Error::Config("'method' must be a string".into()))?,
                )?;
            }
        }
        ode.validate()?;

        let ephemeris = match table.get("ephemeris") {
            None => EphemerisChoice::Analytic {
                moon_phase_rad: 0.0,
                sun_phase_rad: 0.0,
            },
            Some(value) => {
                let eph = value
                    .as_table()
                    .ok_or_else(|| Error::Config("'ephemeris' must be a table".into()))?;
                check_keys(
                    eph,
                    &["provider", "path", "moon_phase_rad", "sun_phase_rad"],
                    "ephemeris",
                )?;
                match get_str(eph, "provider")?.as_str() {
                    "analytic" => EphemerisChoice::Analytic {
                        moon_phase_rad: get_f64_or(eph, "moon_phase_rad", 0.0)?,
                        sun_phase_rad: get_f64_or(eph, "sun_phase_rad", 0.0)?,
                    },
                    "tabulated" => {
                        let rel = get_str(eph, "path")?;
                        let path = base.join(rel);
                        if !path.exists() {
                            return Err(Error::Config(format!(
                                "ephemeris file {} does not exist",
                                path.display()
                            )));
                        }
                        EphemerisChoice::Tabulated { path }
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "unknown ephemeris provider '{other}'"
                        )))
                    }
                }
            }
        };

        let (third_body, sun) = match table.get("perturbations") {
            None => (true, true),
            Some(value) => {
                let p = value
                    .as_table()
                    .ok_or_else(|| Error::Config("'perturbations' must be a table".into()))?;
                check_keys(p, &["third_body", "sun"], "perturbations")?;
                (
                    get_bool_or(p, "third_body", true)?,
                    get_bool_or(p, "sun", true)?,
                )
            }
        };

        let ensemble = match table.get("ensemble") {
            None => None,
            Some(value) => {
                let e = value
                    .as_table()
                    .ok_or_else(|| Error::Config("'ensemble' must be a table".into()))?;
                check_keys(
                    e,
                    &["n_samples", "sigma_pos_km", "sigma_vel_kms", "seed"],
                    "ensemble",
                )?;
                let spec = EnsembleSpec {
                    n_samples: get_f64(e, "n_samples")? as usize,
                    sigma_pos_km: get_f64(e, "sigma_pos_km")?,
                    sigma_vel_kms: get_f64(e, "sigma_vel_kms")?,
                    seed: get_f64_or(e, "seed", 0.0)? as u64,
                };
                spec.validate()?;
                Some(spec)
            }
        };

        Ok(Scenario {
            name,
            central,
            kinds,
            constants,
            units,
            initial_position_km,
            initial_velocity_kms,
            epoch_days,
            span_days,
            grid_step_s,
            ode,
            ephemeris,
            third_body,
            sun,
            ensemble,
        })
    }

    /// Initial state in canonical units.
    pub fn initial_state(&self) -> CartesianState {
        self.units.nondimensionalize(&CartesianState::new(
            self.initial_position_km,
            self.initial_velocity_kms,
        ))
    }

    /// Initial epoch in canonical time.
    pub fn t0(&self) -> f64 {
        self.units.days_to_canonical(self.epoch_days)
    }

    /// Output grid: uniform epochs over the span, endpoints included.
    pub fn output_grid(&self) -> Vec<f64> {
        let t0 = self.t0();
        let span = self.units.days_to_canonical(self.span_days);
        let intervals = match self.grid_step_s {
            Some(step) => {
                let n = (self.span_days * crate::units::SECONDS_PER_DAY / step).round() as usize;
                n.max(1)
            }
            None => DEFAULT_GRID_INTERVALS,
        };
        (0..=intervals)
            .map(|k| t0 + span * k as f64 / intervals as f64)
            .collect()
    }

    /// Dynamics configuration (potential offset zero; the pipeline fills it
    /// in after the Cartesian pre-pass).
    pub fn dynamics(&self) -> Result<DynamicsConfig> {
        let provider: Arc<dyn EphemerisProvider> = match &self.ephemeris {
            EphemerisChoice::Analytic {
                moon_phase_rad,
                sun_phase_rad,
            } => Arc::new(AnalyticEphemeris::earth_moon_sun(
                &self.constants,
                &self.units,
                *moon_phase_rad,
                *sun_phase_rad,
            )?),
            EphemerisChoice::Tabulated { path } => {
                Arc::new(TabulatedEphemeris::from_csv_file(path, Body::Earth)?)
            }
        };

        let other_primary = match self.central {
            Body::Earth => Body::Moon,
            Body::Moon => Body::Earth,
            Body::Sun => unreachable!("rejected at load"),
        };
        let mut potential_bodies = Vec::new();
        if self.third_body {
            potential_bodies.push((
                other_primary,
                self.units.mu_canonical(self.constants.mu(other_primary)),
            ));
        }
        let mut force_bodies = Vec::new();
        if self.sun {
            force_bodies.push((Body::Sun, self.units.mu_canonical(self.constants.mu_sun)));
        }

        Ok(DynamicsConfig {
            central: self.central,
            mu_central: self.units.mu_canonical(self.constants.mu(self.central)),
            perturbations: PerturbationModel::new(self.central, potential_bodies, force_bodies)?,
            ephemeris: provider,
        })
    }
}

fn check_keys(table: &toml::Table, allowed: &[&str], context: &str) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown key '{key}' in [{context}] (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn sub_table<'t>(table: &'t toml::Table, key: &str) -> Result<&'t toml::Table> {
    table
        .get(key)
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::Config(format!("missing [{key}] table")))
}

fn get_str(table: &toml::Table, key: &str) -> Result<String> {
    table
        .get(key)
        .and_then(|v| v.as_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Config(format!("missing or non-string key '{key}'")))
}

fn as_f64(value: &toml::Value, key: &str) -> Result<f64> {
    value
        .as_float()
        .or_else(|| value.as_integer().map(|i| i as f64))
        .ok_or_else(|| Error::Config(format!("key '{key}' must be a number")))
}

fn get_f64(table: &toml::Table, key: &str) -> Result<f64> {
    let value = table
        .get(key)
        .ok_or_else(|| Error::Config(format!("missing key '{key}'")))?;
    as_f64(value, key)
}

fn get_f64_or(table: &toml::Table, key: &str, default: f64) -> Result<f64> {
    match table.get(key) {
        None => Ok(default),
        Some(v) => as_f64(v, key),
    }
}

fn get_bool_or(table: &toml::Table, key: &str, default: bool) -> Result<bool> {
    match table.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_bool()
            .ok_or_else(|| Error::Config(format!("key '{key}' must be a boolean"))),
    }
}

fn get_vec3(table: &toml::Table, key: &str) -> Result<Vector3<f64>> {
    let array = table
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config(format!("missing or non-array key '{key}'")))?;
    if array.len() != 3 {
        return Err(Error::Config(format!(
            "key '{key}' must hold exactly 3 numbers"
        )));
    }
    let mut out = Vector3::zeros();
    for (i, v) in array.iter().enumerate() {
        out[i] = as_f64(v, key)?;
    }
    Ok(out)
}
