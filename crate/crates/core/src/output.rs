//! Plot-ready CSV products and flat key/value metadata sidecars.
//!
//! Floats are written as 17-significant-digit scientific notation so every
//! value round-trips exactly and repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector6;

use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::propagation::{CoordKind, ErrorSeries, Trajectory};
use crate::uncertainty::{Ensemble, HzSeries};
use crate::units::CanonicalUnits;

/// Exact-round-trip float formatting.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Key/value sidecar describing a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub center: Body,
    pub kind: CoordKind,
    pub l_star_km: f64,
    pub t_star_s: f64,
    pub v_star_kms: f64,
    pub u_offset: f64,
}

impl TrajectoryMeta {
    pub fn new(traj: &Trajectory, units: &CanonicalUnits, u_offset: f64) -> Self {
        TrajectoryMeta {
            center: traj.center,
            kind: traj.kind,
            l_star_km: units.l_star,
            t_star_s: units.t_star,
            v_star_kms: units.v_star,
            u_offset,
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "center = \"{}\"", self.center);
        let _ = writeln!(out, "kind = \"{}\"", self.kind.name());
        let _ = writeln!(out, "l_star_km = {}", fmt_float(self.l_star_km));
        let _ = writeln!(out, "t_star_s = {}", fmt_float(self.t_star_s));
        let _ = writeln!(out, "v_star_kms = {}", fmt_float(self.v_star_kms));
        let _ = writeln!(out, "u_offset = {}", fmt_float(self.u_offset));
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let get = |key: &str| -> Result<f64> {
            table
                .get(key)
                .and_then(|v| v.as_float())
                .ok_or_else(|| Error::Config(format!("{}: missing '{key}'", path.display())))
        };
        let get_str = |key: &str| -> Result<&str> {
            table
                .get(key)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Config(format!("{}: missing '{key}'", path.display())))
        };
        Ok(TrajectoryMeta {
            center: Body::parse(get_str("center")?)?,
            kind: CoordKind::parse(get_str("kind")?)?,
            l_star_km: get("l_star_km")?,
            t_star_s: get("t_star_s")?,
            v_star_kms: get("v_star_kms")?,
            u_offset: get("u_offset")?,
        })
    }
}

/// Sidecar path for a CSV product.
pub fn meta_path(csv_path: &Path) -> std::path::PathBuf {
    let mut os = csv_path.as_os_str().to_owned();
    os.push(".meta");
    os.into()
}

/// Write `epoch,kind,x1..x6` (canonical units) plus the metadata sidecar.
pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory,
    units: &CanonicalUnits,
    u_offset: f64,
) -> Result<()> {
    let mut out = String::from("epoch,kind,x1,x2,x3,x4,x5,x6\n");
    for (epoch, state) in traj.epochs.iter().zip(&traj.states) {
        let _ = write!(out, "{},{}", fmt_float(*epoch), traj.kind.name());
        for k in 0..6 {
            let _ = write!(out, ",{}", fmt_float(state[k]));
        }
        out.push('\n');
    }
    write_file(path, &out)?;
    write_file(
        &meta_path(path),
        &TrajectoryMeta::new(traj, units, u_offset).render(),
    )
}

/// Read a trajectory CSV and its sidecar back.
pub fn read_trajectory(path: &Path) -> Result<(Trajectory, TrajectoryMeta)> {
    let meta = TrajectoryMeta::load(&meta_path(path))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut epochs = Vec::new();
    let mut states = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if record.len() != 8 {
            return Err(Error::Config(format!(
                "{} row {}: expected 8 columns",
                path.display(),
                line + 2
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), line + 2)))
        };
        epochs.push(parse(&record[0])?);
        let kind = CoordKind::parse(&record[1])?;
        if kind != meta.kind {
            return Err(Error::Config(format!(
                "{} row {}: kind column disagrees with sidecar",
                path.display(),
                line + 2
            )));
        }
        let mut y = Vector6::zeros();
        for k in 0..6 {
            y[k] = parse(&record[k + 2])?;
        }
        states.push(y);
    }
    Ok((
        Trajectory {
            kind: meta.kind,
            center: meta.center,
            epochs,
            states,
        },
        meta,
    ))
}

/// Write `epoch,pos_err_km,vel_err_kms`.
pub fn write_error_series(path: &Path, series: &ErrorSeries) -> Result<()> {
    let mut out = String::from("epoch,pos_err_km,vel_err_kms\n");
    for ((epoch, pos), vel) in series
        .epochs
        .iter()
        .zip(&series.pos_err_km)
        .zip(&series.vel_err_kms)
    {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_float(*epoch),
            fmt_float(*pos),
            fmt_float(*vel)
        );
    }
    write_file(path, &out)
}

/// Write dimensional position/velocity views of a Cartesian trajectory,
/// header `epoch_days,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms`.
pub fn write_state_view(path: &Path, traj: &Trajectory, units: &CanonicalUnits) -> Result<()> {
    let mut out = String::from("epoch_days,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms\n");
    for (epoch, state) in traj.epochs.iter().zip(&traj.states) {
        let _ = write!(out, "{}", fmt_float(units.canonical_to_days(*epoch)));
        for k in 0..3 {
            let _ = write!(out, ",{}", fmt_float(units.canonical_to_km(state[k])));
        }
        for k in 3..6 {
            let _ = write!(out, ",{}", fmt_float(units.canonical_to_kms(state[k])));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Write the element history `epoch,p_tilde,p1,p2,q1,q2,L` (canonical).
pub fn write_element_history(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("epoch,p_tilde,p1,p2,q1,q2,L\n");
    for (epoch, state) in traj.epochs.iter().zip(&traj.states) {
        let _ = write!(out, "{}", fmt_float(*epoch));
        for k in 0..6 {
            let _ = write!(out, ",{}", fmt_float(state[k]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Write `epoch,hz,p_value,reject,beta`.
pub fn write_hz_series(path: &Path, series: &HzSeries) -> Result<()> {
    let mut out = String::from("epoch,hz,p_value,reject,beta\n");
    for (epoch, r) in series.epochs.iter().zip(&series.results) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(*epoch),
            fmt_float(r.hz),
            fmt_float(r.p_value),
            r.reject,
            fmt_float(r.beta)
        );
    }
    write_file(path, &out)
}

/// Write ensemble snapshots `sample_id,epoch,x1..x6` at selected epoch
/// indices, plus a sidecar with kind, seed, sigmas, and offset.
pub fn write_ensemble_snapshot(
    path: &Path,
    ensemble: &Ensemble,
    epoch_indices: &[usize],
    seed: u64,
    sigma_pos_km: f64,
    sigma_vel_kms: f64,
    u_offset: f64,
) -> Result<()> {
    let mut out = String::from("sample_id,epoch,x1,x2,x3,x4,x5,x6\n");
    for &e in epoch_indices {
        let epoch = ensemble.epochs[e];
        for (i, y) in ensemble.samples[e].iter().enumerate() {
            let _ = write!(out, "{i},{}", fmt_float(epoch));
            for k in 0..6 {
                let _ = write!(out, ",{}", fmt_float(y[k]));
            }
            out.push('\n');
        }
    }
    write_file(path, &out)?;

    let mut meta = String::new();
    let _ = writeln!(meta, "kind = \"{}\"", ensemble.kind.name());
    let _ = writeln!(meta, "seed = {seed}");
    let _ = writeln!(meta, "sigma_pos_km = {}", fmt_float(sigma_pos_km));
    let _ = writeln!(meta, "sigma_vel_kms = {}", fmt_float(sigma_vel_kms));
    let _ = writeln!(meta, "u_offset = {}", fmt_float(u_offset));
    write_file(&meta_path(path), &meta)
}

/// Write per-sample rows of one 6-column matrix with the given header names.
pub fn write_sample_matrix(path: &Path, header: &str, rows: &[Vector6<f64>]) -> Result<()> {
    let mut out = format!("sample_id,{header}\n");
    for (i, y) in rows.iter().enumerate() {
        let _ = write!(out, "{i}");
        for k in 0..6 {
            let _ = write!(out, ",{}", fmt_float(y[k]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}
