//! Error type shared across the crate.

use crate::bodies::Body;

/// Errors produced by state transforms, dynamics evaluation, propagation,
/// ensemble statistics, and configuration loading.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Rectilinear motion or coincident primaries: no orbital frame exists.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Retrograde-singular orientation, 1 + e_h.e_z below tolerance.
    #[error("singular orientation: 1 + e_h*e_z = {denom:.3e} is below tolerance")]
    SingularOrientation { denom: f64 },

    /// Effective potential went negative; the configured offset is missing
    /// or insufficient at this epoch.
    #[error(
        "negative effective potential U_eff = {u_eff:.6e} at epoch {epoch:.9}; \
         the potential offset is missing or insufficient"
    )]
    NegativeEffectivePotential { u_eff: f64, epoch: f64 },

    /// Radius denominator 1 + p1 sin L + p2 cos L is non-positive: the state
    /// left the elliptic branch of the element set.
    #[error("hyperbolic branch: radius denominator {denom:.6e} is non-positive")]
    HyperbolicBranch { denom: f64 },

    /// h_tilde^2 - 2 r^2 U went negative while recovering the osculating
    /// angular momentum; the supplied potential is inconsistent with the
    /// elements.
    #[error("inconsistent potential: h_tilde^2 - 2 r^2 U = {value:.6e} is negative")]
    InconsistentPotential { value: f64 },

    /// p1^2 + p2^2 reached 1: the generalized semi-major axis is singular.
    #[error("generalized eccentricity singularity: p1^2 + p2^2 = {norm_sq:.12}")]
    EccentricitySingularity { norm_sq: f64 },

    #[error("proximity: distance {distance:.3e} to perturbing body {body} below tolerance")]
    Proximity { body: Body, distance: f64 },

    #[error("ephemeris does not cover epoch {epoch:.9} (span [{t_min:.9}, {t_max:.9}])")]
    EphemerisOutOfRange { epoch: f64, t_min: f64, t_max: f64 },

    #[error("body {body} not available from this ephemeris provider")]
    UnknownBody { body: Body },

    /// The adaptive integrator could not meet the tolerance above the
    /// minimum step size.
    #[error("step size underflow at epoch {epoch:.9}: required h = {h:.3e} < h_min = {h_min:.3e}")]
    StepUnderflow { epoch: f64, h: f64, h_min: f64 },

    /// Epoch annotation added by the integrator to dynamics failures that
    /// carry no epoch of their own.
    #[error("at epoch {epoch:.9}: {source}")]
    AtEpoch {
        epoch: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),

    #[error("degenerate sample covariance: {0}")]
    DegenerateCovariance(String),

    #[error("invalid null-distribution moments: mean = {mean:.6e}, variance = {variance:.6e}")]
    InvalidMoments { mean: f64, variance: f64 },

    /// A Monte Carlo sample failed to propagate; nothing is dropped silently.
    #[error("sample {sample_id} failed at epoch {epoch:.9}: {source}")]
    SampleFailure {
        sample_id: usize,
        epoch: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("io: {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// `true` for configuration and input errors (CLI exit code 2),
    /// `false` for numerical failures (exit code 3).
    pub fn is_config(&self) -> bool {
        match self {
            Error::AtEpoch { source, .. } => source.is_config(),
            Error::InvalidArgument(_)
            | Error::UnknownBody { .. }
            | Error::GridMismatch(_)
            | Error::Config(_)
            | Error::Io { .. } => true,
            _ => false,
        }
    }

    /// The epoch this error reports, when it reports one.
    pub fn epoch(&self) -> Option<f64> {
        match self {
            Error::StepUnderflow { epoch, .. }
            | Error::NegativeEffectivePotential { epoch, .. }
            | Error::EphemerisOutOfRange { epoch, .. }
            | Error::AtEpoch { epoch, .. }
            | Error::SampleFailure { epoch, .. } => Some(*epoch),
            _ => None,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
