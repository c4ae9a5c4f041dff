//! Monte Carlo ensembles and the Henze-Zirkler multivariate normality test.
//!
//! Sampling draws per-sample counter-based substreams, so results never
//! depend on the parallel schedule. The O(N^2) pair kernel runs in parallel
//! rows with a fixed-order final reduction; worker count cannot change a
//! single bit of the output.

use nalgebra::{Matrix6, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::elements::cart_to_mgeqoe;
use crate::error::{Error, Result};
use crate::propagation::{integrate, CoordKind, DynamicsConfig, OdeSettings};
use crate::state::{CartesianState, Epoch};
use crate::units::CanonicalUnits;

/// Default significance level for the normality decision.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Initial-uncertainty description: per-axis 1-sigma position and velocity
/// channels, dimensional at the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub sigma_pos_km: f64,
    pub sigma_vel_kms: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "ensemble needs at least 2 samples, got {}",
                self.n_samples
            )));
        }
        if !(self.sigma_pos_km > 0.0) || !(self.sigma_vel_kms > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ensemble sigmas must be positive, got {} km / {} km/s",
                self.sigma_pos_km, self.sigma_vel_kms
            )));
        }
        Ok(())
    }
}

/// Per-epoch sample matrices for one coordinate kind.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub kind: CoordKind,
    pub epochs: Vec<f64>,
    /// `samples[e][i]` is sample `i` at epoch `e`.
    pub samples: Vec<Vec<Vector6<f64>>>,
}

impl Ensemble {
    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn at_epoch(&self, index: usize) -> &[Vector6<f64>] {
        &self.samples[index]
    }
}

/// Draw the initial Cartesian ensemble about a canonical mean state with the
/// diagonal covariance diag(sigma_pos^2 I3, sigma_vel^2 I3). Sample `i`
/// always consumes stream `i` of the seeded generator: identical output for
/// any worker count, and bit-exact repetition for a fixed seed.
pub fn sample_initial_ensemble(
    mean: &CartesianState,
    spec: &EnsembleSpec,
    units: &CanonicalUnits,
) -> Result<Vec<Vector6<f64>>> {
    spec.validate()?;
    let sigma_pos = units.km_to_canonical(spec.sigma_pos_km);
    let sigma_vel = units.kms_to_canonical(spec.sigma_vel_kms);
    let mean_vec = mean.to_vector();
    Ok((0..spec.n_samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let mut y = mean_vec;
            for k in 0..3 {
                let draw: f64 = StandardNormal.sample(&mut rng);
                y[k] += sigma_pos * draw;
            }
            for k in 3..6 {
                let draw: f64 = StandardNormal.sample(&mut rng);
                y[k] += sigma_vel * draw;
            }
            y
        })
        .collect())
}

/// Transform Cartesian samples into elements at the initial epoch using the
/// shared (offset-inclusive) potential, branch-aligning every longitude to
/// the ensemble-mean state so the ensemble shares one branch.
pub fn transform_samples_to_elements(
    samples: &[Vector6<f64>],
    t0: f64,
    config: &DynamicsConfig,
) -> Result<Vec<Vector6<f64>>> {
    let n = samples.len() as f64;
    let mean_vec = samples.iter().sum::<Vector6<f64>>() / n;
    let mean_state = CartesianState::from_vector(&mean_vec);
    let u_mean = config.potential(&mean_state.r, Epoch(t0))?;
    let reference = cart_to_mgeqoe(&mean_state, u_mean, config.mu_central, Epoch(t0))?
        .true_longitude;

    samples
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let state = CartesianState::from_vector(y);
            let u = config.potential(&state.r, Epoch(t0))?;
            let mut elements = cart_to_mgeqoe(&state, u, config.mu_central, Epoch(t0))
                .map_err(|e| sample_failure(i, t0, e))?;
            elements.align_longitude_to(reference);
            Ok(elements.to_vector())
        })
        .collect()
}

fn sample_failure(sample_id: usize, fallback_epoch: f64, source: Error) -> Error {
    Error::SampleFailure {
        sample_id,
        epoch: source.epoch().unwrap_or(fallback_epoch),
        source: Box::new(source),
    }
}

/// Propagate every sample independently under identical dynamics and gather
/// per-epoch matrices. Any failing sample aborts the whole ensemble with its
/// index and epoch; nothing is dropped silently.
pub fn propagate_ensemble(
    initial: &[Vector6<f64>],
    kind: CoordKind,
    t0: f64,
    grid: &[f64],
    config: &DynamicsConfig,
    settings: &OdeSettings,
) -> Result<Ensemble> {
    let per_sample: Vec<Vec<Vector6<f64>>> = initial
        .par_iter()
        .enumerate()
        .map(|(i, y0)| {
            let rhs = |t: f64, y: &Vector6<f64>| match kind {
                CoordKind::Cartesian => crate::propagation::cartesian_rhs(t, y, config),
                CoordKind::MGeqoe => crate::propagation::mgeqoe_rhs(t, y, config),
            };
            integrate(rhs, t0, *y0, grid, settings).map_err(|e| sample_failure(i, t0, e))
        })
        .collect::<Result<_>>()?;

    // transpose to per-epoch matrices
    let samples = (0..grid.len())
        .map(|e| per_sample.iter().map(|states| states[e]).collect())
        .collect();
    Ok(Ensemble {
        kind,
        epochs: grid.to_vec(),
        samples,
    })
}

/// Sample mean and covariance with the 1/N normalization.
pub fn sample_mean_cov(samples: &[Vector6<f64>]) -> (Vector6<f64>, Matrix6<f64>) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Vector6<f64>>() / n;
    let mut cov = Matrix6::zeros();
    for y in samples {
        let d = y - mean;
        cov += d * d.transpose();
    }
    (mean, cov / n)
}

/// Whitened deviations z_i with cov = L L^T and z_i = L^-1 (x_i - m): the
/// squared Mahalanobis distances are then |z_i|^2 and |z_i - z_j|^2, one
/// factorization and N triangular solves, never an explicit inverse.
fn whiten(samples: &[Vector6<f64>]) -> Result<Vec<Vector6<f64>>> {
    let (mean, cov) = sample_mean_cov(samples);
    let chol = nalgebra::Cholesky::new(cov).ok_or_else(|| {
        Error::DegenerateCovariance(
            "sample covariance is not positive definite (Cholesky failed)".into(),
        )
    })?;
    let l = chol.l();
    Ok(samples
        .iter()
        .map(|y| {
            l.solve_lower_triangular(&(y - mean))
                .expect("factor has positive diagonal")
        })
        .collect())
}

/// Squared Mahalanobis distances of each sample to the mean and of each
/// ordered sample pair.
pub fn mahalanobis(samples: &[Vector6<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let z = whiten(samples)?;
    let d_center: Vec<f64> = z.iter().map(|zi| zi.norm_squared()).collect();
    let d_pairs: Vec<Vec<f64>> = z
        .iter()
        .map(|zi| z.iter().map(|zj| (zi - zj).norm_squared()).collect())
        .collect();
    Ok((d_center, d_pairs))
}

/// Smoothing parameter beta(N, n) of the test.
pub fn hz_beta(n_samples: usize, n_dim: usize) -> f64 {
    let n = n_samples as f64;
    let d = n_dim as f64;
    std::f64::consts::FRAC_1_SQRT_2 * (n * (2.0 * d + 1.0) / 4.0).powf(1.0 / (d + 4.0))
}

/// The N-scaled Henze-Zirkler statistic from whitened samples stored as a
/// flat row-major array (`n_samples` rows of `n_dim`).
///
/// The three-term kernel sum is the published expression; the leading N
/// factor matches the reference implementations and the null moments below.
fn hz_from_whitened(z: &[f64], n_samples: usize, n_dim: usize, beta: f64) -> f64 {
    let n = n_samples as f64;
    let d = n_dim as f64;
    let gamma = 1.0 + beta * beta;
    let half_beta_sq = 0.5 * beta * beta;

    // parallel rows, each summed in fixed j order, then a fixed-order fold:
    // bit-identical for any worker count
    let row_sums: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let zi = &z[i * n_dim..(i + 1) * n_dim];
            let mut row = 0.0;
            for j in 0..i {
                let zj = &z[j * n_dim..(j + 1) * n_dim];
                let mut dist_sq = 0.0;
                for k in 0..n_dim {
                    let delta = zi[k] - zj[k];
                    dist_sq += delta * delta;
                }
                row += (-half_beta_sq * dist_sq).exp();
            }
            row
        })
        .collect();
    let off_diagonal: f64 = row_sums.iter().sum();
    // ordered pairs including i = j: N exact-zero distances on the diagonal
    let pair_sum = n + 2.0 * off_diagonal;

    let mut self_sum = 0.0;
    for i in 0..n_samples {
        let zi = &z[i * n_dim..(i + 1) * n_dim];
        let d_sq: f64 = zi.iter().map(|v| v * v).sum();
        self_sum += (-half_beta_sq * d_sq / gamma).exp();
    }

    pair_sum / n - 2.0 * gamma.powf(-d / 2.0) * self_sum
        + n * (1.0 + 2.0 * beta * beta).powf(-d / 2.0)
}

/// HZ statistic of a 6-D sample set. Returns (hz, beta).
pub fn hz_statistic(samples: &[Vector6<f64>]) -> Result<(f64, f64)> {
    let z = whiten(samples)?;
    let mut flat = Vec::with_capacity(z.len() * 6);
    for zi in &z {
        flat.extend(zi.iter());
    }
    let beta = hz_beta(samples.len(), 6);
    Ok((hz_from_whitened(&flat, samples.len(), 6, beta), beta))
}

/// Dimension-generic entry point over row-major data.
pub fn hz_statistic_dyn(data: &[f64], n_samples: usize, n_dim: usize) -> Result<(f64, f64)> {
    if n_samples < 2 || n_dim < 1 || data.len() != n_samples * n_dim {
        return Err(Error::InvalidArgument(format!(
            "hz input must be {n_samples} x {n_dim}, got {} values",
            data.len()
        )));
    }
    let mut mean = vec![0.0; n_dim];
    for row in data.chunks_exact(n_dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_samples as f64;
    }
    let mut cov = nalgebra::DMatrix::zeros(n_dim, n_dim);
    for row in data.chunks_exact(n_dim) {
        let d =
            nalgebra::DVector::from_iterator(n_dim, row.iter().zip(&mean).map(|(v, m)| v - m));
        cov += &d * d.transpose();
    }
    cov /= n_samples as f64;
    let chol = nalgebra::Cholesky::new(cov).ok_or_else(|| {
        Error::DegenerateCovariance(
            "sample covariance is not positive definite (Cholesky failed)".into(),
        )
    })?;
    let mut flat = Vec::with_capacity(n_samples * n_dim);
    for row in data.chunks_exact(n_dim) {
        let d =
            nalgebra::DVector::from_iterator(n_dim, row.iter().zip(&mean).map(|(v, m)| v - m));
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&d)
            .expect("factor has positive diagonal");
        flat.extend(z.iter());
    }
    let beta = hz_beta(n_samples, n_dim);
    Ok((hz_from_whitened(&flat, n_samples, n_dim, beta), beta))
}

/// Log-space parameters (mean, sd) of the null log-normal approximation,
/// from the standard first two moments of the statistic under Gaussianity.
pub fn hz_null_lognormal(n_dim: usize, beta: f64) -> Result<(f64, f64)> {
    let d = n_dim as f64;
    let b2 = beta * beta;
    let b4 = b2 * b2;
    let b8 = b4 * b4;
    let a = 1.0 + 2.0 * b2;
    let w = (1.0 + b2) * (1.0 + 3.0 * b2);

    let mean =
        1.0 - a.powf(-d / 2.0) * (1.0 + d * b2 / a + d * (d + 2.0) * b4 / (2.0 * a * a));
    let variance = 2.0 * (1.0 + 4.0 * b2).powf(-d / 2.0)
        + 2.0 * a.powf(-d)
            * (1.0 + 2.0 * d * b4 / (a * a) + 3.0 * d * (d + 2.0) * b8 / (4.0 * a.powi(4)))
        - 4.0 * w.powf(-d / 2.0)
            * (1.0 + 3.0 * d * b4 / (2.0 * w) + d * (d + 2.0) * b8 / (2.0 * w * w));

    if !(mean > 0.0) || !(variance > 0.0) {
        return Err(Error::InvalidMoments { mean, variance });
    }
    let log_sd_sq = (1.0 + variance / (mean * mean)).ln();
    let log_mean = mean.ln() - 0.5 * log_sd_sq;
    Ok((log_mean, log_sd_sq.sqrt()))
}

/// Upper-tail p-value of the statistic under the log-normal null.
pub fn hz_pvalue(hz: f64, log_mean: f64, log_sd: f64) -> Result<f64> {
    if !(hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hz statistic must be positive, got {hz}"
        )));
    }
    if !(log_sd > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "log_sd must be positive, got {log_sd}"
        )));
    }
    let standard = Normal::standard();
    let score = (hz.ln() - log_mean) / log_sd;
    Ok(standard.cdf(-score))
}

/// Outcome of one HZ evaluation.
#[derive(Debug, Clone, Copy)]
pub struct HzResult {
    pub hz: f64,
    pub p_value: f64,
    pub reject: bool,
    pub beta: f64,
    /// Covariance was singular: the result is forced to reject and carries
    /// no usable statistic.
    pub degenerate: bool,
}

/// Run the full test on one 6-D sample set.
pub fn hz_test(samples: &[Vector6<f64>], alpha: f64) -> Result<HzResult> {
    let (hz, beta) = hz_statistic(samples)?;
    let (log_mean, log_sd) = hz_null_lognormal(6, beta)?;
    let p_value = hz_pvalue(hz, log_mean, log_sd)?;
    Ok(HzResult {
        hz,
        p_value,
        reject: p_value <= alpha,
        beta,
        degenerate: false,
    })
}

/// Per-epoch test series over an ensemble.
#[derive(Debug, Clone)]
pub struct HzSeries {
    pub kind: CoordKind,
    pub alpha: f64,
    pub epochs: Vec<f64>,
    pub results: Vec<HzResult>,
}

/// Evaluate the HZ test at every ensemble epoch. A degenerate covariance at
/// one epoch becomes a forced rejection with a diagnostic flag rather than
/// an abort. `subsample` bounds the O(N^2) kernel to a deterministic subset.
pub fn hz_series(ensemble: &Ensemble, alpha: f64, subsample: Option<usize>) -> Result<HzSeries> {
    let mut results = Vec::with_capacity(ensemble.epochs.len());
    for samples in &ensemble.samples {
        let selected = select_subsample(samples, subsample);
        match hz_test(&selected, alpha) {
            Ok(result) => results.push(result),
            Err(Error::DegenerateCovariance(_)) => results.push(HzResult {
                hz: f64::NAN,
                p_value: 0.0,
                reject: true,
                beta: hz_beta(selected.len(), 6),
                degenerate: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(HzSeries {
        kind: ensemble.kind,
        alpha,
        epochs: ensemble.epochs.clone(),
        results,
    })
}

/// Deterministic stride subsample of at most `k` samples.
fn select_subsample(samples: &[Vector6<f64>], k: Option<usize>) -> Vec<Vector6<f64>> {
    match k {
        Some(k) if k >= 2 && k < samples.len() => {
            (0..k).map(|i| samples[i * samples.len() / k]).collect()
        }
        _ => samples.to_vec(),
    }
}

/// Centered samples projected onto the unit eigenvectors of the sample
/// covariance, ordered by descending eigenvalue. The sign of each
/// eigenvector is fixed by making its largest-magnitude component positive.
#[derive(Debug, Clone)]
pub struct EigenProjection {
    pub eigenvalues: [f64; 6],
    /// Columns are the (sign-fixed) eigenvectors.
    pub basis: Matrix6<f64>,
    pub projected: Vec<Vector6<f64>>,
}

pub fn eigenspace_projection(samples: &[Vector6<f64>]) -> Result<EigenProjection> {
    let (mean, cov) = sample_mean_cov(samples);
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateCovariance(
            "covariance holds non-finite entries".into(),
        ));
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| {
        eigen.eigenvalues[j]
            .partial_cmp(&eigen.eigenvalues[i])
            .unwrap()
    });

    let mut eigenvalues = [0.0; 6];
    let mut basis = Matrix6::zeros();
    for (slot, &src) in order.iter().enumerate() {
        eigenvalues[slot] = eigen.eigenvalues[src];
        let mut column = eigen.eigenvectors.column(src).clone_owned();
        let dominant = column
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        if column[dominant] < 0.0 {
            column = -column;
        }
        basis.set_column(slot, &column);
    }

    let projected = samples
        .iter()
        .map(|y| basis.transpose() * (y - mean))
        .collect();
    Ok(EigenProjection {
        eigenvalues,
        basis,
        projected,
    })
}
