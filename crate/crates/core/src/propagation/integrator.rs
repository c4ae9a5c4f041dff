//! Adaptive embedded Runge-Kutta integration with exact landing on a
//! requested output grid.
//!
//! Two pairs are provided: Dormand-Prince 5(4) and Fehlberg 7(8). The
//! stepper is deterministic for fixed inputs: no heuristics depend on wall
//! clock, allocation addresses, or thread count, so repeated runs produce
//! bit-identical trajectories.

use nalgebra::Vector6;

use crate::error::{Error, Result};

/// Embedded pair in Butcher form. `a[i]` holds the i+1 coefficients feeding
/// stage i+1, `b` the propagating weights, `e` the error weights
/// (propagating minus embedded).
#[derive(Debug, Clone, Copy)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub c: &'static [f64],
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    pub e: &'static [f64],
    /// Exponent for step-size control, 1/(q+1) with q the order of the
    /// error-estimating difference.
    pub error_exponent: f64,
}

/// Dormand-Prince 5(4): 7 stages, propagates the 5th-order solution.
pub const DORMAND_PRINCE_54: ButcherTableau = ButcherTableau {
    name: "dopri5",
    c: &[0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[0.2],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
        ],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    e: &[
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ],
    error_exponent: 1.0 / 5.0,
};

/// Fehlberg 7(8): 13 stages, advanced with the 8th-order solution (local
/// extrapolation) while the 7th/8th difference drives step control. The
/// workhorse for tight-tolerance orbit work. Caveat inherited from the pair:
/// the error estimate vanishes identically for right-hand sides that depend
/// on time alone, so pure quadrature problems belong to the Dormand-Prince
/// pair instead.
pub const FEHLBERG_78: ButcherTableau = ButcherTableau {
    name: "rkf78",
    c: &[
        0.0,
        2.0 / 27.0,
        1.0 / 9.0,
        1.0 / 6.0,
        5.0 / 12.0,
        0.5,
        5.0 / 6.0,
        1.0 / 6.0,
        2.0 / 3.0,
        1.0 / 3.0,
        1.0,
        0.0,
        1.0,
    ],
    a: &[
        &[2.0 / 27.0],
        &[1.0 / 36.0, 1.0 / 12.0],
        &[1.0 / 24.0, 0.0, 1.0 / 8.0],
        &[5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0],
        &[1.0 / 20.0, 0.0, 0.0, 0.25, 0.2],
        &[
            -25.0 / 108.0,
            0.0,
            0.0,
            125.0 / 108.0,
            -65.0 / 27.0,
            125.0 / 54.0,
        ],
        &[
            31.0 / 300.0,
            0.0,
            0.0,
            0.0,
            61.0 / 225.0,
            -2.0 / 9.0,
            13.0 / 900.0,
        ],
        &[
            2.0,
            0.0,
            0.0,
            -53.0 / 6.0,
            704.0 / 45.0,
            -107.0 / 9.0,
            67.0 / 90.0,
            3.0,
        ],
        &[
            -91.0 / 108.0,
            0.0,
            0.0,
            23.0 / 108.0,
            -976.0 / 135.0,
            311.0 / 54.0,
            -19.0 / 60.0,
            17.0 / 6.0,
            -1.0 / 12.0,
        ],
        &[
            2383.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -301.0 / 82.0,
            2133.0 / 4100.0,
            45.0 / 82.0,
            45.0 / 164.0,
            18.0 / 41.0,
        ],
        &[
            3.0 / 205.0,
            0.0,
            0.0,
            0.0,
            0.0,
            -6.0 / 41.0,
            -3.0 / 205.0,
            -3.0 / 41.0,
            3.0 / 41.0,
            6.0 / 41.0,
            0.0,
        ],
        &[
            -1777.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -289.0 / 82.0,
            2193.0 / 4100.0,
            51.0 / 82.0,
            33.0 / 164.0,
            12.0 / 41.0,
            0.0,
            1.0,
        ],
    ],
    b: &[
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        34.0 / 105.0,
        9.0 / 35.0,
        9.0 / 35.0,
        9.0 / 280.0,
        9.0 / 280.0,
        0.0,
        41.0 / 840.0,
        41.0 / 840.0,
    ],
    // b(7th) - b(8th): the error collapses onto four stages
    e: &[
        41.0 / 840.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        41.0 / 840.0,
        -41.0 / 840.0,
        -41.0 / 840.0,
    ],
    error_exponent: 1.0 / 8.0,
};

/// Step-size controls and tolerances for one integration.
#[derive(Debug, Clone, Copy)]
pub struct OdeSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; 0 picks a fraction of the first grid interval.
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DormandPrince54,
    Fehlberg78,
}

impl Method {
    pub fn tableau(&self) -> &'static ButcherTableau {
        match self {
            Method::DormandPrince54 => &DORMAND_PRINCE_54,
            Method::Fehlberg78 => &FEHLBERG_78,
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dopri5" | "rk54" => Ok(Method::DormandPrince54),
            "rkf78" | "rk78" => Ok(Method::Fehlberg78),
            other => Err(Error::Config(format!("unknown integrator '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.tableau().name
    }
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings {
            rel_tol: 1e-12,
            abs_tol: 1e-13,
            h_init: 0.0,
            h_min: 1e-13,
            h_max: f64::INFINITY,
            method: Method::Fehlberg78,
        }
    }
}

impl OdeSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must be positive, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.h_min > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "h_min must be positive, got {}",
                self.h_min
            )));
        }
        if self.h_init != 0.0 && (self.h_init < self.h_min || self.h_init > self.h_max) {
            return Err(Error::InvalidArgument(format!(
                "h_init {} outside [h_min {}, h_max {}]",
                self.h_init, self.h_min, self.h_max
            )));
        }
        if self.h_max < self.h_min {
            return Err(Error::InvalidArgument(format!(
                "h_max {} below h_min {}",
                self.h_max, self.h_min
            )));
        }
        Ok(())
    }
}

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Integrate forward from (t0, y0), returning the solution exactly on each
/// epoch of `grid` (integrate-to-grid; no dense-output interpolation). The
/// grid must be strictly increasing with `grid[0] >= t0`; a grid point equal
/// to t0 reports the initial state.
pub fn integrate<F>(
    mut rhs: F,
    t0: f64,
    y0: Vector6<f64>,
    grid: &[f64],
    settings: &OdeSettings,
) -> Result<Vec<Vector6<f64>>>
where
    F: FnMut(f64, &Vector6<f64>) -> Result<Vector6<f64>>,
{
    settings.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty output grid".into()));
    }
    if grid[0] < t0 {
        return Err(Error::InvalidArgument(format!(
            "output grid starts at {} before the initial epoch {t0}",
            grid[0]
        )));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "output grid must be strictly increasing".into(),
        ));
    }

    let tableau = settings.method.tableau();
    let stages = tableau.b.len();
    let mut k = vec![Vector6::zeros(); stages];

    let mut t = t0;
    let mut y = y0;
    let span = grid.last().unwrap() - t0;
    let mut h = if settings.h_init > 0.0 {
        settings.h_init
    } else {
        (span / 100.0).clamp(settings.h_min, settings.h_max.min(span.max(settings.h_min)))
    };

    let mut output = Vec::with_capacity(grid.len());
    for &target in grid {
        if target == t {
            output.push(y);
            continue;
        }
        while t < target {
            let clamped = h.min(settings.h_max) >= target - t;
            let h_try = if clamped { target - t } else { h.min(settings.h_max) };

            // dynamics failures get the stage epoch attached when they do
            // not carry one themselves
            let mut eval = |t_stage: f64, y_stage: &Vector6<f64>| {
                rhs(t_stage, y_stage).map_err(|e| match e.epoch() {
                    Some(_) => e,
                    None => Error::AtEpoch {
                        epoch: t_stage,
                        source: Box::new(e),
                    },
                })
            };

            // stage evaluations
            k[0] = eval(t, &y)?;
            for i in 1..stages {
                let mut yi = y;
                for (j, &aij) in tableau.a[i - 1].iter().enumerate() {
                    if aij != 0.0 {
                        yi += h_try * aij * k[j];
                    }
                }
                k[i] = eval(t + tableau.c[i] * h_try, &yi)?;
            }

            let mut y_new = y;
            for (i, &bi) in tableau.b.iter().enumerate() {
                if bi != 0.0 {
                    y_new += h_try * bi * k[i];
                }
            }

            // scaled RMS error norm
            let mut err_sq = 0.0;
            for idx in 0..6 {
                let mut err_i = 0.0;
                for (i, &ei) in tableau.e.iter().enumerate() {
                    if ei != 0.0 {
                        err_i += ei * k[i][idx];
                    }
                }
                err_i *= h_try;
                let scale =
                    settings.abs_tol + settings.rel_tol * y[idx].abs().max(y_new[idx].abs());
                err_sq += (err_i / scale) * (err_i / scale);
            }
            let err = (err_sq / 6.0).sqrt();

            if !err.is_finite() {
                // a non-finite state is unrecoverable at any step size
                return Err(Error::StepUnderflow {
                    epoch: t,
                    h: h_try,
                    h_min: settings.h_min,
                });
            }

            if err <= 1.0 {
                t = if clamped { target } else { t + h_try };
                y = y_new;
                let scale = if err == 0.0 {
                    MAX_SCALE
                } else {
                    (SAFETY * err.powf(-tableau.error_exponent)).clamp(MIN_SCALE, MAX_SCALE)
                };
                h = (h_try * scale).min(settings.h_max);
            } else {
                let scale = (SAFETY * err.powf(-tableau.error_exponent)).clamp(MIN_SCALE, 1.0);
                h = h_try * scale;
                if h < settings.h_min {
                    return Err(Error::StepUnderflow {
                        epoch: t,
                        h,
                        h_min: settings.h_min,
                    });
                }
            }
        }
        output.push(y);
    }
    Ok(output)
}
