//! Independent oracles for the acceptance and property suites: a classical
//! two-body propagator, a Keplerian-chain equinoctial converter, and a
//! literal-transliteration Henze-Zirkler reference. None of them share code
//! with the implementation paths they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};

/// Solve E - e sin E = M for the eccentric anomaly with a bisection-guarded
/// Newton iteration (|E - M| <= e brackets the root).
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> f64 {
    let mut lo = mean_anomaly - e;
    let mut hi = mean_anomaly + e;
    let mut x = mean_anomaly + e * mean_anomaly.sin();
    for _ in 0..200 {
        let f = x - e * x.sin() - mean_anomaly;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let fp = 1.0 - e * x.cos();
        let newton = x - f / fp;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Closed-form elliptic two-body propagation via f and g functions with the
/// eccentric-anomaly difference.
pub fn kepler_propagate(
    r0: Vector3<f64>,
    v0: Vector3<f64>,
    mu: f64,
    dt: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let r0n = r0.norm();
    let energy = v0.norm_squared() / 2.0 - mu / r0n;
    assert!(energy < 0.0, "oracle only handles elliptic motion");
    let a = -mu / (2.0 * energy);
    let n = (mu / (a * a * a)).sqrt();

    let e_sin_e0 = r0.dot(&v0) / (mu * a).sqrt();
    let e_cos_e0 = 1.0 - r0n / a;
    let e = (e_sin_e0 * e_sin_e0 + e_cos_e0 * e_cos_e0).sqrt();
    let e0 = f64::atan2(e_sin_e0, e_cos_e0);
    let m0 = e0 - e_sin_e0;
    let big_e = solve_kepler(m0 + n * dt, e);

    let de = big_e - e0;
    let f = 1.0 - a / r0n * (1.0 - de.cos());
    let g = dt + (de.sin() - de) / n;
    let r_new = f * r0 + g * v0;
    let rn = r_new.norm();
    let f_dot = -(mu * a).sqrt() * de.sin() / (r0n * rn);
    let g_dot = 1.0 - a / rn * (1.0 - de.cos());
    (r_new, f_dot * r0 + g_dot * v0)
}

/// Classical orbital elements (a, e, i, raan, argp, true anomaly) from a
/// Cartesian state; generic (non-equatorial, non-circular) geometry assumed.
pub fn classical_elements(
    r: Vector3<f64>,
    v: Vector3<f64>,
    mu: f64,
) -> (f64, f64, f64, f64, f64, f64) {
    let rn = r.norm();
    let h_vec = r.cross(&v);
    let h = h_vec.norm();
    let node = Vector3::new(-h_vec.y, h_vec.x, 0.0);
    let e_vec = ((v.norm_squared() - mu / rn) * r - r.dot(&v) * v) / mu;
    let e = e_vec.norm();
    let energy = v.norm_squared() / 2.0 - mu / rn;
    let a = -mu / (2.0 * energy);
    let inc = (h_vec.z / h).acos();
    let raan = f64::atan2(node.y, node.x);

    // atan2 extraction stays well conditioned where acos loses digits
    let h_hat = h_vec / h;
    let argp = f64::atan2(node.cross(&e_vec).dot(&h_hat), node.dot(&e_vec));
    let nu = f64::atan2(e_vec.cross(&r).dot(&h_hat), e_vec.dot(&r));
    (a, e, inc, raan, argp, nu)
}

fn wrap_pi(angle: f64) -> f64 {
    let mut x = angle.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

/// Classical equinoctial elements (p, p1, p2, q1, q2, L in (-pi, pi])
/// through the Keplerian chain.
pub fn classical_equinoctial(r: Vector3<f64>, v: Vector3<f64>, mu: f64) -> [f64; 6] {
    let (a, e, inc, raan, argp, nu) = classical_elements(r, v, mu);
    let p = a * (1.0 - e * e);
    let lon_periapsis = argp + raan;
    [
        p,
        e * lon_periapsis.sin(),
        e * lon_periapsis.cos(),
        (inc / 2.0).tan() * raan.sin(),
        (inc / 2.0).tan() * raan.cos(),
        wrap_pi(raan + argp + nu),
    ]
}

/// Literal transliteration of the published reference procedure for the
/// Henze-Zirkler statistic: biased covariance, explicit matrix inverse,
/// direct double sum over the pair distances.
pub fn reference_hz(data: &DMatrix<f64>) -> f64 {
    let n = data.nrows();
    let p = data.ncols();
    let nf = n as f64;
    let pf = p as f64;

    let mut mean = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            mean[j] += data[(i, j)];
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut s = DMatrix::zeros(p, p);
    for i in 0..n {
        for a in 0..p {
            for b in 0..p {
                s[(a, b)] += (data[(i, a)] - mean[a]) * (data[(i, b)] - mean[b]);
            }
        }
    }
    s /= nf;
    let s_inv = s.try_inverse().expect("reference oracle needs full rank");

    let quad = |x: &[f64], y: &[f64]| -> f64 {
        let mut total = 0.0;
        for a in 0..p {
            for b in 0..p {
                total += (x[a] - y[a]) * s_inv[(a, b)] * (x[b] - y[b]);
            }
        }
        total
    };
    let row = |i: usize| -> Vec<f64> { (0..p).map(|j| data[(i, j)]).collect() };

    let b = std::f64::consts::FRAC_1_SQRT_2
        * ((2.0 * pf + 1.0) / 4.0).powf(1.0 / (pf + 4.0))
        * nf.powf(1.0 / (pf + 4.0));
    let b2 = b * b;

    let mut pair_sum = 0.0;
    for i in 0..n {
        let xi = row(i);
        for j in 0..n {
            let xj = row(j);
            pair_sum += (-b2 / 2.0 * quad(&xi, &xj)).exp();
        }
    }
    let mut self_sum = 0.0;
    for i in 0..n {
        let xi = row(i);
        self_sum += (-b2 / (2.0 * (1.0 + b2)) * quad(&xi, &mean)).exp();
    }

    nf * (pair_sum / (nf * nf)
        - 2.0 * (1.0 + b2).powf(-pf / 2.0) * self_sum / nf
        + (1.0 + 2.0 * b2).powf(-pf / 2.0))
}
