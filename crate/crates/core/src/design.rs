//! Inverse design of a single reversal pulse.
//!
//! The polar angle is prescribed as a quintic in normalized time
//! `s = t/t_f`, pinned by six boundary conditions: it starts at the south
//! pole and ends at the north pole, leaves and arrives at the maximal
//! rate `-gamma h`, and has zero curvature at both ends. Given that
//! trajectory, the linear (`d = 0`) two-level equations
//!
//! ```text
//! theta' = h sin(phi)
//! phi'   = -omega + h cos(phi) cot(theta)
//! ```
//!
//! are inverted for the chirp `omega(t)` at constant amplitude `h`.
//!
//! Both terms of the inverted chirp are indeterminate at the poles. With
//! these boundary conditions `theta_dot + h` has double roots at both ends,
//! so `1 + theta_dot/h = lambda s^2 (1-s)^2 / c` with `c = h t_f` and
//! `lambda` the leading coefficient of `d theta/ds`. Dividing that factor
//! out analytically gives a form that is finite and free of cancellation
//! on the whole closed interval.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack on `|theta_dot| <= h` before a design point is rejected.
const RATE_SLACK: f64 = 1e-12;

/// Quintic polar-angle trajectory `theta(s) = sum a_j s^j`, `s = t/t_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTrajectory {
    pub coefficients: [f64; 6],
    pub tf: f64,
    pub h: f64,
}

/// Minimum pulse duration for a full reversal at amplitude `h`.
pub fn min_duration(h: f64) -> f64 {
    PI / h
}

/// Solves the six boundary conditions for the quintic ansatz.
///
/// Fails with [`Error::Infeasible`] when `h t_f < pi`; the grazing case
/// `h t_f = pi` is accepted and yields the linear constant-rate pulse.
pub fn solve_theta(h: f64, tf: f64) -> Result<ThetaTrajectory> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::validation("h", format!("must be finite and > 0, got {h}")));
    }
    if !(tf.is_finite() && tf > 0.0) {
        return Err(Error::validation("tf", format!("must be finite and > 0, got {tf}")));
    }
    let c = h * tf;
    if c < PI {
        return Err(Error::Infeasible {
            product: c,
            min_tf: min_duration(h),
        });
    }

    // rows: theta(0), theta(1), theta'(0), theta'(1), theta''(0), theta''(1)
    let mut a = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        [0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 6.0, 12.0, 20.0],
    ];
    let mut b = [PI, 0.0, -c, -c, 0.0, 0.0];
    let coefficients = solve_linear(&mut a, &mut b);
    Ok(ThetaTrajectory { coefficients, tf, h })
}

/// Gaussian elimination with partial pivoting. The boundary matrix is
/// constant and well conditioned, so no singularity check is needed.
fn solve_linear<const N: usize>(a: &mut [[f64; N]; N], b: &mut [f64; N]) -> [f64; N] {
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

impl ThetaTrajectory {
    /// `h t_f`, the reversal area of the pulse.
    pub fn area(&self) -> f64 {
        self.h * self.tf
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        if (0.0..=self.tf).contains(&t) {
            Ok(t / self.tf)
        } else {
            Err(Error::OutOfRange { t, tf: self.tf })
        }
    }

    /// `(theta, d theta/ds, d^2 theta/ds^2)` at normalized time `s`.
    fn eval_normalized(&self, s: f64) -> (f64, f64, f64) {
        let a = &self.coefficients;
        let d1 = [a[1], 2.0 * a[2], 3.0 * a[3], 4.0 * a[4], 5.0 * a[5]];
        let d2 = [2.0 * a[2], 6.0 * a[3], 12.0 * a[4], 20.0 * a[5]];
        (horner(a, s), horner(&d1, s), horner(&d2, s))
    }

    /// `(theta, theta_dot, theta_ddot)` at physical time `t` in `[0, t_f]`.
    pub fn theta_derivatives(&self, t: f64) -> Result<(f64, f64, f64)> {
        let s = self.check_time(t)?;
        let (th, d1, d2) = self.eval_normalized(s);
        Ok((th, d1 / self.tf, d2 / (self.tf * self.tf)))
    }

    /// Azimuth of the designed trajectory, `arcsin(theta_dot / h)` on the
    /// principal branch (`cos phi >= 0`).
    pub fn phi_of_t(&self, t: f64) -> Result<f64> {
        let (_, rate, _) = self.theta_derivatives(t)?;
        let r = rate / self.h;
        if r.abs() > 1.0 + RATE_SLACK {
            return Err(Error::Infeasible {
                product: self.area(),
                min_tf: min_duration(self.h),
            });
        }
        Ok(r.clamp(-1.0, 1.0).asin())
    }

    /// Leading coefficient of `d theta/ds + c`, i.e. `5 a_5`.
    fn lambda(&self) -> f64 {
        (5.0 * self.coefficients[5]).max(0.0)
    }

    /// `(cos theta, s(1-s)/sin theta)` evaluated without cancellation at the poles.
    fn polar_factors(&self, s: f64) -> (f64, f64) {
        let a = &self.coefficients;
        if s <= 0.5 {
            // pi - theta = s * q(s)
            let q = -horner(&a[1..], s);
            let x = s * q;
            (-x.cos(), (1.0 - s) / (q * sinc(x)))
        } else {
            // theta = (1 - s) * p(s), by synthetic division by (s - 1)
            let mut r = [0.0; 5];
            let mut acc = 0.0;
            for j in (1..6).rev() {
                acc += a[j];
                r[j - 1] = acc;
            }
            let p = -horner(&r, s);
            let x = (1.0 - s) * p;
            (x.cos(), s / (p * sinc(x)))
        }
    }

    /// Chirp at normalized time `s`, using the factored closed form.
    fn omega_normalized(&self, s: f64) -> f64 {
        let c = self.area();
        let lambda = self.lambda();
        if lambda == 0.0 {
            // grazing case: constant-rate pi pulse, no chirp needed
            return 0.0;
        }
        let (_, d1, _) = self.eval_normalized(s);
        let one_plus_r = lambda * (s * (1.0 - s)).powi(2) / c;
        let one_minus_r = (2.0 - one_plus_r).max(0.0);
        let curvature_term = -2.0 * (1.0 - 2.0 * s) * (lambda / (c * one_minus_r)).sqrt() / self.tf;
        let (cos_theta, ratio) = self.polar_factors(s);
        let geometric_term = (c / self.tf) * (lambda * one_minus_r / c).sqrt() * cos_theta * ratio;
        debug_assert!((d1 / c - (one_plus_r - 1.0)).abs() < 1e-9 * (1.0 + c));
        curvature_term + geometric_term
    }

    /// Chirp frequency `omega(t)` (units `1/t_0`), finite on the closed interval.
    pub fn chirp_frequency(&self, t: f64) -> Result<f64> {
        let s = self.check_time(t)?;
        Ok(self.omega_normalized(s))
    }

    /// Direct term-by-term evaluation of the inverted chirp. Indeterminate at
    /// the endpoints and ill-conditioned next to them; kept as a cross-check.
    pub fn chirp_frequency_direct(&self, t: f64) -> Result<f64> {
        let (th, rate, accel) = self.theta_derivatives(t)?;
        let r = rate / self.h;
        let q = (1.0 - r * r).sqrt();
        Ok(-accel / (self.h * q) + self.h * q / th.tan())
    }

    /// Maximum of `|theta_dot| / h` over a uniform grid of `n` points.
    pub fn max_rate_ratio(&self, n: usize) -> f64 {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                (self.eval_normalized(s).1 / self.area()).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// One designed reversal pulse: the trajectory plus its synthesized chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseDesign {
    pub trajectory: ThetaTrajectory,
    /// `omega(0)`, the analytic endpoint limit
    pub omega_start: f64,
    /// `omega(t_f)`
    pub omega_end: f64,
}

impl PulseDesign {
    pub fn new(h: f64, tf: f64) -> Result<Self> {
        let trajectory = solve_theta(h, tf)?;
        Ok(Self {
            trajectory,
            omega_start: trajectory.omega_normalized(0.0),
            omega_end: trajectory.omega_normalized(1.0),
        })
    }

    pub fn h(&self) -> f64 {
        self.trajectory.h
    }

    pub fn tf(&self) -> f64 {
        self.trajectory.tf
    }

    /// Chirp at local time `t`, clamped into `[0, t_f]`. Used on the
    /// integrator's hot path where stage times may overshoot by rounding.
    pub fn omega(&self, t: f64) -> f64 {
        let s = (t / self.trajectory.tf).clamp(0.0, 1.0);
        self.trajectory.omega_normalized(s)
    }

    /// Design polar angle at local time `t`, clamped into `[0, t_f]`.
    pub fn theta(&self, t: f64) -> f64 {
        let s = (t / self.trajectory.tf).clamp(0.0, 1.0);
        self.trajectory.eval_normalized(s).0
    }

    /// Uniformly spaced `(t, omega)` rows including both endpoints.
    pub fn sample_chirp(&self, n_samples: usize) -> Result<Vec<(f64, f64)>> {
        if n_samples < 2 {
            return Err(Error::validation(
                "samples",
                format!("need at least 2 samples, got {n_samples}"),
            ));
        }
        let last = (n_samples - 1) as f64;
        Ok((0..n_samples)
            .map(|i| {
                let s = i as f64 / last;
                (s * self.tf(), self.trajectory.omega_normalized(s))
            })
            .collect())
    }
}
