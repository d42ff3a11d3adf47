//! Shared test oracles, written independently of the library internals.
#![allow(dead_code)]

use twofloat::TwoFloat;

pub type Dd = TwoFloat;

pub fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

fn dd_pi() -> Dd {
    twofloat::consts::PI
}

/// Quotient refined by residual correction; the crate's own `TwoFloat`
/// division carries only double-precision accuracy.
pub fn dd_div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    dd(q1) + q2 + q3
}

/// Newton-refined square root seeded from the f64 result.
pub fn dd_sqrt(x: Dd) -> Dd {
    let y = dd(x.hi().sqrt());
    if x.hi() == 0.0 {
        return y;
    }
    let y = y + dd_div(x - y * y, y * 2.0);
    y + dd_div(x - y * y, y * 2.0)
}

/// `cot(e)` for small `|e|` by its Laurent series.
fn dd_cot_small(e: Dd) -> Dd {
    let e2 = e * e;
    dd_div(dd(1.0), e) - e / 3.0 - e * e2 / 45.0 - e * e2 * e2 * 2.0 / 945.0
}

/// Solves the boundary-value system for the quintic in double-double,
/// Gaussian elimination with partial pivoting.
pub fn dd_quintic(h: f64, tf: f64) -> [Dd; 6] {
    let c = dd(h) * tf;
    let pi = dd_pi();
    let mut m: Vec<Vec<Dd>> = vec![
        vec![dd(1.0), dd(0.0), dd(0.0), dd(0.0), dd(0.0), dd(0.0), pi],
        vec![dd(1.0), dd(1.0), dd(1.0), dd(1.0), dd(1.0), dd(1.0), dd(0.0)],
        vec![dd(0.0), dd(1.0), dd(0.0), dd(0.0), dd(0.0), dd(0.0), -c],
        vec![dd(0.0), dd(1.0), dd(2.0), dd(3.0), dd(4.0), dd(5.0), -c],
        vec![dd(0.0), dd(0.0), dd(2.0), dd(0.0), dd(0.0), dd(0.0), dd(0.0)],
        vec![dd(0.0), dd(0.0), dd(2.0), dd(6.0), dd(12.0), dd(20.0), dd(0.0)],
    ];
    for col in 0..6 {
        let piv = (col..6)
            .max_by(|&a, &b| m[a][col].hi().abs().total_cmp(&m[b][col].hi().abs()))
            .unwrap();
        m.swap(col, piv);
        for row in 0..6 {
            if row != col {
                let f = dd_div(m[row][col], m[col][col]);
                let pivot_row = m[col].clone();
                for (x, &p) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= p * f;
                }
            }
        }
    }
    std::array::from_fn(|j| dd_div(m[j][6], m[j][j]))
}

fn poly(a: &[Dd], s: Dd) -> Dd {
    a.iter().rev().fold(dd(0.0), |acc, &x| acc * s + x)
}

/// Direct inverted chirp `-theta_ddot/(h q) + h q cot(theta)`, with
/// `q = sqrt(1 - (theta_dot/h)^2)`, at normalized distance `sigma` from
/// the start or, with `from_end`, from `t_f`.
fn dd_chirp_near_end(a: &[Dd; 6], h: f64, tf: f64, sigma: Dd, from_end: bool) -> Dd {
    let s = if from_end { dd(1.0) - sigma } else { sigma };
    let d1: Vec<Dd> = (1..6).map(|j| a[j] * j as f64).collect();
    let d2: Vec<Dd> = (2..6).map(|j| a[j] * (j * (j - 1)) as f64).collect();
    let theta = poly(a, s);
    let rate = poly(&d1, s) / tf;
    let accel = poly(&d2, s) / (tf * tf);
    let r = rate / h;
    let q = dd_sqrt((dd(1.0) - r) * (dd(1.0) + r));
    let cot = if from_end {
        dd_cot_small(theta)
    } else {
        -dd_cot_small(dd_pi() - theta)
    };
    -dd_div(accel, q * h) + q * h * cot
}

/// Numerical endpoint limit of the chirp: the direct formula evaluated in
/// double-double at `t = 1e-4, 1e-5, 1e-6` from the chosen end and
/// extrapolated quadratically to zero.
pub fn endpoint_limit(h: f64, tf: f64, at_end: bool) -> f64 {
    let a = dd_quintic(h, tf);
    let taus = [1e-4, 1e-5, 1e-6];
    let vals: Vec<Dd> = taus
        .iter()
        .map(|&tau| dd_chirp_near_end(&a, h, tf, dd(tau) / tf, at_end))
        .collect();
    // Lagrange interpolation evaluated at tau = 0
    let mut limit = dd(0.0);
    for i in 0..3 {
        let mut w = dd(1.0);
        for j in 0..3 {
            if i != j {
                w *= dd_div(dd(taus[j]), dd(taus[j]) - taus[i]);
            }
        }
        limit += vals[i] * w;
    }
    limit.hi()
}

/// Composite phase by direct floating evaluation of
/// `(N + 1 - 2 floor((k+1)/2)) floor(k/2) pi / N`, reduced to `[0, 2 pi)`.
pub fn phase_formula(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let raw = (nf + 1.0 - 2.0 * ((kf + 1.0) / 2.0).floor()) * (kf / 2.0).floor() * std::f64::consts::PI / nf;
    raw.rem_euclid(2.0 * std::f64::consts::PI)
}

/// Smallest absolute angular distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}
