//! Rotating-frame Landau-Lifshitz-Gilbert dynamics of a single macrospin.
//!
//! In dimensionless units the equation of motion is
//!
//! ```text
//! ds/dt = s x H - alpha s x (s x H)
//! H     = 2 d s_z e_z + h (cos b e_x + sin b e_y) + omega(t) e_z
//! ```
//!
//! where `b` is the in-plane azimuth of the drive for the current pulse.
//! The Cartesian form has no coordinate singularity and is the production
//! integrator. The spherical form is kept as an independent oracle; its
//! damping keeps only the anisotropy field, so it matches the Cartesian
//! system exactly only when `alpha = 0`.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::design::{PulseDesign, ThetaTrajectory};
use crate::error::{Error, Result};
use crate::model::{SphericalState, SpinState};
use crate::output::fmt_f64;

/// Polar margin inside which the spherical equations refuse to evaluate.
pub const POLE_EPSILON: f64 = 1e-8;

/// Default cancellation coefficient: `-2 d cos(theta)` removes the
/// anisotropy term from the azimuthal equation.
pub const DEFAULT_FEEDFORWARD_COEFFICIENT: f64 = -2.0;

/// A transverse drive of constant amplitude and time-dependent frequency,
/// seen in the frame rotating with it.
pub trait Drive: Sync {
    fn amplitude(&self) -> f64;
    fn duration(&self) -> f64;
    /// Instantaneous frequency at local time `t`.
    fn omega(&self, t: f64) -> f64;
}

impl Drive for PulseDesign {
    fn amplitude(&self) -> f64 {
        self.h()
    }

    fn duration(&self) -> f64 {
        self.tf()
    }

    fn omega(&self, t: f64) -> f64 {
        PulseDesign::omega(self, t)
    }
}

/// Fixed amplitude and frequency. `amplitude` may be zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrive {
    pub amplitude: f64,
    pub omega: f64,
    pub duration: f64,
}

impl Drive for ConstantDrive {
    fn amplitude(&self) -> f64 {
        self.amplitude
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn omega(&self, _t: f64) -> f64 {
        self.omega
    }
}

/// Designed chirp plus `coefficient * d * cos(theta_ref(t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedForward<'a> {
    pub design: &'a PulseDesign,
    pub coefficient: f64,
    pub d: f64,
}

impl Drive for FeedForward<'_> {
    fn amplitude(&self) -> f64 {
        self.design.h()
    }

    fn duration(&self) -> f64 {
        self.design.tf()
    }

    fn omega(&self, t: f64) -> f64 {
        self.design.omega(t) + self.coefficient * self.d * self.design.theta(t).cos()
    }
}

/// Wraps a design so its chirp also cancels the anisotropy term along the
/// reference trajectory. With the default coefficient of `-2` the
/// azimuthal equation sees `-omega_designed` only.
pub fn feedforward_chirp(design: &PulseDesign, d: f64, coefficient: f64) -> FeedForward<'_> {
    FeedForward {
        design,
        coefficient,
        d,
    }
}

/// Correction added to the designed chirp at local time `t`.
pub fn feedforward_correction(trajectory: &ThetaTrajectory, d: f64, coefficient: f64, t: f64) -> Result<f64> {
    let (theta, _, _) = trajectory.theta_derivatives(t)?;
    Ok(coefficient * d * theta.cos())
}

/// How a composite phase turns into an in-plane drive direction.
///
/// `Lagging` places the drive at azimuth `-phi_k`, which is what
/// `h -> h e^{i phi_k}` gives when the drive term is written as
/// `Re(h M_+ e^{-i Phi})`; `Leading` places it at `+phi_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseSense {
    #[default]
    Lagging,
    Leading,
}

impl PhaseSense {
    pub fn azimuth(self, phase: f64) -> f64 {
        match self {
            PhaseSense::Lagging => -phase,
            PhaseSense::Leading => phase,
        }
    }
}

impl std::str::FromStr for PhaseSense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagging" => Ok(PhaseSense::Lagging),
            "leading" => Ok(PhaseSense::Leading),
            other => Err(Error::validation(
                "phase-sense",
                format!("expected `lagging` or `leading`, got `{other}`"),
            )),
        }
    }
}

/// Anisotropy and damping of the particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub d: f64,
    pub alpha: f64,
}

/// Effective field in units of `h_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FieldSample {
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn axpy(a: f64, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

#[inline]
fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn field_at<D: Drive + ?Sized>(s: [f64; 3], t: f64, drive: &D, transverse: (f64, f64), d: f64) -> [f64; 3] {
    [transverse.0, transverse.1, 2.0 * d * s[2] + drive.omega(t)]
}

/// `H = 2 d s_z e_z + h (cos b, sin b, 0) + omega(t) e_z` for drive azimuth `b`.
pub fn effective_field<D: Drive + ?Sized>(s: SpinState, t_local: f64, drive: &D, azimuth: f64, d: f64) -> FieldSample {
    let h = drive.amplitude();
    let (sb, cb) = azimuth.sin_cos();
    let f = field_at(s.to_array(), t_local, drive, (h * cb, h * sb), d);
    FieldSample {
        x: f[0],
        y: f[1],
        z: f[2],
    }
}

#[inline]
fn llg(s: [f64; 3], h: [f64; 3], alpha: f64) -> [f64; 3] {
    let torque = cross(s, h);
    if alpha == 0.0 {
        return torque;
    }
    axpy(-alpha, cross(s, torque), torque)
}

/// `s x H - alpha s x (s x H)`.
pub fn llg_rhs(s: SpinState, field: FieldSample, alpha: f64) -> [f64; 3] {
    llg(s.to_array(), field.to_array(), alpha)
}

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub steps_per_pulse: usize,
    pub renormalize_every: usize,
    pub max_samples_per_pulse: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_pulse: 20_000,
            renormalize_every: 1,
            max_samples_per_pulse: 2_000,
        }
    }
}

impl IntegratorConfig {
    pub const MIN_STEPS: usize = 1_000;

    pub fn with_steps(steps_per_pulse: usize) -> Self {
        Self {
            steps_per_pulse,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_pulse < Self::MIN_STEPS {
            return Err(Error::validation(
                "steps",
                format!("need at least {} steps per pulse, got {}", Self::MIN_STEPS, self.steps_per_pulse),
            ));
        }
        if self.renormalize_every == 0 {
            return Err(Error::validation("renormalize_every", "must be ≥ 1"));
        }
        if self.max_samples_per_pulse < 2 {
            return Err(Error::validation("max_samples_per_pulse", "must be ≥ 2"));
        }
        Ok(())
    }

    /// Step stride between retained samples.
    fn stride(&self) -> usize {
        self.steps_per_pulse.div_ceil(self.max_samples_per_pulse - 1).max(1)
    }

    fn keeps(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride()) || step == self.steps_per_pulse
    }
}

/// Sampled states across a protocol, with global times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinState>,
    /// 1-based pulse index of each sample
    pub pulse_index: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, s: SpinState, pulse: usize) {
        self.times.push(t);
        self.states.push(s);
        self.pulse_index.push(pulse);
    }

    /// CSV with header `t_over_t0,sx,sy,sz,pulse_index`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_over_t0,sx,sy,sz,pulse_index\n");
        for ((t, s), k) in self.times.iter().zip(&self.states).zip(&self.pulse_index) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(s.x),
                fmt_f64(s.y),
                fmt_f64(s.z),
                k
            );
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Outcome of integrating one pulse or a whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseRun {
    pub final_state: SpinState,
    pub trajectory: Option<Trajectory>,
    /// Largest `|1 - |s||` seen before any renormalization.
    pub max_norm_drift: f64,
}

struct PulseSlot {
    index: usize,
    t_offset: f64,
    azimuth: f64,
}

fn run_slot<D: Drive + ?Sized>(
    s0: [f64; 3],
    drive: &D,
    slot: &PulseSlot,
    medium: Medium,
    cfg: &IntegratorConfig,
    trajectory: Option<&mut Trajectory>,
) -> Result<([f64; 3], f64)> {
    let steps = cfg.steps_per_pulse;
    let tf = drive.duration();
    let dt = tf / steps as f64;
    let h = drive.amplitude();
    let (sb, cb) = slot.azimuth.sin_cos();
    let transverse = (h * cb, h * sb);
    let d = medium.d;
    let alpha = medium.alpha;
    let rhs = |s: [f64; 3], t: f64| llg(s, field_at(s, t, drive, transverse, d), alpha);

    let mut traj = trajectory;
    let mut s = s0;
    let mut drift: f64 = 0.0;
    if slot.index == 1 {
        if let Some(tr) = traj.as_deref_mut() {
            tr.push(slot.t_offset, SpinState::from_array(s), slot.index);
        }
    }
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = rhs(s, t);
        let k2 = rhs(axpy(0.5 * dt, k1, s), t + 0.5 * dt);
        let k3 = rhs(axpy(0.5 * dt, k2, s), t + 0.5 * dt);
        let k4 = rhs(axpy(dt, k3, s), t + dt);
        for j in 0..3 {
            s[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let n = norm(s);
        if !n.is_finite() {
            return Err(Error::NonFinite {
                pulse: slot.index,
                step: i + 1,
                t: slot.t_offset + t + dt,
            });
        }
        drift = drift.max((1.0 - n).abs());
        let step = i + 1;
        if step % cfg.renormalize_every == 0 || step == steps {
            s = [s[0] / n, s[1] / n, s[2] / n];
        }
        if let Some(tr) = traj.as_deref_mut() {
            if cfg.keeps(step) {
                let local = if step == steps { tf } else { step as f64 * dt };
                tr.push(slot.t_offset + local, SpinState::from_array(s), slot.index);
            }
        }
    }
    Ok((s, drift))
}

fn check_inputs<D: Drive + ?Sized>(s0: SpinState, drive: &D, medium: Medium, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if !s0.is_finite() || (s0.norm() - 1.0).abs() > crate::model::UNIT_NORM_TOLERANCE {
        return Err(Error::validation("s0", format!("expected unit vector, |s| = {}", s0.norm())));
    }
    if !(drive.duration().is_finite() && drive.duration() > 0.0) {
        return Err(Error::validation("tf", "drive duration must be > 0"));
    }
    if !(medium.d.is_finite() && medium.alpha.is_finite() && medium.alpha >= 0.0) {
        return Err(Error::validation("alpha", "damping must be finite and ≥ 0"));
    }
    Ok(())
}

/// Classical RK4 over one pulse of duration `drive.duration()`.
pub fn integrate_pulse<D: Drive + ?Sized>(
    s0: SpinState,
    drive: &D,
    azimuth: f64,
    medium: Medium,
    cfg: &IntegratorConfig,
    record: bool,
) -> Result<PulseRun> {
    integrate_sequence(s0, drive, &[-azimuth], PhaseSense::Lagging, medium, cfg, record)
}

/// Chains one pulse per phase, each restarting the chirp at its own local
/// time origin and handing its final state to the next.
pub fn integrate_sequence<D: Drive + ?Sized>(
    s0: SpinState,
    drive: &D,
    phases: &[f64],
    sense: PhaseSense,
    medium: Medium,
    cfg: &IntegratorConfig,
    record: bool,
) -> Result<PulseRun> {
    check_inputs(s0, drive, medium, cfg)?;
    let mut trajectory = record.then(Trajectory::default);
    let mut s = s0.to_array();
    let mut drift: f64 = 0.0;
    for (k, &phase) in phases.iter().enumerate() {
        let slot = PulseSlot {
            index: k + 1,
            t_offset: k as f64 * drive.duration(),
            azimuth: sense.azimuth(phase),
        };
        let (next, pulse_drift) = run_slot(s, drive, &slot, medium, cfg, trajectory.as_mut())?;
        s = next;
        drift = drift.max(pulse_drift);
    }
    Ok(PulseRun {
        final_state: SpinState::from_array(s),
        trajectory,
        max_norm_drift: drift,
    })
}

/// `(theta_dot, phi_dot)` of the reduced spherical equations
///
/// ```text
/// theta' = h sin(phi - b) - alpha d sin(2 theta)
/// phi'   = -2 d cos(theta) - omega(t) + h cos(phi - b) cot(theta)
/// ```
///
/// The damping keeps only the anisotropy field.
pub fn spherical_rhs<D: Drive + ?Sized>(
    p: SphericalState,
    t_local: f64,
    drive: &D,
    azimuth: f64,
    medium: Medium,
) -> Result<(f64, f64)> {
    if p.theta < POLE_EPSILON || p.theta > std::f64::consts::PI - POLE_EPSILON || !p.theta.is_finite() {
        return Err(Error::Pole { theta: p.theta });
    }
    Ok(spherical_unchecked(p.theta, p.phi, t_local, drive, azimuth, medium))
}

#[inline]
fn spherical_unchecked<D: Drive + ?Sized>(
    theta: f64,
    phi: f64,
    t: f64,
    drive: &D,
    azimuth: f64,
    medium: Medium,
) -> (f64, f64) {
    let h = drive.amplitude();
    let (sp, cp) = (phi - azimuth).sin_cos();
    let (st, ct) = theta.sin_cos();
    let theta_dot = h * sp - medium.alpha * medium.d * (2.0 * theta).sin();
    let phi_dot = -2.0 * medium.d * ct - drive.omega(t) + h * cp * ct / st;
    (theta_dot, phi_dot)
}

/// Fixed-step RK4 of the spherical equations over one pulse. Returns the
/// states at the same sample times the Cartesian integrator retains.
pub fn integrate_spherical<D: Drive + ?Sized>(
    p0: SphericalState,
    drive: &D,
    azimuth: f64,
    medium: Medium,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, SphericalState)>> {
    cfg.validate()?;
    let steps = cfg.steps_per_pulse;
    let tf = drive.duration();
    let dt = tf / steps as f64;
    let mut out = vec![(0.0, p0)];
    let (mut theta, mut phi) = (p0.theta, p0.phi);
    let f = |th: f64, ph: f64, t: f64| -> Result<(f64, f64)> {
        spherical_rhs(SphericalState::new(th, ph), t, drive, azimuth, medium)
    };
    for i in 0..steps {
        let t = i as f64 * dt;
        let k1 = f(theta, phi, t)?;
        let k2 = f(theta + 0.5 * dt * k1.0, phi + 0.5 * dt * k1.1, t + 0.5 * dt)?;
        let k3 = f(theta + 0.5 * dt * k2.0, phi + 0.5 * dt * k2.1, t + 0.5 * dt)?;
        let k4 = f(theta + dt * k3.0, phi + dt * k3.1, t + dt)?;
        theta += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        phi += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        let step = i + 1;
        if cfg.keeps(step) {
            let local = if step == steps { tf } else { step as f64 * dt };
            out.push((local, SphericalState::new(theta, phi)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{to_cartesian, to_spherical};
    use std::f64::consts::PI;

    fn fig1() -> PulseDesign {
        PulseDesign::new(0.08, 100.0).unwrap()
    }

    const STILL: Medium = Medium { d: 0.0, alpha: 0.0 };

    fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    #[test]
    fn field_examples() {
        let p = fig1();
        let f = effective_field(SpinState::new(0.0, 0.0, 1.0), 50.0, &p, 0.0, 0.0);
        assert_eq!(f.x, 0.08);
        assert_eq!(f.y, 0.0);
        assert!(f.z.abs() < 1e-12);

        let f = effective_field(SpinState::SOUTH, 50.0, &p, 0.0, 0.01);
        assert!((f.z + 0.02).abs() < 1e-12);
        assert_eq!(f.x, 0.08);

        let f = effective_field(SpinState::NORTH, 50.0, &p, PhaseSense::Leading.azimuth(PI / 2.0), 0.0);
        assert!(f.x.abs() < 1e-16 && (f.y - 0.08).abs() < 1e-16);
        let f = effective_field(SpinState::NORTH, 50.0, &p, PhaseSense::Lagging.azimuth(PI / 2.0), 0.0);
        assert!(f.x.abs() < 1e-16 && (f.y + 0.08).abs() < 1e-16);
    }

    #[test]
    fn rhs_examples() {
        let h = 0.08;
        let w = -0.1207;
        let r = llg_rhs(SpinState::SOUTH, FieldSample { x: h, y: 0.0, z: w }, 0.0);
        assert_eq!(r, [0.0, -h, 0.0]);

        let s = SpinState::new(0.6, 0.0, 0.8);
        let r = llg_rhs(s, FieldSample { x: 1.2, y: 0.0, z: 1.6 }, 0.0);
        assert!(r.iter().all(|v| v.abs() < 1e-15));

        // s = e_x, H = Hz e_z: s x H = (0, -Hz, 0), s x (s x H) = (0, 0, -Hz)
        let hz = 0.7;
        let alpha = 0.1;
        let r = llg_rhs(SpinState::new(1.0, 0.0, 0.0), FieldSample { x: 0.0, y: 0.0, z: hz }, alpha);
        assert!((r[0]).abs() < 1e-16);
        assert!((r[1] + hz).abs() < 1e-16);
        assert!((r[2] - alpha * hz).abs() < 1e-16, "damping pulls toward the field");
    }

    #[test]
    fn rhs_orthogonal_to_state() {
        let states = [
            SpinState::new(0.6, 0.0, 0.8),
            SpinState::new(0.0, 1.0, 0.0),
            to_cartesian(SphericalState::new(2.1, -0.7)),
        ];
        for s in states {
            for alpha in [0.0, 0.01, 0.5] {
                let r = llg_rhs(s, FieldSample { x: 0.08, y: -0.03, z: 0.11 }, alpha);
                assert!(dot(r, s.to_array()).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn spherical_matches_cartesian_jacobian() {
        let p = fig1();
        let medium = Medium { d: 0.03, alpha: 0.0 };
        for &(theta, phi, t, az) in &[(0.7, 0.3, 12.0, 0.0), (2.4, -1.1, 61.0, 1.3), (1.2, 2.9, 99.0, -2.0)] {
            let sp = SphericalState::new(theta, phi);
            let s = to_cartesian(sp);
            let f = effective_field(s, t, &p, az, medium.d);
            let r = llg_rhs(s, f, 0.0);
            let (td, pd) = spherical_rhs(sp, t, &p, az, medium).unwrap();
            // ds/dt through the Jacobian of the spherical map
            let (st, ct) = theta.sin_cos();
            let (sph, cph) = phi.sin_cos();
            let j = [
                ct * cph * td - st * sph * pd,
                ct * sph * td + st * cph * pd,
                -st * td,
            ];
            for k in 0..3 {
                assert!((j[k] - r[k]).abs() < 1e-12, "{k}: {} vs {}", j[k], r[k]);
            }
        }
    }

    #[test]
    fn spherical_examples() {
        let p = fig1();
        let (td, pd) = spherical_rhs(SphericalState::new(PI / 2.0, PI / 2.0), 30.0, &p, 0.0, STILL).unwrap();
        assert!((td - 0.08).abs() < 1e-15);
        assert!((pd + p.omega(30.0)).abs() < 1e-15);

        let medium = Medium { d: 0.02, alpha: 0.1 };
        let (td, _) = spherical_rhs(SphericalState::new(PI / 4.0, 0.0), 30.0, &p, 0.0, medium).unwrap();
        assert!((td + 0.1 * 0.02).abs() < 1e-15);

        assert!(matches!(
            spherical_rhs(SphericalState::new(1e-9, 0.0), 0.0, &p, 0.0, STILL),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn zero_field_is_stationary() {
        let drive = ConstantDrive {
            amplitude: 0.0,
            omega: 0.0,
            duration: 100.0,
        };
        let s0 = to_cartesian(SphericalState::new(1.1, 0.4));
        let run = integrate_pulse(s0, &drive, 0.0, STILL, &IntegratorConfig::with_steps(2000), true).unwrap();
        for s in run.trajectory.unwrap().states {
            assert!((s.x - s0.x).abs() < 1e-15 && (s.y - s0.y).abs() < 1e-15 && (s.z - s0.z).abs() < 1e-15);
        }
    }

    #[test]
    fn precession_conserves_projection() {
        let drive = ConstantDrive {
            amplitude: 0.08,
            omega: 0.05,
            duration: 100.0,
        };
        let hhat = {
            let n = (0.08f64 * 0.08 + 0.05 * 0.05).sqrt();
            [0.08 / n, 0.0, 0.05 / n]
        };
        let s0 = to_cartesian(SphericalState::new(2.5, 0.3));
        let run = integrate_pulse(s0, &drive, 0.0, STILL, &IntegratorConfig::default(), true).unwrap();
        let p0 = dot(s0.to_array(), hhat);
        for s in run.trajectory.unwrap().states {
            assert!((dot(s.to_array(), hhat) - p0).abs() < 1e-9);
        }
    }

    #[test]
    fn damping_relaxes_toward_field() {
        let drive = ConstantDrive {
            amplitude: 0.0,
            omega: 1.0,
            duration: 100.0,
        };
        let s0 = to_cartesian(SphericalState::new(2.0, 0.5));
        let medium = Medium { d: 0.0, alpha: 0.05 };
        let run = integrate_pulse(s0, &drive, 0.0, medium, &IntegratorConfig::default(), true).unwrap();
        let zs: Vec<f64> = run.trajectory.unwrap().states.iter().map(|s| s.z).collect();
        assert!(zs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn linear_limit_reverses() {
        let p = fig1();
        let run = integrate_pulse(SpinState::SOUTH, &p, 0.0, STILL, &IntegratorConfig::default(), false).unwrap();
        assert!(run.final_state.z >= 0.9999 * 2.0 - 1.0);
        assert!((run.final_state.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn single_slot_sequence_equals_pulse() {
        let p = fig1();
        let medium = Medium { d: 0.01, alpha: 0.002 };
        let cfg = IntegratorConfig::with_steps(4000);
        let a = integrate_pulse(SpinState::SOUTH, &p, 0.0, medium, &cfg, true).unwrap();
        let b = integrate_sequence(SpinState::SOUTH, &p, &[0.0], PhaseSense::Lagging, medium, &cfg, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_layout() {
        let p = fig1();
        let cfg = IntegratorConfig::with_steps(5000);
        let run = integrate_sequence(
            SpinState::SOUTH,
            &p,
            &[0.0, 1.0, 0.0],
            PhaseSense::Lagging,
            STILL,
            &cfg,
            true,
        )
        .unwrap();
        let tr = run.trajectory.unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(*tr.times.last().unwrap(), 300.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        for k in 1..=3 {
            let count = tr.pulse_index.iter().filter(|&&i| i == k).count();
            assert!(count <= cfg.max_samples_per_pulse, "{count}");
        }
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_over_t0,sx,sy,sz,pulse_index"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.0, 0.0, -1.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::with_steps(999).validate().is_err());
        assert!(IntegratorConfig {
            renormalize_every: 0,
            ..IntegratorConfig::default()
        }
        .validate()
        .is_err());
        let p = fig1();
        let bad = SpinState::new(0.0, 0.0, -1.5);
        assert!(integrate_pulse(bad, &p, 0.0, STILL, &IntegratorConfig::default(), false).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let drive = ConstantDrive {
            amplitude: 0.08,
            omega: f64::NAN,
            duration: 10.0,
        };
        let err = integrate_pulse(SpinState::SOUTH, &drive, 0.0, STILL, &IntegratorConfig::default(), false)
            .unwrap_err();
        assert_eq!(err, Error::NonFinite { pulse: 1, step: 1, t: 10.0 / 20_000.0 });
    }

    #[test]
    fn feedforward_examples() {
        let p = fig1();
        let ff = feedforward_chirp(&p, 0.0, DEFAULT_FEEDFORWARD_COEFFICIENT);
        for t in [0.0, 13.0, 50.0, 88.0, 100.0] {
            assert_eq!(ff.omega(t), p.omega(t));
        }
        let c = feedforward_correction(&p.trajectory, 0.05, DEFAULT_FEEDFORWARD_COEFFICIENT, 50.0).unwrap();
        assert!(c.abs() < 1e-15);
        let c0 = feedforward_correction(&p.trajectory, 0.05, DEFAULT_FEEDFORWARD_COEFFICIENT, 0.0).unwrap();
        assert!((c0 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spherical_integration_round_trip_at_equator() {
        // start away from the poles with no drive: pure anisotropy precession
        let drive = ConstantDrive {
            amplitude: 0.0,
            omega: 0.0,
            duration: 50.0,
        };
        let medium = Medium { d: 0.05, alpha: 0.0 };
        let p0 = SphericalState::new(1.0, 0.0);
        let out = integrate_spherical(p0, &drive, 0.0, medium, &IntegratorConfig::with_steps(2000)).unwrap();
        let (t, last) = *out.last().unwrap();
        assert_eq!(t, 50.0);
        assert!((last.theta - 1.0).abs() < 1e-12);
        let expected_phi = -2.0 * 0.05 * 1f64.cos() * 50.0;
        assert!((last.phi - expected_phi).abs() < 1e-10);
        let s = to_spherical(to_cartesian(last)).unwrap();
        assert!((s.theta - 1.0).abs() < 1e-12);
    }
}
