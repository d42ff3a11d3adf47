//! Units, material constants and coordinate maps shared by every other module.
//!
//! All dynamics run in dimensionless units: fields in multiples of the
//! anisotropy field scale `h_0 = 2K/(mu_0 M_s)`, time in multiples of
//! `t_0 = 1/(gamma mu_0 h_0)`, so the gyromagnetic ratio drops out (gamma = 1).
//! Physical units only appear when converting at the I/O boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability in T·m/A.
pub const MU_0: f64 = 4.0e-7 * PI;

/// Maximum deviation from unit length accepted by [`to_spherical`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Physical constants of a single-domain particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// gamma, 1/(T·s)
    pub gyromagnetic_ratio: f64,
    /// K, J/m^3
    pub anisotropy_constant: f64,
    /// V, m^3
    pub volume: f64,
    /// M_s, A/m
    pub saturation_magnetization: f64,
    /// mu_s, J/T
    pub moment_at_saturation: f64,
    /// Pins `mu_0 h_0` (tesla) instead of evaluating it from `K` and `M_s`.
    #[serde(default)]
    pub field_scale_override: Option<f64>,
}

impl MaterialParams {
    /// 3 nm cobalt nanoparticle.
    pub fn cobalt() -> Self {
        Self {
            gyromagnetic_ratio: 1.76e11,
            anisotropy_constant: 2.2e5,
            volume: 14.1e-27,
            saturation_magnetization: 1.44e6,
            moment_at_saturation: 2.36e-20,
            field_scale_override: None,
        }
    }

    /// Cobalt constants with `mu_0 h_0` pinned to the rounded 305 mT.
    pub fn cobalt_quoted_scale() -> Self {
        Self {
            field_scale_override: Some(0.305),
            ..Self::cobalt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gyromagnetic_ratio", self.gyromagnetic_ratio),
            ("anisotropy_constant", self.anisotropy_constant),
            ("volume", self.volume),
            ("saturation_magnetization", self.saturation_magnetization),
            ("moment_at_saturation", self.moment_at_saturation),
        ];
        for (name, value) in fields {
            require_positive(name, value)?;
        }
        if let Some(h0) = self.field_scale_override {
            require_positive("field_scale_override", h0)?;
        }
        Ok(())
    }
}

fn require_positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {value}")))
    }
}

/// Normalization scales.
///
/// `h_0 = 2K/(mu_0 M_s)` is an H-field in A/m; `field_scale` is the same
/// scale as a flux density, `mu_0 h_0 = 2K/M_s`, which is what enters
/// `t_0 = 1/(gamma mu_0 h_0)` with gamma in 1/(T·s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    /// mu_0 h_0, tesla
    pub field_scale: f64,
    /// h_0, A/m
    pub field_scale_a_per_m: f64,
    /// t_0, seconds
    pub time_scale: f64,
}

/// Evaluates the field scale (or its override) and `t_0`.
pub fn derive_scales(m: &MaterialParams) -> Result<Scales> {
    m.validate()?;
    let h0 = 2.0 * m.anisotropy_constant / (MU_0 * m.saturation_magnetization);
    let field_scale = m.field_scale_override.unwrap_or(MU_0 * h0);
    Ok(Scales {
        field_scale,
        field_scale_a_per_m: field_scale / MU_0,
        time_scale: 1.0 / (m.gyromagnetic_ratio * field_scale),
    })
}

/// Dimensionless protocol parameters consumed by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    /// drive amplitude, units of h_0
    pub h: f64,
    /// anisotropy field, units of h_0
    pub d: f64,
    /// Gilbert damping
    pub alpha: f64,
    /// duration of one pulse, units of t_0
    pub tf: f64,
}

impl DimensionlessParams {
    pub fn new(h: f64, d: f64, alpha: f64, tf: f64) -> Result<Self> {
        let p = Self { h, d, alpha, tf };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("h", self.h)?;
        require_positive("tf", self.tf)?;
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(Error::validation("d", format!("must be finite and ≥ 0, got {}", self.d)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::validation(
                "alpha",
                format!("must be finite and ≥ 0, got {}", self.alpha),
            ));
        }
        Ok(())
    }

    /// Builds parameters from a physical amplitude (T) and duration (s).
    pub fn from_physical(
        scales: &Scales,
        h_tesla: f64,
        d: f64,
        alpha: f64,
        tf_seconds: f64,
    ) -> Result<Self> {
        Self::new(
            h_tesla / scales.field_scale,
            d,
            alpha,
            tf_seconds / scales.time_scale,
        )
    }

    /// Returns `(h in T, t_f in s)`.
    pub fn to_physical(&self, scales: &Scales) -> (f64, f64) {
        (self.h * scales.field_scale, self.tf * scales.time_scale)
    }
}

/// Unit magnetization direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpinState {
    pub const SOUTH: SpinState = SpinState { x: 0.0, y: 0.0, z: -1.0 };
    pub const NORTH: SpinState = SpinState { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Polar angle `theta` from +z and azimuth `phi` from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalState {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalState {
    pub const fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }
}

pub fn to_cartesian(p: SphericalState) -> SpinState {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    SpinState::new(st * cp, st * sp, ct)
}

/// Inverse of [`to_cartesian`]; `phi` is reported as 0 at either pole.
pub fn to_spherical(s: SpinState) -> Result<SphericalState> {
    let n = s.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::validation("spin", format!("expected unit vector, |s| = {n}")));
    }
    let rho = s.x.hypot(s.y);
    // atan2 keeps theta accurate near the poles where acos loses digits
    let theta = rho.atan2(s.z);
    let phi = if rho == 0.0 { 0.0 } else { s.y.atan2(s.x) };
    Ok(SphericalState::new(theta, phi))
}
