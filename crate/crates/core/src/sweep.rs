//! Parameter scans over one or two axes.
//!
//! Grid points are independent runs of [`run_experiment`]; they may be
//! evaluated on any number of threads but are always returned in row-major
//! axis order, so output files do not depend on the schedule.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::dynamics::IntegratorConfig;
use crate::output::fmt_f64;
use crate::protocol::{run_experiment, ExperimentSpec};

/// Default number of points on a continuous axis.
pub const DEFAULT_POINTS: usize = 101;
/// Default largest pulse count on an `N` axis.
pub const DEFAULT_MAX_N: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "h")]
    H,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "N")]
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::H => "h",
            SweepParam::D => "d",
            SweepParam::Alpha => "alpha",
            SweepParam::N => "N",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Axis {
    /// `count` evenly spaced values from `min` to `max` inclusive.
    pub fn linear(param: SweepParam, min: f64, max: f64, count: usize) -> Result<Self> {
        if param == SweepParam::N {
            return Err(Error::validation("axis", "N axes enumerate odd values, use Axis::odd"));
        }
        if count < 2 {
            return Err(Error::validation("points", format!("need at least 2 points, got {count}")));
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(Error::validation("axis", format!("need finite min < max, got [{min}, {max}]")));
        }
        let last = (count - 1) as f64;
        let values = (0..count)
            .map(|i| if i == count - 1 { max } else { min + (max - min) * (i as f64 / last) })
            .collect();
        let axis = Self { param, values };
        axis.validate()?;
        Ok(axis)
    }

    /// Odd pulse counts `min, min + 2, ..., max`.
    pub fn odd(min: usize, max: usize) -> Result<Self> {
        if min.is_multiple_of(2) || max.is_multiple_of(2) || max <= min {
            return Err(Error::validation(
                "N",
                format!("axis bounds must be odd with min < max, got [{min}, {max}]"),
            ));
        }
        Ok(Self {
            param: SweepParam::N,
            values: (min..=max).step_by(2).map(|n| n as f64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::validation("axis", "need at least 2 values"));
        }
        for &v in &self.values {
            let ok = match self.param {
                SweepParam::H => v > 0.0,
                SweepParam::D | SweepParam::Alpha => v >= 0.0,
                SweepParam::N => v >= 1.0 && v.fract() == 0.0 && (v as usize) % 2 == 1,
            };
            if !ok || !v.is_finite() {
                return Err(Error::validation("axis", format!("{} value {v} out of range", self.param.name())));
            }
        }
        Ok(())
    }

    fn format(&self, v: f64) -> String {
        match self.param {
            SweepParam::N => format!("{}", v as usize),
            _ => fmt_f64(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub base: ExperimentSpec,
    pub integrator: IntegratorConfig,
}

impl SweepSpec {
    pub fn new(axes: Vec<Axis>, base: ExperimentSpec) -> Self {
        Self {
            axes,
            integrator: base.integrator,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::validation("axes", format!("need 1 or 2 axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::validation("axes", "the two axes must scan different parameters"));
        }
        for axis in &self.axes {
            axis.validate()?;
        }
        self.integrator.validate()?;
        // base must be valid apart from feasibility, which is judged per point
        self.base.params.validate()?;
        crate::composite::validate_count(self.base.n_pulses)
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    /// Coordinates of every grid point in row-major order.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut grid = vec![Vec::new()];
        for axis in &self.axes {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        grid
    }

    fn spec_at(&self, coords: &[f64]) -> ExperimentSpec {
        let mut spec = ExperimentSpec {
            integrator: self.integrator,
            record_trajectory: false,
            ..self.base
        };
        for (axis, &v) in self.axes.iter().zip(coords) {
            match axis.param {
                SweepParam::H => spec.params.h = v,
                SweepParam::D => spec.params.d = v,
                SweepParam::Alpha => spec.params.alpha = v,
                SweepParam::N => spec.n_pulses = v as usize,
            }
        }
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    /// `h t_f < pi`: no reversal pulse exists
    Infeasible,
    /// integrator produced a non-finite state
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub probability: Option<f64>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// `<axis>[,<axis2>],P,status`; flagged points leave `P` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for axis in &self.axes {
            out.push_str(axis.param.name());
            out.push(',');
        }
        out.push_str("P,status\n");
        for p in &self.points {
            for (axis, &v) in self.axes.iter().zip(&p.coords) {
                out.push_str(&axis.format(v));
                out.push(',');
            }
            let prob = p.probability.map(fmt_f64).unwrap_or_default();
            let _ = writeln!(out, "{prob},{}", p.status.as_str());
        }
        out
    }

    /// Probability grid for a 2-axis sweep, indexed `[i][j]` along axis 0 and 1.
    pub fn grid2(&self) -> Option<Vec<Vec<Option<f64>>>> {
        if self.axes.len() != 2 {
            return None;
        }
        let cols = self.axes[1].len();
        Some(
            self.points
                .chunks(cols)
                .map(|row| row.iter().map(|p| p.probability).collect())
                .collect(),
        )
    }
}

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// rayon global pool
    #[default]
    Parallel,
    /// dedicated pool with this many threads
    Threads(usize),
}

fn evaluate(spec: &SweepSpec, coords: Vec<f64>) -> SweepPoint {
    let (probability, status) = match run_experiment(&spec.spec_at(&coords)) {
        Ok(r) => (Some(r.probability), PointStatus::Ok),
        Err(Error::Infeasible { .. }) => (None, PointStatus::Infeasible),
        Err(_) => (None, PointStatus::Failed),
    };
    SweepPoint {
        coords,
        probability,
        status,
    }
}

pub fn sweep(spec: &SweepSpec, execution: Execution) -> Result<SweepResult> {
    spec.validate()?;
    let grid = spec.grid();
    let points = match execution {
        Execution::Serial => grid.into_iter().map(|c| evaluate(spec, c)).collect(),
        Execution::Parallel => grid.into_par_iter().map(|c| evaluate(spec, c)).collect(),
        Execution::Threads(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::validation("threads", e.to_string()))?;
            pool.install(|| grid.into_par_iter().map(|c| evaluate(spec, c)).collect())
        }
    };
    Ok(SweepResult {
        axes: spec.axes.clone(),
        points,
    })
}

/// One 1-axis sweep per pulse count, aligned on the shared axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub axis: Axis,
    #[serde(rename = "N")]
    pub counts: Vec<usize>,
    pub curves: Vec<SweepResult>,
}

impl Comparison {
    /// Probability of curve `k` (index into `counts`) at axis point `i`.
    pub fn probability(&self, k: usize, i: usize) -> Option<f64> {
        self.curves[k].points[i].probability
    }

    pub fn curve(&self, k: usize) -> Vec<Option<f64>> {
        self.curves[k].points.iter().map(|p| p.probability).collect()
    }

    /// `<axis>,P_N1,P_N3,...,status`; `status` is the first non-ok status in the row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.axis.param.name());
        for n in &self.counts {
            let _ = write!(out, ",P_N{n}");
        }
        out.push_str(",status\n");
        for (i, &v) in self.axis.values.iter().enumerate() {
            out.push_str(&self.axis.format(v));
            let mut status = PointStatus::Ok;
            for curve in &self.curves {
                let p = &curve.points[i];
                out.push(',');
                if let Some(prob) = p.probability {
                    out.push_str(&fmt_f64(prob));
                }
                if status == PointStatus::Ok {
                    status = p.status;
                }
            }
            let _ = writeln!(out, ",{}", status.as_str());
        }
        out
    }
}

pub fn compare_n(spec: &SweepSpec, counts: &[usize], execution: Execution) -> Result<Comparison> {
    if spec.axes.len() != 1 || spec.axes[0].param == SweepParam::N {
        return Err(Error::validation("axes", "N comparison needs exactly one non-N axis"));
    }
    if counts.is_empty() {
        return Err(Error::validation("N", "need at least one pulse count"));
    }
    for &n in counts {
        crate::composite::validate_count(n)?;
    }
    let curves = counts
        .iter()
        .map(|&n| {
            let per_n = SweepSpec {
                base: ExperimentSpec {
                    n_pulses: n,
                    ..spec.base
                },
                ..spec.clone()
            };
            sweep(&per_n, execution)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        axis: spec.axes[0].clone(),
        counts: counts.to_vec(),
        curves,
    })
}
