//! One reversal experiment: design, sequence, integrate, score.

use serde::{Deserialize, Serialize};

use crate::composite::{build_sequence, validate_count};
use crate::design::PulseDesign;
use crate::dynamics::{feedforward_chirp, integrate_sequence, IntegratorConfig, Medium, PhaseSense, Trajectory};
use crate::error::Result;
use crate::model::{DimensionlessParams, SpinState};

/// `(1 + s_z) / 2`, the spin-up population of the equivalent two-level system.
pub fn spin_up_probability(s: SpinState) -> f64 {
    (1.0 + s.z) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: DimensionlessParams,
    #[serde(rename = "N")]
    pub n_pulses: usize,
    #[serde(skip)]
    pub record_trajectory: bool,
    #[serde(skip)]
    pub integrator: IntegratorConfig,
    /// Feed-forward coefficient `k` adding `k d cos(theta_ref)` to the chirp.
    pub feedforward: Option<f64>,
    pub phase_sense: PhaseSense,
}

impl ExperimentSpec {
    pub fn new(params: DimensionlessParams, n_pulses: usize) -> Self {
        Self {
            params,
            n_pulses,
            record_trajectory: false,
            integrator: IntegratorConfig::default(),
            feedforward: None,
            phase_sense: PhaseSense::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        validate_count(self.n_pulses)?;
        self.integrator.validate()?;
        if let Some(k) = self.feedforward {
            if !k.is_finite() {
                return Err(crate::error::Error::validation("feedforward", "coefficient must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub probability: f64,
    pub final_state: SpinState,
    pub trajectory: Option<Trajectory>,
    pub max_norm_drift: f64,
    pub spec: ExperimentSpec,
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    #[serde(rename = "P")]
    probability: f64,
    s_final: [f64; 3],
    spec: &'a ExperimentSpec,
    integrator: IntegratorRecord,
}

#[derive(Serialize)]
struct IntegratorRecord {
    scheme: &'static str,
    #[serde(flatten)]
    config: IntegratorConfig,
    max_norm_drift: f64,
}

impl SimulationResult {
    /// `{"P", "s_final", "spec", "integrator"}` as pretty JSON.
    pub fn to_json(&self) -> String {
        let record = ResultRecord {
            probability: self.probability,
            s_final: self.final_state.to_array(),
            spec: &self.spec,
            integrator: IntegratorRecord {
                scheme: "rk4",
                config: self.spec.integrator,
                max_norm_drift: self.max_norm_drift,
            },
        };
        serde_json::to_string_pretty(&record).expect("result record serializes")
    }
}

/// Designs the pulse once, repeats it `N` times with composite phases and
/// integrates from the south pole.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SimulationResult> {
    spec.validate()?;
    let p = spec.params;
    let design = PulseDesign::new(p.h, p.tf)?;
    let sequence = build_sequence(design, spec.n_pulses)?;
    let medium = Medium { d: p.d, alpha: p.alpha };
    let run = match spec.feedforward {
        Some(k) => integrate_sequence(
            SpinState::SOUTH,
            &feedforward_chirp(&sequence.pulse, p.d, k),
            &sequence.phases,
            spec.phase_sense,
            medium,
            &spec.integrator,
            spec.record_trajectory,
        )?,
        None => integrate_sequence(
            SpinState::SOUTH,
            &sequence.pulse,
            &sequence.phases,
            spec.phase_sense,
            medium,
            &spec.integrator,
            spec.record_trajectory,
        )?,
    };
    Ok(SimulationResult {
        probability: spin_up_probability(run.final_state),
        final_state: run.final_state,
        trajectory: run.trajectory,
        max_norm_drift: run.max_norm_drift,
        spec: *spec,
    })
}
