//! Composite phase sequences built from one designed pulse.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::design::PulseDesign;
use crate::error::{Error, Result};

pub fn validate_count(n: usize) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::validation("N", format!("must be odd and ≥ 1, got {n}")));
    }
    Ok(())
}

/// Phases `phi_k = (N + 1 - 2 floor((k+1)/2)) floor(k/2) pi / N`, `k = 1..=N`,
/// reduced to `[0, 2 pi)`.
///
/// The integer prefactor is formed exactly before scaling by `pi/N`, so the
/// symmetry `phi_k = phi_{N+1-k}` and `phi_1 = phi_N = 0` hold bit for bit.
pub fn composite_phases(n: usize) -> Result<Vec<f64>> {
    validate_count(n)?;
    let two_n = 2 * n as u64;
    Ok((1..=n as u64)
        .map(|k| {
            let multiple = (n as u64 + 1 - 2 * k.div_ceil(2)) * (k / 2);
            // reduce modulo 2N in integers: the phase is multiple * pi / N
            let reduced = multiple % two_n;
            let phase = reduced as f64 * PI / n as f64;
            debug_assert!(phase < TAU);
            phase
        })
        .collect())
}

/// `N` copies of one pulse, each with its own transverse-field phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSequence {
    pub pulse: PulseDesign,
    pub phases: Vec<f64>,
}

impl CompositeSequence {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.len() as f64 * self.pulse.tf()
    }

    /// Global start time of pulse `k` (0-based).
    pub fn pulse_start(&self, k: usize) -> f64 {
        k as f64 * self.pulse.tf()
    }

    pub fn description(&self) -> SequenceDescription {
        SequenceDescription {
            n: self.len(),
            phases_rad: self.phases.clone(),
            tf_per_pulse: self.pulse.tf(),
            h: self.pulse.h(),
        }
    }
}

pub fn build_sequence(pulse: PulseDesign, n: usize) -> Result<CompositeSequence> {
    Ok(CompositeSequence {
        pulse,
        phases: composite_phases(n)?,
    })
}

/// JSON export shape of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDescription {
    #[serde(rename = "N")]
    pub n: usize,
    pub phases_rad: Vec<f64>,
    pub tf_per_pulse: f64,
    pub h: f64,
}
