//! Fast magnetization reversal of a single-domain nanomagnet.
//!
//! A reversal pulse of constant amplitude is designed by prescribing the
//! polar angle as a quintic and inverting the linear two-level equations
//! for the chirp ([`design`]). The pulse is repeated with composite phases
//! to suppress the anisotropy nonlinearity ([`composite`]), and the full
//! Landau-Lifshitz-Gilbert dynamics are integrated in the rotating frame
//! ([`dynamics`]). [`protocol`] ties these into a single experiment and
//! [`sweep`] scans it over parameter grids.

pub mod cli;
pub mod composite;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod output;
pub mod protocol;
pub mod sweep;

pub use composite::{build_sequence, composite_phases, CompositeSequence};
pub use design::{solve_theta, PulseDesign, ThetaTrajectory};
pub use dynamics::{
    integrate_pulse, integrate_sequence, IntegratorConfig, Medium, PhaseSense, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    derive_scales, to_cartesian, to_spherical, DimensionlessParams, MaterialParams, SphericalState,
    SpinState,
};
pub use protocol::{run_experiment, spin_up_probability, ExperimentSpec, SimulationResult};
pub use sweep::{compare_n, sweep, Axis, Execution, SweepParam, SweepResult, SweepSpec};
