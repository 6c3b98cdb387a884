//! Simulation and analysis toolkit for a sinusoidally forced
//! integrate-and-fire-or-burst (IFB) neuron with additive noise.
//!
//! - [`model`]: the vector field, gating and threshold/reset rule.
//! - [`integrator`]: seeded Euler–Maruyama trials producing spike trains and trajectories.
//! - [`analysis`]: burst segmentation, mode statistics, ISI histograms, per-cycle extrema.
//! - [`experiments`]: parallel, schedule-independent ensembles and initial-condition grids.
//! - [`io`]: run configuration, manifests and CSV output.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod io;
pub mod model;
pub mod rng;

pub use analysis::{
    AnalysisSettings, Burst, BurstMode, BurstSequence, IsiHistogram, NoiseRegime, TrialStatistics,
};
pub use error::{AnalysisError, ConfigError, ExperimentError, SimulationError};
pub use experiments::{
    run_ensemble, run_grid, AggregateCurve, EnsembleSpec, Execution, GridMap, GridSpec,
};
pub use integrator::{simulate, SimulationOutput, SimulationSettings, SpikeTrain, Trajectory};
pub use model::{HEquation, ModelParameters, NeuronState};
