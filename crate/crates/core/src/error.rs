use thiserror::Error;

/// Invalid parameters, settings or configuration files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("failed to parse config: {0}")]
    Parse(String),
}

/// Failures while integrating a single trial.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("initial gate value h0 = {0} lies outside [0, 1]")]
    GateOutOfRange(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("search window [{lo}, {hi}) ms lies outside the histogram support [0, {support}) ms")]
    WindowOutsideSupport { lo: f64, hi: f64, support: f64 },
    #[error("invalid analysis setting: {0}")]
    InvalidSetting(String),
}

/// A failed work item inside an ensemble or grid run.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(#[from] ConfigError),
    #[error("trial {trial} at D index {noise_index} (D = {noise}) failed: {source}")]
    Trial {
        noise_index: usize,
        noise: f64,
        trial: usize,
        source: SimulationError,
    },
    #[error("grid cell (v0 = {v0}, h0 = {h0}) failed: {source}")]
    Cell {
        v0: f64,
        h0: f64,
        source: SimulationError,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}
