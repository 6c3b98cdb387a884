//! Seeded trial ensembles, noise sweeps and initial-condition grids.
//!
//! Every trial or grid cell is an independent work item whose noise stream is
//! keyed by `derive_trial_seed(base_seed, indices)`. Work items run on a rayon
//! pool (or serially) and are collected in index order before any reduction,
//! so results do not depend on the schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_trial, occurrence_array, AnalysisSettings, IsiHistogram, TrialStatistics};
use crate::error::{ConfigError, ExperimentError, SimulationError};
use crate::integrator::{simulate, SimulationSettings, DEFAULT_DT_MS};
use crate::model::ModelParameters;
pub use crate::rng::derive_trial_seed;

/// How work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with this many workers.
    Threads(usize),
}

impl Execution {
    fn map<T, R, F>(self, items: Vec<T>, f: F) -> Result<Vec<R>, ExperimentError>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> Result<R, ExperimentError> + Sync + Send,
    {
        match self {
            Execution::Serial => items.into_iter().map(f).collect(),
            Execution::Parallel => items.into_par_iter().map(f).collect(),
            Execution::Threads(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| ExperimentError::Pool(e.to_string()))?;
                pool.install(|| items.into_par_iter().map(f).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub v0: f64,
    pub h0: f64,
    pub noise_values: Vec<f64>,
    pub n_trials: usize,
    /// ms
    pub trial_duration: f64,
    #[serde(with = "crate::io::seed_repr")]
    pub base_seed: u64,
    pub dt: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            v0: -45.0,
            h0: 0.045,
            noise_values: default_noise_ladder(),
            n_trials: 300,
            trial_duration: 30_000.0,
            base_seed: 0,
            dt: DEFAULT_DT_MS,
        }
    }
}

/// D values spanning the deterministic, weak, intermediate, strong and
/// extra-strong regimes.
pub fn default_noise_ladder() -> Vec<f64> {
    vec![
        0.0, 0.01, 0.02, 0.03, 0.05, 0.06, 0.08, 0.1, 0.12, 0.14, 0.2, 0.3, 0.5, 0.7, 1.0, 1.2,
        1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0,
    ]
}

impl EnsembleSpec {
    pub fn validate(&self, analysis: &AnalysisSettings) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1".into());
        }
        if self.noise_values.is_empty() {
            return bad("noise_values must not be empty".into());
        }
        if let Some(d) = self.noise_values.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return bad(format!("noise values must be finite and >= 0, got {d}"));
        }
        if !(self.h0.is_finite() && (0.0..=1.0).contains(&self.h0)) {
            return bad(format!("h0 = {} lies outside [0, 1]", self.h0));
        }
        if !self.v0.is_finite() {
            return bad("v0 must be finite".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be > 0".into());
        }
        if !(self.trial_duration.is_finite() && self.trial_duration > analysis.transient_cutoff) {
            return bad("trial_duration must exceed the transient cutoff".into());
        }
        analysis
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    fn settings(&self, noise: f64, seed: u64) -> SimulationSettings {
        SimulationSettings {
            dt: self.dt,
            duration: self.trial_duration,
            noise,
            seed,
            record_trajectory: false,
            ..Default::default()
        }
    }
}

/// Seed of trial `trial` at D index `noise_index`.
pub fn ensemble_trial_seed(base_seed: u64, noise_index: usize, trial: usize) -> u64 {
    derive_trial_seed(base_seed, &[noise_index as u64, trial as u64])
}

/// Runs a single ensemble trial; used by the ensemble and for recomputation.
pub fn run_ensemble_trial(
    spec: &EnsembleSpec,
    analysis: &AnalysisSettings,
    p: &ModelParameters,
    noise_index: usize,
    trial: usize,
) -> Result<TrialStatistics, ExperimentError> {
    let noise = spec.noise_values[noise_index];
    let settings = spec.settings(noise, ensemble_trial_seed(spec.base_seed, noise_index, trial));
    let out = simulate(spec.v0, spec.h0, &settings, p).map_err(|source| ExperimentError::Trial {
        noise_index,
        noise,
        trial,
        source,
    })?;
    Ok(analyze_trial(&out.spikes, None, analysis, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub noise: f64,
    pub n_trials: usize,
    /// Trials with at least one complete burst; occurrence means are over these.
    pub trials_with_bursts: usize,
    pub mean_transition_rate: f64,
    /// Mean occurrence fraction of modes 1..=4.
    pub mean_occurrence: [f64; 4],
    pub mean_spikes_per_burst: Option<f64>,
    pub isih: IsiHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub v0: f64,
    pub h0: f64,
    pub points: Vec<AggregatePoint>,
}

/// Reduces per-trial statistics in trial order.
pub fn aggregate_trials(noise: f64, trials: &[TrialStatistics], binwidth: f64) -> AggregatePoint {
    let mut rate_sum = 0.0;
    let mut occ_sum = [0.0; 4];
    let mut spb_sum = 0.0;
    let mut with_bursts = 0usize;
    let mut isih = IsiHistogram::empty(binwidth);
    for t in trials {
        rate_sum += t.transition_rate;
        if let Some(spb) = t.mean_spikes_per_burst {
            with_bursts += 1;
            spb_sum += spb;
            for (acc, f) in occ_sum.iter_mut().zip(occurrence_array(&t.occurrence)) {
                *acc += f;
            }
        }
        isih.merge(&t.isih);
    }
    let n = trials.len();
    let denom = with_bursts.max(1) as f64;
    AggregatePoint {
        noise,
        n_trials: n,
        trials_with_bursts: with_bursts,
        mean_transition_rate: if n > 0 { rate_sum / n as f64 } else { 0.0 },
        mean_occurrence: occ_sum.map(|s| s / denom),
        mean_spikes_per_burst: (with_bursts > 0).then(|| spb_sum / with_bursts as f64),
        isih,
    }
}

/// Runs `n_trials` per D value and aggregates each D separately.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    analysis: &AnalysisSettings,
    p: &ModelParameters,
    exec: Execution,
) -> Result<AggregateCurve, ExperimentError> {
    spec.validate(analysis)?;
    p.validate()?;
    let items: Vec<(usize, usize)> = (0..spec.noise_values.len())
        .flat_map(|d| (0..spec.n_trials).map(move |t| (d, t)))
        .collect();
    let stats = exec.map(items, |(d, t)| run_ensemble_trial(spec, analysis, p, d, t))?;
    let points = stats
        .chunks(spec.n_trials)
        .zip(&spec.noise_values)
        .map(|(trials, &noise)| aggregate_trials(noise, trials, analysis.binwidth))
        .collect();
    Ok(AggregateCurve {
        v0: spec.v0,
        h0: spec.h0,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub v0_range: (f64, f64),
    pub h0_range: (f64, f64),
    /// mV
    pub v0_resolution: f64,
    pub h0_resolution: f64,
    pub noise: f64,
    /// ms
    pub duration: f64,
    #[serde(with = "crate::io::seed_repr")]
    pub base_seed: u64,
    pub dt: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            v0_range: (-90.0, -35.0),
            h0_range: (0.0, 1.0),
            v0_resolution: 0.5,
            h0_resolution: 0.01,
            noise: 0.0,
            duration: 40_000.0,
            base_seed: 0,
            dt: DEFAULT_DT_MS,
        }
    }
}

impl GridSpec {
    /// 2 mV × 0.04 over the default ranges.
    pub fn coarse() -> Self {
        Self {
            v0_resolution: 2.0,
            h0_resolution: 0.04,
            ..Default::default()
        }
    }

    pub fn validate(&self, analysis: &AnalysisSettings) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let finite = [
            self.v0_range.0,
            self.v0_range.1,
            self.h0_range.0,
            self.h0_range.1,
            self.v0_resolution,
            self.h0_resolution,
            self.noise,
            self.duration,
            self.dt,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("grid settings must be finite");
        }
        if self.v0_resolution <= 0.0 || self.h0_resolution <= 0.0 {
            return bad("grid resolutions must be > 0");
        }
        if self.v0_range.0 > self.v0_range.1 || self.h0_range.0 > self.h0_range.1 {
            return bad("grid ranges must be ordered (lo, hi)");
        }
        if self.h0_range.0 < 0.0 || self.h0_range.1 > 1.0 {
            return bad("h0 range must lie within [0, 1]");
        }
        if self.noise < 0.0 {
            return bad("noise must be >= 0");
        }
        if self.dt <= 0.0 {
            return bad("dt must be > 0");
        }
        if self.duration <= analysis.transient_cutoff {
            return bad("duration must exceed the transient cutoff");
        }
        analysis
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn v0_values(&self) -> Vec<f64> {
        axis(self.v0_range, self.v0_resolution)
    }

    /// Values are clamped into `[0, 1]` against rounding at the top edge.
    pub fn h0_values(&self) -> Vec<f64> {
        axis(self.h0_range, self.h0_resolution)
            .into_iter()
            .map(|h| h.clamp(0.0, 1.0))
            .collect()
    }
}

/// `lo + i * step` for every `i` with the value not exceeding `hi` (up to 1e-9 steps).
fn axis((lo, hi): (f64, f64), step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Mean spikes per complete burst on a `(v0, h0)` grid. Row-major in `v0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub v0_values: Vec<f64>,
    pub h0_values: Vec<f64>,
    /// `None` marks cells without any complete burst.
    pub cells: Vec<Option<f64>>,
}

impl GridMap {
    pub fn get(&self, iv: usize, ih: usize) -> Option<f64> {
        self.cells[iv * self.h0_values.len() + ih]
    }

    /// `(v0, h0, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, Option<f64>)> + '_ {
        let nh = self.h0_values.len();
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| (self.v0_values[k / nh], self.h0_values[k % nh], *c))
    }

    pub fn populated(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().filter_map(|c| *c)
    }
}

pub fn grid_cell_seed(base_seed: u64, iv: usize, ih: usize) -> u64 {
    derive_trial_seed(base_seed, &[iv as u64, ih as u64])
}

/// Mean spikes per complete burst for one cell.
pub fn run_grid_cell(
    spec: &GridSpec,
    analysis: &AnalysisSettings,
    p: &ModelParameters,
    v0: f64,
    h0: f64,
    seed: u64,
) -> Result<Option<f64>, SimulationError> {
    let settings = SimulationSettings {
        dt: spec.dt,
        duration: spec.duration,
        noise: spec.noise,
        seed,
        record_trajectory: false,
        ..Default::default()
    };
    let out = simulate(v0, h0, &settings, p)?;
    let seq = crate::analysis::BurstSequence::from_trial(
        &out.spikes,
        analysis.transient_cutoff,
        analysis.isi_threshold,
    );
    Ok(seq.mean_spikes_per_burst())
}

/// One trial per grid cell, seeded from the cell's indices.
pub fn run_grid(
    spec: &GridSpec,
    analysis: &AnalysisSettings,
    p: &ModelParameters,
    exec: Execution,
) -> Result<GridMap, ExperimentError> {
    spec.validate(analysis)?;
    p.validate()?;
    let v0s = spec.v0_values();
    let h0s = spec.h0_values();
    let items: Vec<(usize, usize)> = (0..v0s.len())
        .flat_map(|iv| (0..h0s.len()).map(move |ih| (iv, ih)))
        .collect();
    let cells = exec.map(items, |(iv, ih)| {
        let (v0, h0) = (v0s[iv], h0s[ih]);
        run_grid_cell(spec, analysis, p, v0, h0, grid_cell_seed(spec.base_seed, iv, ih))
            .map_err(|source| ExperimentError::Cell { v0, h0, source })
    })?;
    Ok(GridMap {
        v0_values: v0s,
        h0_values: h0s,
        cells,
    })
}
