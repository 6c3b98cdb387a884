//! Fixed-step Euler–Maruyama integration of the forced IFB neuron.
//!
//! One step advances `v` by `dt * drift_v + (D / C) * sqrt(dt) * z` and `h` by
//! `dt * drift_h` (clamped to `[0, 1]`), then applies the threshold/reset rule.
//! Spikes are stamped at the grid time of the state that reached threshold.

use serde::{Deserialize, Serialize};

use crate::error::SimulationError;
use crate::model::{ModelParameters, NeuronState};
use crate::rng::NoiseStream;

pub const DEFAULT_DT_MS: f64 = 0.02;
pub const DEFAULT_RECORD_STRIDE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Step size (ms).
    pub dt: f64,
    /// Simulated time (ms).
    pub duration: f64,
    /// Noise intensity D, in the units of the membrane current.
    pub noise: f64,
    #[serde(with = "crate::io::seed_repr")]
    pub seed: u64,
    pub record_trajectory: bool,
    /// Steps between stored trajectory samples.
    pub record_stride: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT_MS,
            duration: 3000.0,
            noise: 0.0,
            seed: 0,
            record_trajectory: false,
            record_stride: DEFAULT_RECORD_STRIDE,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if !self.dt.is_finite() {
            return Err(SimulationError::NonFinite("dt"));
        }
        if !self.duration.is_finite() {
            return Err(SimulationError::NonFinite("duration"));
        }
        if !self.noise.is_finite() {
            return Err(SimulationError::NonFinite("noise"));
        }
        if self.dt <= 0.0 {
            return Err(SimulationError::InvalidSettings("dt must be > 0".into()));
        }
        if self.duration <= 0.0 {
            return Err(SimulationError::InvalidSettings("duration must be > 0".into()));
        }
        if self.noise < 0.0 {
            return Err(SimulationError::InvalidSettings("noise must be >= 0".into()));
        }
        if self.record_stride == 0 {
            return Err(SimulationError::InvalidSettings("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// `ceil(duration / dt)`, ignoring rounding residue below 1e-9 steps.
    pub fn step_count(&self) -> u64 {
        let exact = self.duration / self.dt;
        let nearest = exact.round();
        if (exact - nearest).abs() < 1e-9 {
            nearest as u64
        } else {
            exact.ceil() as u64
        }
    }
}

/// Strided samples of the post-reset state, starting with the initial state at t = 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, s: NeuronState) {
        self.times.push(t);
        self.v.push(s.v);
        self.h.push(s.h);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Drops samples with `t < cutoff`.
    pub fn remove_transient(&self, cutoff: f64) -> Self {
        let start = self.times.partition_point(|&t| t < cutoff);
        Self {
            times: self.times[start..].to_vec(),
            v: self.v[start..].to_vec(),
            h: self.h[start..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub seed: u64,
    pub noise: f64,
    pub v0: f64,
    pub h0: f64,
    pub duration: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    /// Strictly increasing spike times (ms).
    pub spike_times: Vec<f64>,
    pub metadata: TrialMetadata,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.spike_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times.is_empty()
    }

    /// Drops spikes with `t < cutoff`.
    pub fn remove_transient(&self, cutoff: f64) -> Self {
        let start = self.spike_times.partition_point(|&t| t < cutoff);
        Self {
            spike_times: self.spike_times[start..].to_vec(),
            metadata: self.metadata,
        }
    }

    pub fn isis(&self) -> impl Iterator<Item = f64> + '_ {
        self.spike_times.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub spikes: SpikeTrain,
    pub trajectory: Option<Trajectory>,
}

/// One Euler–Maruyama step from `s` at time `t` with the standard normal draw `z`.
///
/// Returns the post-reset state and whether the threshold was reached.
#[inline]
pub fn em_step(
    s: NeuronState,
    t: f64,
    settings: &SimulationSettings,
    p: &ModelParameters,
    z: f64,
) -> (NeuronState, bool) {
    let dt = settings.dt;
    let diffusion = settings.noise / p.capacitance * dt.sqrt();
    let v = s.v + dt * p.drift_v(t, s) + diffusion * z;
    let h = (s.h + dt * p.drift_h(s)).clamp(0.0, 1.0);
    p.apply_threshold_reset(NeuronState::new(v, h))
}

/// Integrates one trial from `(v0, h0)` at `t = 0`.
pub fn simulate(
    v0: f64,
    h0: f64,
    settings: &SimulationSettings,
    p: &ModelParameters,
) -> Result<SimulationOutput, SimulationError> {
    if !v0.is_finite() {
        return Err(SimulationError::NonFinite("v0"));
    }
    if !h0.is_finite() {
        return Err(SimulationError::NonFinite("h0"));
    }
    if !(0.0..=1.0).contains(&h0) {
        return Err(SimulationError::GateOutOfRange(h0));
    }
    settings.validate()?;
    p.validate()
        .map_err(|e| SimulationError::InvalidSettings(e.to_string()))?;

    let n_steps = settings.step_count();
    let stride = settings.record_stride as u64;
    let mut trajectory = settings
        .record_trajectory
        .then(|| Trajectory::with_capacity((n_steps / stride + 1) as usize));
    if let Some(tr) = trajectory.as_mut() {
        tr.push(0.0, NeuronState::new(v0, h0));
    }

    let mut noise = NoiseStream::new(settings.seed);
    let noisy = settings.noise != 0.0;
    let mut spikes = Vec::new();
    let mut s = NeuronState::new(v0, h0);
    for k in 0..n_steps {
        let t = k as f64 * settings.dt;
        let z = if noisy { noise.draw_gaussian() } else { 0.0 };
        let (next, spiked) = em_step(s, t, settings, p, z);
        s = next;
        let t_next = (k + 1) as f64 * settings.dt;
        if spiked {
            spikes.push(t_next);
        }
        if let Some(tr) = trajectory.as_mut() {
            if (k + 1) % stride == 0 {
                tr.push(t_next, s);
            }
        }
    }

    Ok(SimulationOutput {
        spikes: SpikeTrain {
            spike_times: spikes,
            metadata: TrialMetadata {
                seed: settings.seed,
                noise: settings.noise,
                v0,
                h0,
                duration: settings.duration,
                dt: settings.dt,
            },
        },
        trajectory,
    })
}
