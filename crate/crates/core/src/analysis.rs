//! Burst segmentation and per-trial statistics.
//!
//! Spikes are grouped into bursts by a fixed ISI threshold. Each burst gets a
//! mode label from its spike count (1, 2, 3, or 4 for four and more). The first
//! and last bursts of an analysis window may be cut by the window edges, so
//! they are kept in the sequence but excluded from mode statistics.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::AnalysisError;
use crate::integrator::{SpikeTrain, Trajectory};
use crate::model::ModelParameters;

pub const DEFAULT_ISI_THRESHOLD_MS: f64 = 80.0;
pub const DEFAULT_BINWIDTH_MS: f64 = 1.0;
pub const DEFAULT_TRANSIENT_MS: f64 = 100.0;
pub const DEFAULT_EXTREMA_TRANSIENT_MS: f64 = 400.0;
pub const DEFAULT_TROUGH_WINDOW_MS: (f64, f64) = (30.0, 150.0);
/// Depth below `v_h` that re-arms the upward-crossing detector.
pub const DEFAULT_CROSSING_HYSTERESIS_MV: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub isi_threshold: f64,
    pub binwidth: f64,
    pub transient_cutoff: f64,
    pub extrema_cutoff: f64,
    pub trough_window: (f64, f64),
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            isi_threshold: DEFAULT_ISI_THRESHOLD_MS,
            binwidth: DEFAULT_BINWIDTH_MS,
            transient_cutoff: DEFAULT_TRANSIENT_MS,
            extrema_cutoff: DEFAULT_EXTREMA_TRANSIENT_MS,
            trough_window: DEFAULT_TROUGH_WINDOW_MS,
        }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: &str| Err(AnalysisError::InvalidSetting(m.to_string()));
        if !(self.isi_threshold.is_finite() && self.isi_threshold > 0.0) {
            return bad("isi_threshold must be > 0");
        }
        if !(self.binwidth.is_finite() && self.binwidth > 0.0) {
            return bad("binwidth must be > 0");
        }
        if !(self.transient_cutoff.is_finite() && self.transient_cutoff >= 0.0) {
            return bad("transient_cutoff must be >= 0");
        }
        if !(self.extrema_cutoff.is_finite() && self.extrema_cutoff >= 0.0) {
            return bad("extrema_cutoff must be >= 0");
        }
        let (lo, hi) = self.trough_window;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return bad("trough_window must satisfy 0 <= lo < hi");
        }
        Ok(())
    }
}

/// Spike-count label of a burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BurstMode {
    Single,
    Double,
    Triple,
    /// Four or more spikes.
    Multi,
}

impl BurstMode {
    pub const ALL: [BurstMode; 4] = [Self::Single, Self::Double, Self::Triple, Self::Multi];

    pub fn from_count(count: usize) -> Self {
        match count {
            0 | 1 => Self::Single,
            2 => Self::Double,
            3 => Self::Triple,
            _ => Self::Multi,
        }
    }

    /// Numeric label 1..=4.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn index(self) -> usize {
        match self {
            Self::Single => 0,
            Self::Double => 1,
            Self::Triple => 2,
            Self::Multi => 3,
        }
    }
}

impl std::fmt::Display for BurstMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub spike_times: Vec<f64>,
    pub mode: BurstMode,
}

impl Burst {
    fn new(spike_times: Vec<f64>) -> Self {
        let mode = classify_mode(spike_times.len());
        Self { spike_times, mode }
    }

    pub fn spike_count(&self) -> usize {
        self.spike_times.len()
    }

    pub fn start(&self) -> f64 {
        self.spike_times[0]
    }
}

/// Mode label for a burst with `spike_count` spikes.
pub fn classify_mode(spike_count: usize) -> BurstMode {
    debug_assert!(spike_count > 0, "bursts are nonempty");
    BurstMode::from_count(spike_count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSequence {
    pub bursts: Vec<Burst>,
    /// Length of the observation window (ms).
    pub trial_duration: f64,
    pub first_truncated: bool,
    pub last_truncated: bool,
}

impl BurstSequence {
    /// A sequence whose bursts are all treated as complete.
    pub fn complete(bursts: Vec<Burst>, trial_duration: f64) -> Self {
        Self {
            bursts,
            trial_duration,
            first_truncated: false,
            last_truncated: false,
        }
    }

    /// Segments a trial's spikes inside `[cutoff, duration]`.
    ///
    /// The first burst in the window may continue a burst that began before the
    /// cutoff, and the last may be cut off by the end of the trial, so both are
    /// flagged as truncated.
    pub fn from_trial(spikes: &SpikeTrain, cutoff: f64, isi_threshold: f64) -> Self {
        let kept = spikes.remove_transient(cutoff);
        Self {
            bursts: segment_bursts(&kept.spike_times, isi_threshold),
            trial_duration: (spikes.metadata.duration - cutoff).max(0.0),
            first_truncated: true,
            last_truncated: true,
        }
    }

    /// Bursts that are not flagged as truncated by the window edges.
    pub fn complete_bursts(&self) -> &[Burst] {
        let n = self.bursts.len();
        let start = usize::from(self.first_truncated).min(n);
        let end = n.saturating_sub(usize::from(self.last_truncated)).max(start);
        &self.bursts[start..end]
    }

    pub fn modes(&self) -> Vec<BurstMode> {
        self.complete_bursts().iter().map(|b| b.mode).collect()
    }

    pub fn mean_spikes_per_burst(&self) -> Option<f64> {
        let complete = self.complete_bursts();
        if complete.is_empty() {
            return None;
        }
        let total: usize = complete.iter().map(Burst::spike_count).sum();
        Some(total as f64 / complete.len() as f64)
    }
}

/// Greedy left-to-right grouping: a new burst starts at every spike whose gap
/// to the previous spike exceeds `isi_threshold`.
pub fn segment_bursts(spike_times: &[f64], isi_threshold: f64) -> Vec<Burst> {
    let mut bursts = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    for &t in spike_times {
        if let Some(&last) = current.last() {
            if t - last > isi_threshold {
                bursts.push(Burst::new(std::mem::take(&mut current)));
            }
        }
        current.push(t);
    }
    if !current.is_empty() {
        bursts.push(Burst::new(current));
    }
    bursts
}

/// Mode switches between adjacent complete bursts per second of window.
pub fn transition_rate(seq: &BurstSequence) -> f64 {
    if seq.trial_duration <= 0.0 {
        return 0.0;
    }
    let modes = seq.modes();
    let switches = modes.windows(2).filter(|w| w[0] != w[1]).count();
    switches as f64 / (seq.trial_duration / 1000.0)
}

/// Fraction of complete bursts carrying each mode present.
pub fn occurrence_percentages(seq: &BurstSequence) -> BTreeMap<BurstMode, f64> {
    let modes = seq.modes();
    let mut counts: BTreeMap<BurstMode, usize> = BTreeMap::new();
    for m in &modes {
        *counts.entry(*m).or_default() += 1;
    }
    let total = modes.len() as f64;
    counts
        .into_iter()
        .map(|(m, c)| (m, c as f64 / total))
        .collect()
}

/// Dense view of occurrence fractions indexed by `BurstMode::index`.
pub fn occurrence_array(occ: &BTreeMap<BurstMode, f64>) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (m, f) in occ {
        out[m.index()] = *f;
    }
    out
}

/// ISI histogram with bin `k` covering `[k * binwidth, (k + 1) * binwidth)`.
///
/// Counts are kept as integers so histograms from many trials pool exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiHistogram {
    pub binwidth: f64,
    pub counts: Vec<u64>,
    pub total_isi_count: u64,
}

impl IsiHistogram {
    pub fn empty(binwidth: f64) -> Self {
        Self {
            binwidth,
            counts: Vec::new(),
            total_isi_count: 0,
        }
    }

    pub fn from_isis(isis: impl IntoIterator<Item = f64>, binwidth: f64) -> Self {
        let mut h = Self::empty(binwidth);
        for isi in isis {
            h.add(isi);
        }
        h
    }

    pub fn add(&mut self, isi: f64) {
        let bin = (isi / self.binwidth).floor().max(0.0) as usize;
        if bin >= self.counts.len() {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
        self.total_isi_count += 1;
    }

    /// Adds another histogram's counts. Both must share a bin width.
    pub fn merge(&mut self, other: &IsiHistogram) {
        assert_eq!(self.binwidth, other.binwidth, "bin widths differ");
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_isi_count += other.total_isi_count;
    }

    pub fn is_empty(&self) -> bool {
        self.total_isi_count == 0
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    /// Left edge of bin `k` (ms).
    pub fn bin_start(&self, k: usize) -> f64 {
        k as f64 * self.binwidth
    }

    pub fn fraction(&self, k: usize) -> f64 {
        if self.total_isi_count == 0 {
            return 0.0;
        }
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.total_isi_count as f64
    }

    pub fn bin_fractions(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.fraction(k)).collect()
    }

    /// Bins with at least one ISI.
    pub fn occupied_bins(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&k| self.counts[k] > 0).collect()
    }

    /// Largest fraction among bins whose left edge lies in `[lo, hi)`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(usize, f64)> {
        self.bins_in(lo, hi)
            .map(|k| (k, self.fraction(k)))
            .fold(None, |best, (k, f)| match best {
                Some((_, bf)) if bf >= f => best,
                _ => Some((k, f)),
            })
    }

    fn bins_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let first = (lo / self.binwidth).ceil() as usize;
        (first..self.counts.len()).take_while(move |&k| self.bin_start(k) < hi)
    }
}

pub fn isi_histogram(spikes: &SpikeTrain, binwidth: f64) -> IsiHistogram {
    IsiHistogram::from_isis(spikes.isis(), binwidth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trough {
    /// Left edge of the trough bin (ms).
    pub isi_ms: f64,
    pub fraction: f64,
}

/// Minimum-fraction bin among bins whose left edge lies in `[lo, hi)`;
/// the earliest bin wins ties.
pub fn find_isih_trough(h: &IsiHistogram, window: (f64, f64)) -> Result<Trough, AnalysisError> {
    if h.is_empty() {
        return Err(AnalysisError::EmptyHistogram);
    }
    let (lo, hi) = window;
    let support = h.bin_start(h.bin_count());
    if lo >= hi || lo.is_nan() || hi.is_nan() || lo < 0.0 || hi > support {
        return Err(AnalysisError::WindowOutsideSupport { lo, hi, support });
    }
    let mut best: Option<(usize, f64)> = None;
    for k in h.bins_in(lo, hi) {
        let f = h.fraction(k);
        if best.is_none_or(|(_, bf)| f < bf) {
            best = Some((k, f));
        }
    }
    let (k, fraction) = best.ok_or(AnalysisError::WindowOutsideSupport { lo, hi, support })?;
    Ok(Trough {
        isi_ms: h.bin_start(k),
        fraction,
    })
}

/// Gate value at the end of one hyperpolarization cycle and the cycle's lowest potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleExtrema {
    /// Time of the upward `v_h` crossing (ms).
    pub crossing_time: f64,
    pub h_max: f64,
    pub v_min: f64,
}

/// Per-cycle `(h_max, v_min)` with the default crossing hysteresis.
pub fn per_cycle_extrema(traj: &Trajectory, p: &ModelParameters) -> Vec<CycleExtrema> {
    per_cycle_extrema_with(traj, p, DEFAULT_CROSSING_HYSTERESIS_MV)
}

/// Cycles are delimited by upward crossings of `v_h`. The report for a cycle
/// is `h` at the first sample above `v_h` together with the minimum `v` since
/// the previous crossing, so the span before the first crossing is not a cycle.
///
/// After a crossing, the detector re-arms only once `v` has dropped below
/// `v_h - hysteresis`, which keeps noisy chatter around `v_h` from splitting
/// one cycle into several.
pub fn per_cycle_extrema_with(
    traj: &Trajectory,
    p: &ModelParameters,
    hysteresis: f64,
) -> Vec<CycleExtrema> {
    let mut out = Vec::new();
    let mut seen_crossing = false;
    let mut armed = false;
    let mut v_min = f64::INFINITY;
    let mut prev_v: Option<f64> = None;
    for i in 0..traj.len() {
        let v = traj.v[i];
        v_min = v_min.min(v);
        if v < p.v_h - hysteresis {
            armed = true;
        }
        let crossed = matches!(prev_v, Some(pv) if pv <= p.v_h && v > p.v_h);
        if crossed && armed {
            if seen_crossing {
                out.push(CycleExtrema {
                    crossing_time: traj.times[i],
                    h_max: traj.h[i],
                    v_min,
                });
            }
            seen_crossing = true;
            armed = false;
            v_min = f64::INFINITY;
        }
        prev_v = Some(v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseRegime {
    Deterministic,
    Weak,
    Intermediate,
    Strong,
    ExtraStrong,
}

impl std::fmt::Display for NoiseRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Deterministic => "deterministic",
            Self::Weak => "weak",
            Self::Intermediate => "intermediate",
            Self::Strong => "strong",
            Self::ExtraStrong => "extra-strong",
        })
    }
}

/// Regime boundaries 0.14, 1.2 and 5; each boundary value belongs to the lower regime.
pub fn classify_noise_regime(noise: f64) -> Result<NoiseRegime, AnalysisError> {
    if !noise.is_finite() || noise < 0.0 {
        return Err(AnalysisError::InvalidSetting(format!(
            "noise intensity must be finite and >= 0, got {noise}"
        )));
    }
    Ok(match noise {
        0.0 => NoiseRegime::Deterministic,
        d if d <= 0.14 => NoiseRegime::Weak,
        d if d <= 1.2 => NoiseRegime::Intermediate,
        d if d <= 5.0 => NoiseRegime::Strong,
        _ => NoiseRegime::ExtraStrong,
    })
}

/// Time-windowing shared by spike trains and trajectories.
pub trait RemoveTransient {
    fn remove_transient(&self, cutoff: f64) -> Self;
}

impl RemoveTransient for SpikeTrain {
    fn remove_transient(&self, cutoff: f64) -> Self {
        SpikeTrain::remove_transient(self, cutoff)
    }
}

impl RemoveTransient for Trajectory {
    fn remove_transient(&self, cutoff: f64) -> Self {
        Trajectory::remove_transient(self, cutoff)
    }
}

impl RemoveTransient for Vec<f64> {
    fn remove_transient(&self, cutoff: f64) -> Self {
        self.iter().copied().filter(|&t| t >= cutoff).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    /// Switches per second.
    pub transition_rate: f64,
    pub occurrence: BTreeMap<BurstMode, f64>,
    /// `None` when the window holds no complete burst.
    pub mean_spikes_per_burst: Option<f64>,
    pub complete_bursts: usize,
    pub isih: IsiHistogram,
    pub cycle_extrema: Vec<CycleExtrema>,
}

/// Statistics of one trial after removing the transient. Cycle extrema use
/// the separate (longer) extrema cutoff and need a recorded trajectory.
pub fn analyze_trial(
    spikes: &SpikeTrain,
    trajectory: Option<&Trajectory>,
    settings: &AnalysisSettings,
    p: &ModelParameters,
) -> TrialStatistics {
    let seq = BurstSequence::from_trial(spikes, settings.transient_cutoff, settings.isi_threshold);
    let kept = spikes.remove_transient(settings.transient_cutoff);
    TrialStatistics {
        transition_rate: transition_rate(&seq),
        occurrence: occurrence_percentages(&seq),
        mean_spikes_per_burst: seq.mean_spikes_per_burst(),
        complete_bursts: seq.complete_bursts().len(),
        isih: isi_histogram(&kept, settings.binwidth),
        cycle_extrema: trajectory
            .map(|tr| per_cycle_extrema(&tr.remove_transient(settings.extrema_cutoff), p))
            .unwrap_or_default(),
    }
}
