//! Run configuration and tabular output.
//!
//! Configs are TOML (or JSON) documents with one section per concern. Every
//! table written here is comma-separated and starts with `#` comment lines that
//! carry the toolkit version, units and the full effective configuration, so
//! each file is self-describing. Floats are written in Rust's shortest
//! round-trip form, which reproduces the stored `f64` exactly.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{AnalysisSettings, BurstSequence, IsiHistogram};
use crate::error::ConfigError;
use crate::experiments::{AggregateCurve, EnsembleSpec, GridMap, GridSpec};
use crate::integrator::{SimulationSettings, SpikeTrain, Trajectory};
use crate::model::ModelParameters;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const UNITS_LINE: &str =
    "units: time ms, potential mV, h dimensionless, D in membrane-current units (uA), rates per second";
/// Written in place of a value for grid cells without complete bursts.
pub const NO_BURST_MARKER: &str = "NA";

/// Serde adapter for `u64` seeds. TOML integers are signed 64-bit, so seeds
/// above `i64::MAX` are written as decimal strings; both forms are accepted.
pub mod seed_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *seed <= i64::MAX as u64 {
            s.serialize_i64(*seed as i64)
        } else {
            s.serialize_str(&seed.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Str(s) => s.trim().parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialCondition {
    pub v0: f64,
    pub h0: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self { v0: -45.0, h0: 0.045 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write `manifest.json` next to `manifest.toml`.
    pub json_manifest: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            json_manifest: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParameters,
    pub initial: InitialCondition,
    pub simulation: SimulationSettings,
    pub analysis: AnalysisSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes to TOML")
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        // a JSON manifest wraps the config
        let inner = match value.get("config") {
            Some(c) if value.get("toolkit_version").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Checks the sections shared by every command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        let ic = self.initial;
        if !ic.v0.is_finite() || !ic.h0.is_finite() {
            return Err(ConfigError::Invalid("initial v0/h0 must be finite".into()));
        }
        if !(0.0..=1.0).contains(&ic.h0) {
            return Err(ConfigError::Invalid(format!(
                "initial h0 = {} lies outside [0, 1]",
                ic.h0
            )));
        }
        self.simulation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.analysis
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(e) = &self.ensemble {
            e.validate(&self.analysis)?;
        }
        if let Some(g) = &self.grid {
            g.validate(&self.analysis)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
        }
    }

    /// TOML body is the bare config, so the file can be passed back as `--config`.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# mmbo {} run manifest", self.toolkit_version);
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# {UNITS_LINE}");
        out.push_str(&self.config.to_toml_string());
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest always serializes to JSON")
    }
}

/// Shortest string that parses back to exactly `x`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

/// Comment block written at the top of every output table.
pub fn header(kind: &str, command: &str, config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mmbo {TOOLKIT_VERSION} {kind}");
    let _ = writeln!(out, "# command: {command}");
    let _ = writeln!(out, "# {UNITS_LINE}");
    let _ = writeln!(out, "# effective configuration:");
    for line in config.to_toml_string().lines() {
        let _ = writeln!(out, "#   {line}");
    }
    out
}

fn write_table<I>(path: &Path, header: &str, columns: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(header.as_bytes())?;
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

pub fn write_spike_times(path: &Path, header: &str, spikes: &SpikeTrain) -> io::Result<()> {
    let rows = spikes.spike_times.iter().map(|&t| vec![fmt_f64(t)]);
    write_table(path, header, &["spike_time_ms"], rows)
}

pub fn write_trajectory(path: &Path, header: &str, tr: &Trajectory) -> io::Result<()> {
    let rows = (0..tr.len()).map(|i| vec![fmt_f64(tr.times[i]), fmt_f64(tr.v[i]), fmt_f64(tr.h[i])]);
    write_table(path, header, &["t_ms", "v_mV", "h"], rows)
}

pub fn write_bursts(path: &Path, header: &str, seq: &BurstSequence) -> io::Result<()> {
    let n = seq.bursts.len();
    let rows = seq.bursts.iter().enumerate().map(|(i, b)| {
        let complete = !((i == 0 && seq.first_truncated) || (i + 1 == n && seq.last_truncated));
        vec![
            i.to_string(),
            fmt_f64(b.start()),
            b.spike_count().to_string(),
            b.mode.label().to_string(),
            complete.to_string(),
        ]
    });
    write_table(path, header, &["burst", "start_ms", "spikes", "mode", "complete"], rows)
}

pub fn write_noise_sweep(path: &Path, header: &str, curve: &AggregateCurve) -> io::Result<()> {
    let rows = curve.points.iter().map(|pt| {
        let mut row = vec![fmt_f64(pt.noise), fmt_f64(pt.mean_transition_rate)];
        row.extend(pt.mean_occurrence.iter().map(|&f| fmt_f64(f)));
        row.push(pt.n_trials.to_string());
        row.push(pt.trials_with_bursts.to_string());
        row
    });
    write_table(
        path,
        header,
        &[
            "D",
            "transition_rate_mean",
            "occ_mode1",
            "occ_mode2",
            "occ_mode3",
            "occ_mode4",
            "n_trials",
            "n_trials_with_bursts",
        ],
        rows,
    )
}

pub fn write_isih(path: &Path, header: &str, h: &IsiHistogram) -> io::Result<()> {
    let rows = (0..h.bin_count()).map(|k| vec![fmt_f64(h.bin_start(k)), fmt_f64(h.fraction(k))]);
    write_table(path, header, &["isi_bin_ms", "fraction"], rows)
}

pub fn write_grid(path: &Path, header: &str, map: &GridMap) -> io::Result<()> {
    let rows = map.iter().map(|(v0, h0, c)| {
        vec![
            fmt_f64(v0),
            fmt_f64(h0),
            c.map_or_else(|| NO_BURST_MARKER.to_string(), fmt_f64),
        ]
    });
    write_table(path, header, &["v0_mV", "h0", "mean_spikes_per_burst"], rows)
}

/// Reads the data rows of a table written by this module, skipping the
/// comment header and the column line.
pub fn read_table(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let columns = lines
        .next()
        .map(|l| l.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((columns, rows))
}

/// Writes `manifest.toml` (and `manifest.json` when enabled) into `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> io::Result<()> {
    fs::write(dir.join("manifest.toml"), manifest.to_toml_string())?;
    if manifest.config.output.json_manifest {
        fs::write(dir.join("manifest.json"), manifest.to_json_string())?;
    }
    Ok(())
}
