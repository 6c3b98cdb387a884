use std::fmt;
use std::fs;
use std::path::Path;

use mmbo_core::analysis::{
    analyze_trial, classify_noise_regime, find_isih_trough, BurstSequence, NoiseRegime,
};
use mmbo_core::experiments::{run_ensemble, run_grid};
use mmbo_core::io::{self, fmt_f64, Manifest, RunConfig};
use mmbo_core::{simulate, ConfigError, EnsembleSpec, Execution, GridSpec};

use crate::{Cli, Command, CommonArgs};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::SweepNoise => "sweep-noise",
        Command::SweepGrid { .. } => "sweep-grid",
        Command::Isih => "isih",
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &cli.command, &cli.common)?;
    config.validate()?;

    let name = command_name(&cli.command);
    let exec = match cli.common.threads {
        Some(n) => Execution::Threads(n),
        None => Execution::Parallel,
    };
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir)
        .map_err(|e| runtime(format!("cannot create output directory {}: {e}", dir.display())))?;

    match &cli.command {
        Command::Simulate { .. } => cmd_simulate(&config, &dir)?,
        Command::SweepNoise => cmd_sweep_noise(&config, &dir, exec)?,
        Command::SweepGrid { .. } => cmd_sweep_grid(&config, &dir, exec)?,
        Command::Isih => cmd_isih(&config, &dir, exec)?,
    }
    io::write_manifest(&dir, &Manifest::new(name, &config))
        .map_err(|e| runtime(format!("cannot write manifest: {e}")))
}

fn single_noise(noise: &[f64]) -> Result<Option<f64>, CliError> {
    match noise {
        [] => Ok(None),
        [d] => Ok(Some(*d)),
        _ => Err(CliError::Config("this command takes a single --noise value".into())),
    }
}

/// Flags win over config file values. Only the section used by the command is touched.
fn apply_overrides(config: &mut RunConfig, command: &Command, a: &CommonArgs) -> Result<(), CliError> {
    if let Some(eq) = a.h_equation {
        config.model.h_equation = eq;
    }
    if let Some(x) = a.isi_threshold_ms {
        config.analysis.isi_threshold = x;
    }
    if let Some(x) = a.binwidth_ms {
        config.analysis.binwidth = x;
    }
    if let Some(x) = a.transient_ms {
        config.analysis.transient_cutoff = x;
    }
    if let Some(dir) = &a.out {
        config.output.dir = dir.clone();
    }
    if let Some(x) = a.v0 {
        config.initial.v0 = x;
    }
    if let Some(x) = a.h0 {
        config.initial.h0 = x;
    }

    match command {
        Command::Simulate { trajectory, record_stride } => {
            let sim = &mut config.simulation;
            if let Some(d) = single_noise(&a.noise)? {
                sim.noise = d;
            }
            if let Some(s) = a.seed {
                sim.seed = s;
            }
            if let Some(x) = a.duration_ms {
                sim.duration = x;
            }
            if let Some(x) = a.dt_ms {
                sim.dt = x;
            }
            if *trajectory {
                sim.record_trajectory = true;
            }
            if let Some(s) = record_stride {
                sim.record_stride = *s;
            }
            config.ensemble = None;
            config.grid = None;
        }
        Command::SweepNoise | Command::Isih => {
            let initial = config.initial;
            let spec = config.ensemble.get_or_insert_with(|| EnsembleSpec {
                v0: initial.v0,
                h0: initial.h0,
                ..Default::default()
            });
            if let Some(x) = a.v0 {
                spec.v0 = x;
            }
            if let Some(x) = a.h0 {
                spec.h0 = x;
            }
            if !a.noise.is_empty() {
                spec.noise_values = a.noise.clone();
            }
            if let Some(s) = a.seed {
                spec.base_seed = s;
            }
            if let Some(x) = a.duration_ms {
                spec.trial_duration = x;
            }
            if let Some(x) = a.dt_ms {
                spec.dt = x;
            }
            if let Some(n) = a.trials {
                spec.n_trials = n;
            }
            config.grid = None;
        }
        Command::SweepGrid { coarse, v0_step, h0_step } => {
            let spec = config.grid.get_or_insert_with(GridSpec::default);
            if *coarse {
                let preset = GridSpec::coarse();
                spec.v0_resolution = preset.v0_resolution;
                spec.h0_resolution = preset.h0_resolution;
            }
            if let Some(x) = v0_step {
                spec.v0_resolution = *x;
            }
            if let Some(x) = h0_step {
                spec.h0_resolution = *x;
            }
            if let Some(d) = single_noise(&a.noise)? {
                spec.noise = d;
            }
            if let Some(s) = a.seed {
                spec.base_seed = s;
            }
            if let Some(x) = a.duration_ms {
                spec.duration = x;
            }
            if let Some(x) = a.dt_ms {
                spec.dt = x;
            }
            config.ensemble = None;
        }
    }
    Ok(())
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    runtime(format!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let ic = config.initial;
    let out = simulate(ic.v0, ic.h0, &config.simulation, &config.model).map_err(runtime)?;
    let analysis = &config.analysis;
    let seq = BurstSequence::from_trial(&out.spikes, analysis.transient_cutoff, analysis.isi_threshold);
    let stats = analyze_trial(&out.spikes, out.trajectory.as_ref(), analysis, &config.model);

    let path = dir.join("spikes.csv");
    io::write_spike_times(&path, &io::header("spike times", "simulate", config), &out.spikes)
        .map_err(|e| write_err(&path, e))?;
    let path = dir.join("bursts.csv");
    io::write_bursts(&path, &io::header("bursts after transient", "simulate", config), &seq)
        .map_err(|e| write_err(&path, e))?;
    if let Some(tr) = &out.trajectory {
        let path = dir.join("trajectory.csv");
        io::write_trajectory(&path, &io::header("trajectory", "simulate", config), tr)
            .map_err(|e| write_err(&path, e))?;
    }

    let modes: Vec<String> = seq.modes().iter().map(|m| m.to_string()).collect();
    let regime = classify_noise_regime(config.simulation.noise).map_err(runtime)?;
    println!("initial condition: v0 = {} mV, h0 = {}", ic.v0, ic.h0);
    println!(
        "noise: D = {} ({regime}), seed = {}",
        config.simulation.noise, config.simulation.seed
    );
    println!("spikes: {}", out.spikes.len());
    println!(
        "complete bursts after {} ms: {}",
        analysis.transient_cutoff,
        modes.len()
    );
    println!("mode sequence: {}", modes.join(" "));
    println!("transition rate: {} /s", fmt_f64(stats.transition_rate));
    let occ: Vec<String> = stats
        .occurrence
        .iter()
        .map(|(m, f)| format!("mode{m}={}", fmt_f64(*f)))
        .collect();
    println!("occurrence: {}", occ.join(" "));
    if let Some(spb) = stats.mean_spikes_per_burst {
        println!("mean spikes per burst: {}", fmt_f64(spb));
    }
    Ok(())
}

fn ensemble_of(config: &RunConfig) -> &EnsembleSpec {
    config
        .ensemble
        .as_ref()
        .expect("overrides always install an ensemble section")
}

fn isih_path(dir: &Path, noise: f64) -> std::path::PathBuf {
    dir.join(format!("isih_D{}.csv", fmt_f64(noise)))
}

fn cmd_sweep_noise(config: &RunConfig, dir: &Path, exec: Execution) -> Result<(), CliError> {
    let spec = ensemble_of(config);
    let curve = run_ensemble(spec, &config.analysis, &config.model, exec).map_err(runtime)?;
    let path = dir.join("noise_sweep.csv");
    io::write_noise_sweep(&path, &io::header("noise sweep", "sweep-noise", config), &curve)
        .map_err(|e| write_err(&path, e))?;
    for pt in &curve.points {
        let path = isih_path(dir, pt.noise);
        let kind = format!("pooled ISIH at D = {}", fmt_f64(pt.noise));
        io::write_isih(&path, &io::header(&kind, "sweep-noise", config), &pt.isih)
            .map_err(|e| write_err(&path, e))?;
    }
    println!("D,transition_rate_mean,occ_mode1,occ_mode2,occ_mode3,occ_mode4,n_trials");
    for pt in &curve.points {
        let o = pt.mean_occurrence;
        println!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            fmt_f64(pt.noise),
            pt.mean_transition_rate,
            o[0],
            o[1],
            o[2],
            o[3],
            pt.n_trials
        );
    }
    Ok(())
}

fn cmd_sweep_grid(config: &RunConfig, dir: &Path, exec: Execution) -> Result<(), CliError> {
    let spec = config.grid.as_ref().expect("overrides always install a grid section");
    let map = run_grid(spec, &config.analysis, &config.model, exec).map_err(runtime)?;
    let path = dir.join("grid.csv");
    io::write_grid(&path, &io::header("spikes-per-burst grid", "sweep-grid", config), &map)
        .map_err(|e| write_err(&path, e))?;
    let populated: Vec<f64> = map.populated().collect();
    let empty = map.cells.len() - populated.len();
    let mean = populated.iter().sum::<f64>() / populated.len().max(1) as f64;
    println!(
        "grid: {} x {} cells, {} without complete bursts, mean spikes per burst {:.4}",
        map.v0_values.len(),
        map.h0_values.len(),
        empty,
        mean
    );
    Ok(())
}

fn cmd_isih(config: &RunConfig, dir: &Path, exec: Execution) -> Result<(), CliError> {
    let spec = ensemble_of(config);
    let curve = run_ensemble(spec, &config.analysis, &config.model, exec).map_err(runtime)?;
    let window = config.analysis.trough_window;
    let mut rows = Vec::new();
    for pt in &curve.points {
        let path = isih_path(dir, pt.noise);
        let kind = format!("pooled ISIH at D = {}", fmt_f64(pt.noise));
        io::write_isih(&path, &io::header(&kind, "isih", config), &pt.isih)
            .map_err(|e| write_err(&path, e))?;
        let regime = classify_noise_regime(pt.noise).unwrap_or(NoiseRegime::Deterministic);
        let (at, frac) = match find_isih_trough(&pt.isih, window) {
            Ok(t) => (fmt_f64(t.isi_ms), fmt_f64(t.fraction)),
            Err(_) => ("NA".to_string(), "NA".to_string()),
        };
        rows.push(format!("{},{regime},{},{at},{frac}", fmt_f64(pt.noise), pt.isih.total_isi_count));
    }
    let path = dir.join("isih_troughs.csv");
    let mut text = io::header("ISIH troughs", "isih", config);
    text.push_str("D,regime,total_isi_count,trough_isi_ms,trough_fraction\n");
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| write_err(&path, e))?;
    println!("D,regime,total_isi_count,trough_isi_ms,trough_fraction");
    for r in rows {
        println!("{r}");
    }
    Ok(())
}
