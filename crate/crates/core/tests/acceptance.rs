//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any criterion fails.
//!
//! Built with `harness = false` so the report is always printed:
//! `cargo test -p mmbo-core --test acceptance`.

use std::time::Instant;

use mmbo_core::analysis::{
    find_isih_trough, isi_histogram, occurrence_percentages, per_cycle_extrema, segment_bursts,
    BurstSequence, IsiHistogram,
};
use mmbo_core::experiments::{run_ensemble, run_grid, AggregatePoint};
use mmbo_core::integrator::em_step;
use mmbo_core::rng::NoiseStream;
use mmbo_core::*;

const BASE_SEED: u64 = 20_211_001;
const MODE2_IC: (f64, f64) = (-45.0, 0.045);
const MODE3_IC: (f64, f64) = (-45.0, 0.05);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn deterministic(ic: (f64, f64), duration: f64, record: bool) -> SimulationOutput {
    let settings = SimulationSettings {
        duration,
        record_trajectory: record,
        ..Default::default()
    };
    simulate(ic.0, ic.1, &settings, &ModelParameters::default()).expect("valid run")
}

fn steady_counts(out: &SimulationOutput, cutoff: f64) -> Vec<usize> {
    BurstSequence::from_trial(&out.spikes, cutoff, 80.0)
        .complete_bursts()
        .iter()
        .map(|b| b.spike_count())
        .collect()
}

fn c1_birhythmicity() -> Outcome {
    let start = Instant::now();
    let two = steady_counts(&deterministic(MODE2_IC, 3000.0, false), 400.0);
    let three = steady_counts(&deterministic(MODE3_IC, 3000.0, false), 400.0);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = !two.is_empty()
        && !three.is_empty()
        && two.iter().all(|&c| c == 2)
        && three.iter().all(|&c| c == 3)
        && elapsed < 1.0;
    outcome(
        pass,
        format!("(-45,0.045) counts {two:?}; (-45,0.05) counts {three:?}; {elapsed:.3} s"),
    )
}

/// One 30 s deterministic trial; every trial of a D = 0 ensemble is identical.
fn steady_isih(ic: (f64, f64)) -> IsiHistogram {
    let out = deterministic(ic, 30_000.0, false);
    isi_histogram(&out.spikes.remove_transient(400.0), 1.0)
}

fn bins_match(h: &IsiHistogram, expected: &[(f64, f64)], fraction: f64) -> (bool, String) {
    let occupied = h.occupied_bins();
    let found: Vec<(f64, f64)> = occupied.iter().map(|&k| (h.bin_start(k), h.fraction(k))).collect();
    let ok = occupied.len() == expected.len()
        && found
            .iter()
            .zip(expected)
            .all(|(&(at, f), &(centre, tol))| (at - centre).abs() <= tol && (f - fraction).abs() <= 0.01);
    (ok, format!("{found:?}"))
}

fn c2_isih_peaks() -> Outcome {
    let (ok2, d2) = bins_match(&steady_isih(MODE2_IC), &[(11.0, 2.0), (189.0, 3.0)], 0.5);
    let (ok3, d3) = bins_match(
        &steady_isih(MODE3_IC),
        &[(10.0, 2.0), (21.0, 3.0), (169.0, 3.0)],
        1.0 / 3.0,
    );
    outcome(ok2 && ok3, format!("mode 2 bins {d2}; mode 3 bins {d3}"))
}

fn c3_extrema() -> Outcome {
    let p = ModelParameters::default();
    let mut pass = true;
    let mut detail = Vec::new();
    for (ic, h_ref, v_ref) in [(MODE2_IC, 0.42, -87.0), (MODE3_IC, 0.44, -89.0)] {
        let out = deterministic(ic, 3000.0, true);
        let tr = out.trajectory.unwrap().remove_transient(400.0);
        let ex = per_cycle_extrema(&tr, &p);
        let ok = !ex.is_empty()
            && ex
                .iter()
                .all(|e| (e.h_max - h_ref).abs() <= 0.02 && (e.v_min - v_ref).abs() <= 1.5);
        pass &= ok;
        let h: Vec<String> = ex.iter().map(|e| format!("{:.4}", e.h_max)).collect();
        let v: Vec<String> = ex.iter().map(|e| format!("{:.2}", e.v_min)).collect();
        detail.push(format!("h0={} h_max [{}] v_min [{}]", ic.1, h.join(" "), v.join(" ")));
    }
    outcome(pass, detail.join("; "))
}

fn c4_basin_map() -> Outcome {
    let spec = GridSpec {
        v0_resolution: 2.0,
        h0_resolution: 0.02,
        duration: 10_000.0,
        noise: 0.0,
        base_seed: BASE_SEED,
        ..Default::default()
    };
    let map = run_grid(&spec, &AnalysisSettings::default(), &ModelParameters::default(), Execution::Parallel)
        .expect("grid runs");
    let (mut twos, mut threes, mut other, mut empty) = (0, 0, 0, 0);
    for c in &map.cells {
        match c {
            Some(x) if *x == 2.0 => twos += 1,
            Some(x) if *x == 3.0 => threes += 1,
            Some(_) => other += 1,
            None => empty += 1,
        }
    }
    let populated = twos + threes;
    let pass = other == 0 && twos > 0 && threes > 0 && 2 * twos > populated;
    outcome(
        pass,
        format!(
            "{} cells: mode-2 {twos}, mode-3 {threes}, other {other}, no-burst {empty}",
            map.cells.len()
        ),
    )
}

fn ensemble(ic: (f64, f64), noise: &[f64], n_trials: usize) -> Vec<AggregatePoint> {
    let spec = EnsembleSpec {
        v0: ic.0,
        h0: ic.1,
        noise_values: noise.to_vec(),
        n_trials,
        trial_duration: 10_000.0,
        base_seed: BASE_SEED,
        ..Default::default()
    };
    run_ensemble(&spec, &AnalysisSettings::default(), &ModelParameters::default(), Execution::Parallel)
        .expect("ensemble runs")
        .points
}

struct NoiseLadder {
    noise: Vec<f64>,
    mode2: Vec<AggregatePoint>,
    mode3: Vec<AggregatePoint>,
}

impl NoiseLadder {
    fn run() -> Self {
        let noise = vec![0.06, 0.3, 0.5, 1.0, 2.0];
        Self {
            mode2: ensemble(MODE2_IC, &noise, 50),
            mode3: ensemble(MODE3_IC, &noise, 50),
            noise,
        }
    }

    fn at(&self, d: f64) -> (&AggregatePoint, &AggregatePoint) {
        let i = self.noise.iter().position(|&x| x == d).expect("D on ladder");
        (&self.mode2[i], &self.mode3[i])
    }
}

fn fmt_occ(o: &[f64; 4]) -> String {
    format!("[{:.3} {:.3} {:.3} {:.3}]", o[0], o[1], o[2], o[3])
}

fn c5_monotone_rate(l: &NoiseLadder) -> Outcome {
    let rates = |pts: &[AggregatePoint]| pts.iter().map(|p| p.mean_transition_rate).collect::<Vec<_>>();
    let (r2, r3) = (rates(&l.mode2), rates(&l.mode3));
    let increasing = |r: &[f64]| r.windows(2).all(|w| w[1] > w[0]);
    let mut agree = true;
    for (i, &d) in l.noise.iter().enumerate() {
        if d >= 0.3 {
            let mean = 0.5 * (r2[i] + r3[i]);
            agree &= (r2[i] - r3[i]).abs() <= 0.10 * mean;
        }
    }
    let fmt = |r: &[f64]| r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        increasing(&r2) && increasing(&r3) && agree,
        format!("D {:?}: rates (-45,0.045) [{}], (-45,0.05) [{}]", l.noise, fmt(&r2), fmt(&r3)),
    )
}

fn c6_weak_asymmetry(l: &NoiseLadder) -> Outcome {
    let (a, b) = l.at(0.06);
    let occ2 = a.mean_occurrence[1];
    let occ3 = b.mean_occurrence[2];
    outcome(
        occ2 >= 0.9 && occ3 <= 0.8,
        format!("D=0.06: mode-2 occurrence from (-45,0.045) {occ2:.3}; mode-3 occurrence from (-45,0.05) {occ3:.3}"),
    )
}

fn c7_ic_independence(l: &NoiseLadder) -> Outcome {
    let (a, b) = l.at(0.5);
    let worst = (0..4)
        .map(|m| (a.mean_occurrence[m] - b.mean_occurrence[m]).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.05,
        format!(
            "D=0.5 occurrence {} vs {}; max diff {worst:.4}",
            fmt_occ(&a.mean_occurrence),
            fmt_occ(&b.mean_occurrence)
        ),
    )
}

fn c8_strong_modes(l: &NoiseLadder) -> Outcome {
    let (s2, s3) = l.at(2.0);
    let (i2, i3) = l.at(0.5);
    let strong = [s2, s3].iter().all(|p| p.mean_occurrence[0] > 0.0 && p.mean_occurrence[3] > 0.0);
    let inter = [i2, i3].iter().all(|p| p.mean_occurrence[0] < 0.02 && p.mean_occurrence[3] < 0.02);
    outcome(
        strong && inter,
        format!(
            "D=2 {} / {}; D=0.5 {} / {}",
            fmt_occ(&s2.mean_occurrence),
            fmt_occ(&s3.mean_occurrence),
            fmt_occ(&i2.mean_occurrence),
            fmt_occ(&i3.mean_occurrence)
        ),
    )
}

fn c9_trough() -> Outcome {
    let analysis = AnalysisSettings::default();
    let pts = ensemble(MODE2_IC, &[3.0, 7.0, 10.0], 20);
    let window = analysis.trough_window;
    let trough = |p: &AggregatePoint| find_isih_trough(&p.isih, window);
    let second_peak = |p: &AggregatePoint| {
        p.isih
            .peak_in(analysis.isi_threshold, f64::INFINITY)
            .map_or(0.0, |(_, f)| f)
    };
    let (t3, t7) = match (trough(&pts[0]), trough(&pts[1])) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return outcome(false, format!("trough search failed: {a:?} {b:?}")),
    };
    let (p3, p10) = (second_peak(&pts[0]), second_peak(&pts[2]));
    outcome(
        t3.fraction == 0.0 && t7.fraction > 0.0 && p10 < 0.5 * p3,
        format!(
            "trough D=3 {:.5} at {} ms; D=7 {:.5} at {} ms; second peak D=3 {p3:.5}, D=10 {p10:.5}",
            t3.fraction, t3.isi_ms, t7.fraction, t7.isi_ms
        ),
    )
}

/// Forward Euler on the raw equations, written independently of the model module.
fn reference_euler(v0: f64, h0: f64, steps: usize) -> (Vec<f64>, f64, f64) {
    let (c, v_h, v_theta, v_reset, v_l, v_t) = (2.0, -60.0, -35.0, -50.0, -65.0, 120.0);
    let (g_l, g_t, i0, i1, f_ms, tau_p, tau_m) = (0.035, 0.07, -0.05, 1.6, 5.0 / 1000.0, 200.0, 20.0);
    let dt = 0.02;
    let (mut v, mut h) = (v0, h0);
    let mut spikes = Vec::new();
    for k in 0..steps {
        let t = k as f64 * dt;
        let i_t = if v > v_h { g_t * h * (v - v_t) } else { 0.0 };
        let dv = (i0 + i1 * (2.0 * std::f64::consts::PI * f_ms * t).cos() - g_l * (v - v_l) - i_t) / c;
        let dh = if v <= v_h { (1.0 - h) / tau_p } else { -h / tau_m };
        v += dt * dv;
        h = (h + dt * dh).clamp(0.0, 1.0);
        if v >= v_theta {
            spikes.push((k + 1) as f64 * dt);
            v = v_reset;
        }
    }
    (spikes, v, h)
}

fn c10_properties() -> Outcome {
    let p = ModelParameters::default();
    let mut failures = Vec::new();

    // occurrence and ISIH normalisation on noisy trials
    for (i, d) in [0.06, 0.5, 2.0, 7.0].into_iter().enumerate() {
        let s = SimulationSettings {
            duration: 10_000.0,
            noise: d,
            seed: rng::derive_trial_seed(BASE_SEED, &[99, i as u64]),
            record_trajectory: true,
            record_stride: 1,
            ..Default::default()
        };
        let out = simulate(MODE3_IC.0, MODE3_IC.1, &s, &p).unwrap();
        let seq = BurstSequence::from_trial(&out.spikes, 100.0, 80.0);
        let occ: f64 = occurrence_percentages(&seq).values().sum();
        if (occ - 1.0).abs() > 1e-12 {
            failures.push(format!("occurrence sum {occ} at D={d}"));
        }
        let h = isi_histogram(&out.spikes, 1.0);
        let total: f64 = h.bin_fractions().iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            failures.push(format!("ISIH sum {total} at D={d}"));
        }
        let tr = out.trajectory.unwrap();
        if !tr.h.iter().all(|h| (0.0..=1.0).contains(h)) {
            failures.push(format!("h outside [0,1] at D={d}"));
        }
    }

    // D = 0 equals the independent forward-Euler reference bitwise
    for ic in [MODE2_IC, MODE3_IC, (-80.0, 0.9)] {
        let steps = 150_000;
        let (ref_spikes, ref_v, ref_h) = reference_euler(ic.0, ic.1, steps);
        let out = simulate(
            ic.0,
            ic.1,
            &SimulationSettings { duration: 3000.0, record_trajectory: true, record_stride: steps, ..Default::default() },
            &p,
        )
        .unwrap();
        let tr = out.trajectory.unwrap();
        let last = tr.len() - 1;
        if out.spikes.spike_times != ref_spikes
            || tr.v[last].to_bits() != ref_v.to_bits()
            || tr.h[last].to_bits() != ref_h.to_bits()
        {
            failures.push(format!("D=0 run from {ic:?} differs from reference Euler"));
        }
    }

    // serial and parallel schedules agree bitwise
    let spec = EnsembleSpec {
        v0: MODE3_IC.0,
        h0: MODE3_IC.1,
        noise_values: vec![0.1, 1.0],
        n_trials: 12,
        trial_duration: 2000.0,
        base_seed: BASE_SEED,
        ..Default::default()
    };
    let a = AnalysisSettings::default();
    let serial = run_ensemble(&spec, &a, &p, Execution::Serial).unwrap();
    let parallel = run_ensemble(&spec, &a, &p, Execution::Threads(4)).unwrap();
    if serde_json::to_string(&serial).unwrap() != serde_json::to_string(&parallel).unwrap() {
        failures.push("serial and parallel ensembles differ".into());
    }
    let grid = GridSpec {
        v0_range: (-60.0, -40.0),
        h0_range: (0.0, 0.2),
        v0_resolution: 5.0,
        h0_resolution: 0.05,
        noise: 0.3,
        duration: 2000.0,
        base_seed: BASE_SEED,
        ..Default::default()
    };
    let gs = run_grid(&grid, &a, &p, Execution::Serial).unwrap();
    let gp = run_grid(&grid, &a, &p, Execution::Threads(3)).unwrap();
    if gs.cells.iter().map(|c| c.map(f64::to_bits)).ne(gp.cells.iter().map(|c| c.map(f64::to_bits))) {
        failures.push("serial and parallel grids differ".into());
    }

    // segmentation partitions randomized spike trains
    let mut stream = NoiseStream::new(BASE_SEED);
    for _ in 0..200 {
        let mut t = 0.0;
        let spikes: Vec<f64> = (0..300)
            .map(|_| {
                t += 0.02 + (stream.draw_gaussian() * 60.0).abs();
                t
            })
            .collect();
        let bursts = segment_bursts(&spikes, 80.0);
        let flat: Vec<f64> = bursts.iter().flat_map(|b| b.spike_times.iter().copied()).collect();
        if flat != spikes {
            failures.push("segmentation lost or reordered spikes".into());
            break;
        }
    }

    // Euler–Maruyama increment variance
    let quiet = ModelParameters { i_bias: 0.0, i_forcing: 0.0, g_leak: 0.0, g_ca: 0.0, ..p };
    let s = SimulationSettings { noise: 2.0, ..Default::default() };
    let mut stream = NoiseStream::new(BASE_SEED ^ 1);
    let state = NeuronState::new(-70.0, 0.3);
    let n = 1_000_000;
    let incs: Vec<f64> = (0..n)
        .map(|_| em_step(state, 0.0, &s, &quiet, stream.draw_gaussian()).0.v - state.v)
        .collect();
    let mean = incs.iter().sum::<f64>() / n as f64;
    let var = incs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let expected = (s.noise / quiet.capacitance).powi(2) * s.dt;
    if (var / expected - 1.0).abs() > 0.01 {
        failures.push(format!("increment variance {var} vs {expected}"));
    }

    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            format!("all properties hold (increment variance {var:.6} vs {expected:.6})")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut run = |name: &'static str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "[{}] {name} ({:.1} s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        results.push((name, o));
    };

    run("C1 deterministic birhythmicity", &c1_birhythmicity);
    run("C2 deterministic ISIH peaks", &c2_isih_peaks);
    run("C3 per-cycle extrema", &c3_extrema);
    run("C4 deterministic basin map", &c4_basin_map);
    let ladder = NoiseLadder::run();
    run("C5 transition-rate monotonicity", &|| c5_monotone_rate(&ladder));
    run("C6 weak-noise asymmetry", &|| c6_weak_asymmetry(&ladder));
    run("C7 initial-condition independence", &|| c7_ic_independence(&ladder));
    run("C8 strong noise evokes modes 1 and 4", &|| c8_strong_modes(&ladder));
    run("C9 extra-strong trough signature", &c9_trough);
    run("C10 property suite", &c10_properties);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
