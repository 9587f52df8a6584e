//! The `simulate`, `track`, `evaluate` and `mc` subcommands.

use std::path::{Path, PathBuf};

use flowtrack_core::sim::TruthRow;
use log::info;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{self, Variant, VariantRun};
use crate::io;

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub modes: Vec<Mode>,
    pub particles: Option<usize>,
    pub runs: Option<usize>,
    pub jobs: Option<usize>,
}

/// Loads the config file (defaults when absent), applies the overrides and
/// validates the result. The first mode, if any, becomes the tracker mode.
pub fn resolve_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(&mode) = ov.modes.first() {
        cfg.tracker.mode = mode;
    }
    if let Some(n) = ov.particles {
        cfg.tracker.particles = n;
    }
    if let Some(n) = ov.runs {
        cfg.runs = n;
    }
    if let Some(n) = ov.jobs {
        cfg.jobs = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    io::write_text(&out.join("config.toml"), &cfg.to_toml())
}

/// Writes `truth.csv`, `measurements.csv` and `config.toml` to `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scn = cfg.scenario()?;
    let sim = harness::simulate_run(&scn, cfg.seed)?;
    io::write_truth(&out.join("truth.csv"), &sim.truth)?;
    io::write_measurements(
        &out.join("measurements.csv"),
        &sim.frames,
        cfg.measurement_dim(),
    )?;
    write_config(out, cfg)?;
    info!(
        "simulated {} steps, {} truth rows",
        scn.n_steps,
        sim.truth.len()
    );
    Ok(())
}

/// Tracks the frames of `measurements` and writes `estimates.csv` and
/// `config.toml` to `out`.
pub fn cmd_track(cfg: &RunConfig, measurements: &Path, out: &Path) -> Result<PathBuf> {
    let scn = cfg.scenario()?;
    let frames = io::read_measurements(measurements, cfg.measurement_dim(), scn.n_steps)?;
    let tcfg = cfg.tracker_config(cfg.tracker.mode, cfg.tracker.particles)?;
    let mut tracker = harness::new_tracker(&scn, tcfg, cfg.seed)?;
    let result = harness::track_frames(&mut tracker, &frames, |_, _| {})?;
    let path = out.join("estimates.csv");
    io::write_estimates(&path, &result.estimates)?;
    write_config(out, cfg)?;
    let total: f64 = result.step_seconds.iter().sum();
    info!(
        "tracked {} frames in {:.3} s ({} mode, {} particles)",
        frames.len(),
        total,
        cfg.tracker.mode.name(),
        cfg.tracker.particles
    );
    Ok(path)
}

/// Positions per step `1..=n_steps`; rows outside that range are an error.
pub fn truth_positions(rows: &[TruthRow], n_steps: u32) -> Result<Vec<Vec<[f64; 3]>>> {
    let mut out = vec![Vec::new(); n_steps as usize];
    for r in rows {
        if r.k == 0 || r.k > n_steps {
            return Err(Error::Input(format!(
                "truth row at k={} outside 1..={n_steps}",
                r.k
            )));
        }
        out[r.k as usize - 1].push([r.state[0], r.state[1], r.state[2]]);
    }
    Ok(out)
}

/// Per-step OSPA of `estimates` against `truth`, written to `out/ospa.csv`.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    estimates: &Path,
    truth: &Path,
    out: &Path,
) -> Result<Vec<f64>> {
    let est = io::read_estimates(estimates)?;
    let truth = truth_positions(&io::read_truth(truth)?, cfg.scenario.n_steps)?;
    let series = harness::ospa_series(&est, &truth, &cfg.ospa()?)?;
    io::write_series(&out.join("ospa.csv"), "ospa", &series)?;
    Ok(series)
}

fn variant_dir(out: &Path, mode: Mode) -> PathBuf {
    out.join("runs").join(mode.name())
}

/// Monte-Carlo sweep over `modes` (the config mode when empty). Writes
/// per-run `runs/<mode>/ospa_<run>.csv`, then `mospa_<mode>.csv`,
/// `timing.csv` and `config.toml`.
pub fn cmd_mc(cfg: &RunConfig, modes: &[Mode], out: &Path) -> Result<()> {
    let mut modes = if modes.is_empty() {
        vec![cfg.tracker.mode]
    } else {
        modes.to_vec()
    };
    modes.dedup();
    let scn = cfg.scenario()?;
    let variants = modes
        .iter()
        .map(|&m| {
            Ok(Variant {
                name: m.name().to_owned(),
                config: cfg.tracker_config(m, cfg.tracker.particles)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for &m in &modes {
        let dir = variant_dir(out, m);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let width = cfg.runs.to_string().len().max(4);
    let on_run = |r: usize, runs: &[VariantRun]| -> Result<()> {
        for (m, run) in modes.iter().zip(runs) {
            let path = variant_dir(out, *m).join(format!("ospa_{r:0width$}.csv"));
            io::write_series(&path, "ospa", &run.ospa)?;
        }
        Ok(())
    };
    let result = harness::run_mc(
        &scn,
        &variants,
        cfg.runs,
        cfg.seed,
        cfg.jobs,
        &cfg.ospa()?,
        on_run,
    )?;

    let mut timing = String::from("mode,particles,runs,mean_step_seconds\n");
    for (m, summary) in modes.iter().zip(&result.variants) {
        // Merge in run order from the per-run files.
        let per_run = (0..cfg.runs)
            .map(|r| {
                io::read_series(
                    &variant_dir(out, *m).join(format!("ospa_{r:0width$}.csv")),
                    "ospa",
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let mospa = flowtrack_core::metrics::mospa(&per_run)?;
        io::write_series(
            &out.join(format!("mospa_{}.csv", m.name())),
            "mospa",
            &mospa,
        )?;
        timing.push_str(&format!(
            "{},{},{},{}\n",
            m.name(),
            cfg.tracker.particles,
            cfg.runs,
            io::fmt_f64(summary.mean_step_seconds)
        ));
        let mean = mospa.iter().sum::<f64>() / mospa.len().max(1) as f64;
        info!(
            "{}: mean MOSPA {mean:.3} m, {:.4} s per step",
            m.name(),
            summary.mean_step_seconds
        );
    }
    io::write_text(&out.join("timing.csv"), &timing)?;
    write_config(out, cfg)
}
