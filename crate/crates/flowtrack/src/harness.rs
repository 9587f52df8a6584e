//! Simulate → track → evaluate, once or over many seeded Monte-Carlo runs.

use std::time::Instant;

use flowtrack_core::metrics::{mospa, ospa, OspaParams};
use flowtrack_core::models::{BirthModel, CvMotionModel, TdoaModel};
use flowtrack_core::rng::{derive_run_seed, stream, Purpose, StreamRng};
use flowtrack_core::sim::{simulate, MeasurementFrame, Scenario, SimOutput};
use flowtrack_core::tracker::{Estimate, StepOutput, Tracker, TrackerConfig};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type TdoaTracker = Tracker<TdoaModel, CvMotionModel, BirthModel>;

/// Random stream used to simulate the scenario of a run.
pub fn simulation_rng(seed: u64) -> StreamRng {
    stream(seed, 0, (0, 0), Purpose::Simulate)
}

pub fn simulate_run(scn: &Scenario, seed: u64) -> Result<SimOutput> {
    Ok(simulate(scn, &mut simulation_rng(seed))?)
}

pub fn new_tracker(scn: &Scenario, cfg: TrackerConfig, seed: u64) -> Result<TdoaTracker> {
    Ok(Tracker::new(
        scn.sensor.clone(),
        scn.motion,
        scn.birth,
        cfg,
        seed,
    )?)
}

/// Estimates of every step and the wall-clock time of each `step` call.
#[derive(Debug, Clone, Default)]
pub struct TrackOutput {
    pub estimates: Vec<(u32, Estimate)>,
    pub step_seconds: Vec<f64>,
}

/// Runs the tracker over `frames`; `inspect` sees every step's output and
/// the tracker after the step.
pub fn track_frames(
    tracker: &mut TdoaTracker,
    frames: &[MeasurementFrame],
    mut inspect: impl FnMut(&StepOutput, &TdoaTracker),
) -> Result<TrackOutput> {
    let mut out = TrackOutput::default();
    for frame in frames {
        let start = Instant::now();
        let step = tracker.step(frame)?;
        out.step_seconds.push(start.elapsed().as_secs_f64());
        inspect(&step, tracker);
        out.estimates
            .extend(step.estimates.into_iter().map(|e| (frame.k, e)));
    }
    Ok(out)
}

/// OSPA of the estimated positions against the truth for `k = 1..=n_steps`.
pub fn ospa_series(
    estimates: &[(u32, Estimate)],
    truth: &[Vec<[f64; 3]>],
    params: &OspaParams,
) -> Result<Vec<f64>> {
    let n_steps = truth.len();
    let mut est: Vec<Vec<[f64; 3]>> = vec![Vec::new(); n_steps];
    for (k, e) in estimates {
        let k = *k as usize;
        if k == 0 || k > n_steps {
            return Err(Error::Input(format!(
                "estimate at k={k} outside the truth range 1..={n_steps}"
            )));
        }
        est[k - 1].push([e.state[0], e.state[1], e.state[2]]);
    }
    Ok(est
        .iter()
        .zip(truth)
        .map(|(e, t)| ospa(e, t, params))
        .collect())
}

/// A tracker configuration compared in a Monte-Carlo sweep.
#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub config: TrackerConfig,
}

#[derive(Debug, Clone)]
pub struct VariantRun {
    pub ospa: Vec<f64>,
    pub step_seconds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VariantSummary {
    pub name: String,
    /// `runs × steps`, in run order.
    pub per_run_ospa: Vec<Vec<f64>>,
    pub mospa: Vec<f64>,
    pub mean_step_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub run_seeds: Vec<u64>,
    pub variants: Vec<VariantSummary>,
}

/// One run: a scenario realization shared by every variant.
pub fn run_once(
    scn: &Scenario,
    variants: &[Variant],
    seed: u64,
    params: &OspaParams,
) -> Result<Vec<VariantRun>> {
    let sim = simulate_run(scn, seed)?;
    let truth = sim.truth_positions(scn.n_steps);
    variants
        .iter()
        .map(|v| {
            let mut tracker = new_tracker(scn, v.config.clone(), seed)?;
            let out = track_frames(&mut tracker, &sim.frames, |_, _| {})?;
            Ok(VariantRun {
                ospa: ospa_series(&out.estimates, &truth, params)?,
                step_seconds: out.step_seconds,
            })
        })
        .collect()
}

/// Runs `runs` seeded repetitions on up to `jobs` threads. Run `r` uses seed
/// `derive_run_seed(base_seed, r)`; results do not depend on `jobs`.
/// `on_run` is called from the worker with each finished run.
pub fn run_mc(
    scn: &Scenario,
    variants: &[Variant],
    runs: usize,
    base_seed: u64,
    jobs: usize,
    params: &OspaParams,
    on_run: impl Fn(usize, &[VariantRun]) -> Result<()> + Sync,
) -> Result<McResult> {
    if runs == 0 {
        return Err(Error::config("runs must be at least 1"));
    }
    let run_seeds: Vec<u64> = (0..runs as u64)
        .map(|r| derive_run_seed(base_seed, r))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<Vec<VariantRun>> = pool.install(|| {
        run_seeds
            .par_iter()
            .enumerate()
            .map(|(r, &s)| {
                let out = run_once(scn, variants, s, params)?;
                on_run(r, &out)?;
                Ok(out)
            })
            .collect::<Result<_>>()
    })?;

    let summaries = variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let per_run_ospa: Vec<Vec<f64>> = results.iter().map(|r| r[i].ospa.clone()).collect();
            let times: Vec<f64> = results
                .iter()
                .flat_map(|r| r[i].step_seconds.iter().copied())
                .collect();
            Ok(VariantSummary {
                name: v.name.clone(),
                mospa: mospa(&per_run_ospa)?,
                per_run_ospa,
                mean_step_seconds: times.iter().sum::<f64>() / times.len().max(1) as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(McResult {
        run_seeds,
        variants: summaries,
    })
}
