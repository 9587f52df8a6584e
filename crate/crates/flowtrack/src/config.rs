//! Run configuration: a TOML file with `[scenario]`, `[tracker]` and
//! `[metrics]` sections, overridable from the command line.

use std::path::Path;

use flowtrack_core::flow::FlowSchedule;
use flowtrack_core::metrics::OspaParams;
use flowtrack_core::models::Aabb;
use flowtrack_core::sim::{Scenario, ScenarioParams};
use flowtrack_core::tracker::{ProposalMode, TrackerConfig};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub runs: usize,
    pub jobs: usize,
    pub scenario: ScenarioSection,
    pub tracker: TrackerSection,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            jobs: 1,
            scenario: ScenarioSection::default(),
            tracker: TrackerSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_steps: u32,
    /// Keep only the first `n_objects` objects; all when absent.
    pub n_objects: Option<usize>,
    pub birth_steps: Vec<u32>,
    pub death_steps: Vec<u32>,
    pub roi_min: [f64; 3],
    pub roi_max: [f64; 3],
    pub velocity_bound: f64,
    pub array_centers: Vec<[f64; 3]>,
    pub array_arm: f64,
    pub propagation_speed: f64,
    pub sigma_v: f64,
    pub p_d: f64,
    pub clutter_mean: f64,
    pub mean_births: f64,
    pub survival_prob: f64,
    pub drive_var: f64,
    pub dt: f64,
    pub start_radius: f64,
    pub azimuth_step_deg: f64,
    pub crossing_point: [f64; 3],
    pub speed_horizon: f64,
    pub speed_min: f64,
    pub speed_max: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let p = ScenarioParams::default();
        Self {
            n_steps: p.n_steps,
            n_objects: None,
            birth_steps: p.birth_steps,
            death_steps: p.death_steps,
            roi_min: p.roi.min,
            roi_max: p.roi.max,
            velocity_bound: p.velocity_bound,
            array_centers: p.array_centers,
            array_arm: p.array_arm,
            propagation_speed: p.c,
            sigma_v: p.sigma_v,
            p_d: p.p_d,
            clutter_mean: p.clutter_mean,
            mean_births: p.mean_births,
            survival_prob: p.survival_prob,
            drive_var: p.drive_var,
            dt: p.dt,
            start_radius: p.start_radius,
            azimuth_step_deg: p.azimuth_step_deg,
            crossing_point: p.crossing_point,
            speed_horizon: p.speed_horizon,
            speed_min: p.speed_min,
            speed_max: p.speed_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Flow,
    Bootstrap,
}

impl Mode {
    pub fn proposal(self) -> ProposalMode {
        match self {
            Mode::Flow => ProposalMode::Flow,
            Mode::Bootstrap => ProposalMode::Bootstrap,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Flow => "flow",
            Mode::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    pub mode: Mode,
    pub particles: usize,
    pub new_po_factor: usize,
    pub p_th: f64,
    pub p_pr: f64,
    pub n_lambda: usize,
    /// Flow steps for new potential objects.
    pub birth_n_lambda: usize,
    pub lambda_first_step: f64,
    pub lambda_ratio: f64,
    /// χ² probability of the innovation gate; no gating when absent.
    pub gate_probability: Option<f64>,
    pub da_tol: f64,
    pub da_max_iters: usize,
    pub max_pos: usize,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            mode: Mode::Flow,
            particles: t.n_particles,
            new_po_factor: t.new_po_factor,
            p_th: t.p_th,
            p_pr: t.p_pr,
            n_lambda: 29,
            birth_n_lambda: flowtrack_core::tracker::BIRTH_FLOW_STEPS,
            lambda_first_step: 1e-3,
            lambda_ratio: 1.2,
            gate_probability: None,
            da_tol: t.da_tol,
            da_max_iters: t.da_max_iters,
            max_pos: t.max_pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let p = OspaParams::default();
        Self {
            ospa_cutoff: p.cutoff,
            ospa_order: p.order,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section by building it.
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::config("jobs must be at least 1"));
        }
        self.scenario()?;
        self.tracker_config(self.tracker.mode, self.tracker.particles)?;
        self.ospa()?;
        Ok(())
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        let s = &self.scenario;
        ScenarioParams {
            n_steps: s.n_steps,
            birth_steps: s.birth_steps.clone(),
            death_steps: s.death_steps.clone(),
            roi: Aabb {
                min: s.roi_min,
                max: s.roi_max,
            },
            velocity_bound: s.velocity_bound,
            array_centers: s.array_centers.clone(),
            array_arm: s.array_arm,
            c: s.propagation_speed,
            sigma_v: s.sigma_v,
            p_d: s.p_d,
            clutter_mean: s.clutter_mean,
            mean_births: s.mean_births,
            survival_prob: s.survival_prob,
            drive_var: s.drive_var,
            dt: s.dt,
            start_radius: s.start_radius,
            azimuth_step_deg: s.azimuth_step_deg,
            crossing_point: s.crossing_point,
            speed_horizon: s.speed_horizon,
            speed_min: s.speed_min,
            speed_max: s.speed_max,
            seed: self.seed,
        }
    }

    /// The scenario over `n_steps`; objects born later are dropped and deaths
    /// after the horizon are ignored.
    pub fn scenario(&self) -> Result<Scenario> {
        let s = &self.scenario;
        Aabb::new(s.roi_min, s.roi_max).map_err(|e| Error::config(format!("scenario: {e}")))?;
        let mut params = self.scenario_params();
        let last_event = s
            .birth_steps
            .iter()
            .chain(&s.death_steps)
            .copied()
            .max()
            .unwrap_or(0);
        params.n_steps = s.n_steps.max(last_event);
        let full = params
            .build()
            .map_err(|e| Error::config(format!("scenario: {e}")))?;
        full.truncated(s.n_objects.unwrap_or(usize::MAX), s.n_steps)
            .map_err(|e| Error::config(format!("scenario: {e}")))
    }

    pub fn tracker_config(&self, mode: Mode, particles: usize) -> Result<TrackerConfig> {
        let t = &self.tracker;
        let schedule = FlowSchedule::geometric(t.n_lambda, t.lambda_first_step, t.lambda_ratio)
            .map_err(|e| Error::config(format!("tracker: {e}")))?;
        let birth_schedule =
            FlowSchedule::geometric(t.birth_n_lambda, t.lambda_first_step, t.lambda_ratio)
                .map_err(|e| Error::config(format!("tracker: {e}")))?;
        let gate_threshold = match t.gate_probability {
            Some(p) => Some(gate_threshold(p, self.measurement_dim())?),
            None => None,
        };
        let cfg = TrackerConfig {
            n_particles: particles,
            new_po_factor: t.new_po_factor,
            p_th: t.p_th,
            p_pr: t.p_pr,
            schedule,
            birth_schedule,
            gate_threshold,
            da_tol: t.da_tol,
            da_max_iters: t.da_max_iters,
            proposal_mode: mode.proposal(),
            max_pos: t.max_pos,
        };
        cfg.validate()
            .map_err(|e| Error::config(format!("tracker: {e}")))?;
        Ok(cfg)
    }

    pub fn ospa(&self) -> Result<OspaParams> {
        OspaParams::new(self.metrics.ospa_cutoff, self.metrics.ospa_order)
            .map_err(|e| Error::config(format!("metrics: {e}")))
    }

    /// Six receiver pairs per array.
    pub fn measurement_dim(&self) -> usize {
        6 * self.scenario.array_centers.len()
    }
}

/// Squared-Mahalanobis threshold with χ² probability `p` in `dim` dimensions.
pub fn gate_threshold(p: f64, dim: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config("gate_probability must lie in (0, 1)"));
    }
    let chi2 = ChiSquared::new(dim as f64).map_err(|e| Error::config(e.to_string()))?;
    Ok(chi2.inverse_cdf(p))
}
