//! Sum-product multiobject tracker with particle-flow or bootstrap proposals.
//!
//! One [`Tracker::step`] runs prediction, measurement evaluation of legacy
//! and new potential objects, iterative data association, measurement
//! update, declaration and pruning.

mod belief;
mod evaluation;
mod traits;
mod update;

#[cfg(test)]
mod tests;

use alloc::vec::Vec;

use crate::association::{run_spa_da, AssociationTables, SpaReport};
use crate::flow::FlowSchedule;
use crate::rng::{stream, Purpose};
use crate::sim::MeasurementFrame;
use crate::{Error, Result};

pub use belief::{
    detect_and_estimate, predict, prune, resample, Estimate, Label, LabeledBelief, PredictedMessage,
};
pub use evaluation::{
    log_q_offsets, measurement_evaluation, new_po_evaluation, Block, EvaluationStats,
    ExtendedParticleSet, LegacyEvaluation, NewPoEvaluation,
};
pub use traits::{BirthProcess, Motion, Sensor};
pub use update::{measurement_update_legacy, measurement_update_new, LegacyUpdateInfo};

/// Default number of flow steps for new potential objects.
pub const BIRTH_FLOW_STEPS: usize = 100;

/// How measurement-evaluation particles are proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProposalMode {
    /// Invertible particle flow toward each measurement.
    #[default]
    Flow,
    /// Predicted particles for every hypothesis; new objects from the birth
    /// density.
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub n_particles: usize,
    pub new_po_factor: usize,
    pub p_th: f64,
    pub p_pr: f64,
    /// Flow schedule of legacy potential objects.
    pub schedule: FlowSchedule,
    /// Flow schedule of new potential objects, whose prior is the wide
    /// birth density.
    pub birth_schedule: FlowSchedule,
    /// Squared-Mahalanobis gate on the linearized innovation; `None` disables it.
    pub gate_threshold: Option<f64>,
    pub da_tol: f64,
    pub da_max_iters: usize,
    pub proposal_mode: ProposalMode,
    pub max_pos: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            new_po_factor: 20,
            p_th: 0.5,
            p_pr: 1e-4,
            schedule: FlowSchedule::default_geometric(),
            birth_schedule: FlowSchedule::geometric(BIRTH_FLOW_STEPS, 1e-3, 1.2)
                .expect("valid birth schedule"),
            gate_threshold: None,
            da_tol: crate::association::DEFAULT_TOL,
            da_max_iters: crate::association::DEFAULT_MAX_ITERS,
            proposal_mode: ProposalMode::Flow,
            max_pos: 200,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.p_pr && self.p_pr < self.p_th && self.p_th < 1.0) {
            return Err(Error::invalid(
                "thresholds must satisfy 0 < p_pr < p_th < 1",
            ));
        }
        if self.n_particles == 0 || self.new_po_factor == 0 {
            return Err(Error::invalid("particle counts must be positive"));
        }
        if !(self.da_tol > 0.0) || self.da_max_iters == 0 {
            return Err(Error::invalid(
                "association tolerance and iteration cap must be positive",
            ));
        }
        if let Some(g) = self.gate_threshold {
            if !(g > 0.0) {
                return Err(Error::invalid("gate threshold must be positive"));
            }
        }
        if self.max_pos == 0 {
            return Err(Error::invalid("max_pos must be positive"));
        }
        Ok(())
    }
}

/// Per-legacy-object record of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LegacyDiagnostics {
    pub label: Label,
    pub alpha_e: f64,
    pub alpha_n: f64,
    pub beta: Vec<f64>,
    pub selected_block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub k: u32,
    pub n_measurements: usize,
    pub legacy: Vec<LegacyDiagnostics>,
    pub xi0: Vec<f64>,
    pub da: SpaReport,
    pub flow_fallbacks: usize,
    pub gated: usize,
    pub n_before_prune: usize,
    pub pruned: usize,
    pub evicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub estimates: Vec<Estimate>,
    pub diagnostics: StepDiagnostics,
}

/// Tracker state: models, configuration and current beliefs.
#[derive(Debug, Clone)]
pub struct Tracker<S, M, B> {
    pub sensor: S,
    pub motion: M,
    pub birth: B,
    cfg: TrackerConfig,
    seed: u64,
    beliefs: Vec<LabeledBelief>,
}

impl<S: Sensor, M: Motion, B: BirthProcess> Tracker<S, M, B> {
    pub fn new(sensor: S, motion: M, birth: B, cfg: TrackerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if !(sensor.clutter_rate() > 0.0) {
            return Err(Error::invalid("tracking requires a positive clutter rate"));
        }
        Ok(Self {
            sensor,
            motion,
            birth,
            cfg,
            seed,
            beliefs: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn beliefs(&self) -> &[LabeledBelief] {
        &self.beliefs
    }

    pub fn step(&mut self, frame: &MeasurementFrame) -> Result<StepOutput> {
        let k = frame.k;
        let n_m = frame.len();
        let p_d = self.sensor.detection_prob();
        let mut diag = StepDiagnostics {
            k,
            n_measurements: n_m,
            legacy: Vec::with_capacity(self.beliefs.len()),
            xi0: Vec::with_capacity(n_m),
            da: SpaReport {
                iterations: 0,
                converged: true,
                final_change: 0.0,
            },
            flow_fallbacks: 0,
            gated: 0,
            n_before_prune: 0,
            pruned: 0,
            evicted: 0,
        };

        let mut predicted = Vec::with_capacity(self.beliefs.len());
        let mut evaluations = Vec::with_capacity(self.beliefs.len());
        for b in &self.beliefs {
            let mut rng = stream(self.seed, k, b.label.key(), Purpose::Predict);
            let pred = predict(b, &self.motion, &mut rng)?;
            let eval = measurement_evaluation(&pred, &self.sensor, frame, &self.cfg)?;
            diag.flow_fallbacks += eval.stats.flow_fallbacks;
            diag.gated += eval.stats.gated;
            predicted.push(pred);
            evaluations.push(eval);
        }

        let mut new_pos = Vec::with_capacity(n_m);
        for (m, z) in frame.measurements.iter().enumerate() {
            let mut rng = stream(self.seed, k, (k, m as u32), Purpose::Birth);
            let eval = new_po_evaluation(z, &self.sensor, &self.birth, &self.cfg, &mut rng)?;
            if eval.flowed || self.cfg.proposal_mode == ProposalMode::Bootstrap {
                diag.xi0.push(eval.xi0);
            } else {
                diag.flow_fallbacks += 1;
                diag.xi0.push(eval.xi0);
            }
            new_pos.push(eval);
        }

        let n_p = evaluations.len();
        let beta = nalgebra::DMatrix::from_fn(n_p, n_m + 1, |j, a| evaluations[j].beta[a]);
        let mut tables = AssociationTables::new(beta, diag.xi0.clone())?;
        diag.da = run_spa_da(&mut tables, self.cfg.da_max_iters, self.cfg.da_tol)?;
        if !diag.da.converged {
            log::debug!(
                "association did not converge at step {k} (change {})",
                diag.da.final_change
            );
        }

        let n_out = self.cfg.n_particles;
        let mut next = Vec::with_capacity(n_p + n_m);
        for (j, (pred, eval)) in predicted.iter().zip(&evaluations).enumerate() {
            let label = self.beliefs[j].label;
            let kappa: Vec<f64> = tables.kappa.row(j).iter().copied().collect();
            let mut rng = stream(self.seed, k, label.key(), Purpose::Resample);
            let (belief, info) = measurement_update_legacy(
                label,
                &eval.extended,
                pred,
                &kappa,
                p_d,
                n_out,
                &mut rng,
            )?;
            diag.legacy.push(LegacyDiagnostics {
                label,
                alpha_e: pred.alpha_e,
                alpha_n: pred.alpha_n(),
                beta: eval.beta.clone(),
                selected_block: info.selected_block,
            });
            next.push(belief);
        }
        for (m, eval) in new_pos.iter().enumerate() {
            let label = Label::new(k, m as u32);
            let iota: Vec<f64> = tables.iota.row(m).iter().copied().collect();
            let mut rng = stream(self.seed, k, label.key(), Purpose::Resample);
            let mut belief = measurement_update_new(label, eval, &iota, n_out, &mut rng)?;
            // Neither the weights nor the flow touch the velocity of a new
            // object under a position-only likelihood, so the resampled
            // velocities can be redrawn from the birth marginal.
            if self.sensor.position_only() {
                self.birth
                    .redraw_velocities(&mut belief.particles, &mut rng);
            }
            next.push(belief);
        }

        let estimates = detect_and_estimate(&next, self.cfg.p_th);
        diag.n_before_prune = next.len();
        let mut kept = prune(next, self.cfg.p_pr);
        diag.pruned = diag.n_before_prune - kept.len();
        if kept.len() > self.cfg.max_pos {
            // Stable sort keeps label order among equal existences.
            kept.sort_by(|a, b| b.existence.total_cmp(&a.existence));
            diag.evicted = kept.len() - self.cfg.max_pos;
            kept.truncate(self.cfg.max_pos);
            kept.sort_by_key(|b| b.label);
            log::info!(
                "step {k}: evicted {} potential objects over the cap",
                diag.evicted
            );
        }
        self.beliefs = kept;
        Ok(StepOutput {
            estimates,
            diagnostics: diag,
        })
    }
}
