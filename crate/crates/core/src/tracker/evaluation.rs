//! Measurement evaluation: the extended particle set and β messages of a
//! legacy potential object, and the ξ messages of new potential objects.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::belief::PredictedMessage;
use super::traits::{BirthProcess, Sensor};
use super::{ProposalMode, TrackerConfig};
use crate::flow::{flow_map, FlowSchedule, GaussianSummary};
use crate::linalg::Gaussian;
use crate::rng::StreamRng;
use crate::sim::MeasurementFrame;
use crate::{Error, Result};

/// Particles and weights of one hypothesis of the extended set, plus
/// `log_q[(m, i)] = log q(xᵢ, 1, m; z)`, the existent legacy pseudo
/// likelihood of every measurement at every particle of this block.
#[derive(Debug, Clone)]
pub struct Block {
    pub particles: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub theta: f64,
    pub log_q: DMatrix<f64>,
}

impl Block {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Predicted particles (block 0) and one block per measurement obtained by
/// flowing them toward that measurement. A `None` block was not flowed and
/// coincides with block 0.
#[derive(Debug, Clone)]
pub struct ExtendedParticleSet {
    pub base: Block,
    pub flowed: Vec<Option<Block>>,
}

impl ExtendedParticleSet {
    pub fn n_blocks(&self) -> usize {
        self.flowed.len() + 1
    }

    pub fn block(&self, a: usize) -> &Block {
        if a == 0 {
            &self.base
        } else {
            self.flowed[a - 1].as_ref().unwrap_or(&self.base)
        }
    }

    pub fn is_flowed(&self, a: usize) -> bool {
        a > 0 && self.flowed[a - 1].is_some()
    }
}

/// Counters describing how measurement evaluation went for one object.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvaluationStats {
    pub flow_fallbacks: usize,
    pub gated: usize,
}

/// Output of [`measurement_evaluation`].
#[derive(Debug, Clone)]
pub struct LegacyEvaluation {
    pub extended: ExtendedParticleSet,
    /// `β̃(0..=m_k)`.
    pub beta: Vec<f64>,
    pub stats: EvaluationStats,
}

/// `log(p_d / (μ_c f_c(z)))` for every measurement of the frame.
pub fn log_q_offsets<S: Sensor + ?Sized>(sensor: &S, frame: &MeasurementFrame) -> Result<Vec<f64>> {
    let mu_c = sensor.clutter_rate();
    if !(mu_c > 0.0) {
        return Err(Error::invalid("tracking requires a positive clutter rate"));
    }
    let ln_pd = libm::log(sensor.detection_prob());
    let ln_mu_c = libm::log(mu_c);
    Ok(frame
        .measurements
        .iter()
        .map(|z| ln_pd - ln_mu_c - sensor.clutter_log_density(z.as_slice()))
        .collect())
}

fn log_q_matrix<S: Sensor + ?Sized>(
    sensor: &S,
    frame: &MeasurementFrame,
    offsets: &[f64],
    gated: &[bool],
    particles: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n_m = frame.len();
    let mut out = DMatrix::from_element(n_m, particles.ncols(), f64::NEG_INFINITY);
    for (m, z) in frame.measurements.iter().enumerate() {
        if gated[m] || offsets[m] == f64::NEG_INFINITY {
            continue;
        }
        for (i, col) in particles.column_iter().enumerate() {
            out[(m, i)] = offsets[m] + sensor.log_lik(z.as_slice(), col.as_slice());
        }
    }
    out
}

/// Squared Mahalanobis distance of the linearized innovation at the prior mean.
fn innovation_distance_sq<S: Sensor + ?Sized>(
    sensor: &S,
    prior: &GaussianSummary,
    z: &DVector<f64>,
) -> Result<f64> {
    let h = sensor.jacobian(&prior.mean)?;
    let s = &h * &prior.cov * h.transpose() + sensor.noise_cov();
    let chol = Cholesky::new(s).ok_or(Error::SingularInnovation { lambda: 1.0 })?;
    let innov = z - sensor.predict(&prior.mean)?;
    Ok(innov.dot(&chol.solve(&innov)))
}

fn apply_affine(
    map: &DMatrix<f64>,
    offset: &DVector<f64>,
    particles: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut out = map * particles;
    for mut col in out.column_iter_mut() {
        col += offset;
    }
    out
}

/// Flows the predicted particles toward `z`; `Ok(None)` asks the caller to
/// fall back to zero flow.
fn flow_block<S: Sensor + ?Sized>(
    pred: &PredictedMessage,
    prior: &Gaussian,
    d0: &[f64],
    sensor: &S,
    z: &DVector<f64>,
    schedule: &FlowSchedule,
) -> Result<Option<(DMatrix<f64>, Vec<f64>, f64)>> {
    let (map, offset, _, theta) =
        match flow_map(&pred.gaussian.mean, &pred.gaussian, sensor, z, schedule) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("flow failed ({e}); using zero flow for this block");
                return Ok(None);
            }
        };
    let particles = apply_affine(&map, &offset, &pred.particles);
    let d1 = prior.mahalanobis_sq_columns(&particles);
    let weights: Vec<f64> = pred
        .weights
        .iter()
        .zip(d0.iter().zip(&d1))
        .map(|(&w0, (&a, &b))| {
            if w0 == 0.0 {
                0.0
            } else {
                w0 * theta * libm::exp(-0.5 * (b - a))
            }
        })
        .collect();
    if weights.iter().any(|w| !w.is_finite()) {
        log::warn!("non-finite flow weights; using zero flow for this block");
        return Ok(None);
    }
    Ok(Some((particles, weights, theta)))
}

/// Builds the extended particle set of one legacy object and its β̃ row.
pub fn measurement_evaluation<S: Sensor + ?Sized>(
    pred: &PredictedMessage,
    sensor: &S,
    frame: &MeasurementFrame,
    cfg: &TrackerConfig,
) -> Result<LegacyEvaluation> {
    let n_m = frame.len();
    let p_d = sensor.detection_prob();
    let offsets = log_q_offsets(sensor, frame)?;
    let mut stats = EvaluationStats::default();

    let mut gated = vec![false; n_m];
    if let Some(threshold) = cfg.gate_threshold {
        for (m, z) in frame.measurements.iter().enumerate() {
            if innovation_distance_sq(sensor, &pred.gaussian, z)? > threshold {
                gated[m] = true;
                stats.gated += 1;
            }
        }
    }

    let base = Block {
        log_q: log_q_matrix(sensor, frame, &offsets, &gated, &pred.particles),
        particles: pred.particles.clone(),
        weights: pred.weights.clone(),
        theta: 1.0,
    };
    let mut flowed = vec![None; n_m];
    if cfg.proposal_mode == ProposalMode::Flow && pred.alpha_e > 0.0 && n_m > 0 {
        let prior = Gaussian::new(pred.gaussian.mean.clone(), pred.gaussian.cov.clone())?;
        let d0 = prior.mahalanobis_sq_columns(&pred.particles);
        for (m, z) in frame.measurements.iter().enumerate() {
            if gated[m] || offsets[m] == f64::NEG_INFINITY {
                continue;
            }
            match flow_block(pred, &prior, &d0, sensor, z, &cfg.schedule)? {
                Some((particles, weights, theta)) => {
                    let log_q = log_q_matrix(sensor, frame, &offsets, &gated, &particles);
                    flowed[m] = Some(Block {
                        particles,
                        weights,
                        theta,
                        log_q,
                    });
                }
                None => stats.flow_fallbacks += 1,
            }
        }
    }
    let extended = ExtendedParticleSet { base, flowed };

    let mut beta = Vec::with_capacity(n_m + 1);
    beta.push((1.0 - p_d) * pred.alpha_e + pred.alpha_n());
    for m in 0..n_m {
        let block = extended.block(m + 1);
        let b: f64 = block
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if *w == 0.0 {
                    0.0
                } else {
                    libm::exp(block.log_q[(m, i)]) * w
                }
            })
            .sum();
        if !b.is_finite() {
            return Err(Error::NonFiniteMessage { iteration: 0 });
        }
        beta.push(b);
    }
    Ok(LegacyEvaluation {
        extended,
        beta,
        stats,
    })
}

/// New potential object introduced for one measurement, before association.
#[derive(Debug, Clone)]
pub struct NewPoEvaluation {
    pub particles: DMatrix<f64>,
    /// Existent weights `v(x̄ᵢ) w̄ᵢ`, whose sum is `ξ̃(0) − 1`.
    pub existent: Vec<f64>,
    pub xi0: f64,
    pub theta: f64,
    pub flowed: bool,
}

/// Samples, flows and weights the new potential object of measurement `z`.
pub fn new_po_evaluation<S: Sensor + ?Sized, B: BirthProcess + ?Sized>(
    z: &DVector<f64>,
    sensor: &S,
    birth: &B,
    cfg: &TrackerConfig,
    rng: &mut StreamRng,
) -> Result<NewPoEvaluation> {
    let n = cfg.n_particles * cfg.new_po_factor;
    let x0 = birth.sample_states(n, rng);
    let w0 = 1.0 / n as f64;
    let mu_c = sensor.clutter_rate();
    if !(mu_c > 0.0) {
        return Err(Error::invalid("tracking requires a positive clutter rate"));
    }
    let p_d = sensor.detection_prob();
    let mu_b = birth.birth_rate();
    if !(p_d > 0.0 && mu_b > 0.0) {
        return Ok(NewPoEvaluation {
            particles: x0,
            existent: vec![0.0; n],
            xi0: 1.0,
            theta: 1.0,
            flowed: false,
        });
    }
    let log_c = libm::log(p_d) + libm::log(mu_b)
        - libm::log(mu_c)
        - sensor.clutter_log_density(z.as_slice());

    let mut theta = 1.0;
    let mut flowed = false;
    let mut particles = x0.clone();
    if cfg.proposal_mode == ProposalMode::Flow {
        let (mean, cov) = birth.moment_match();
        let prior = GaussianSummary::new(mean, cov)?;
        match flow_map(&prior.mean, &prior, sensor, z, &cfg.birth_schedule) {
            Ok((map, offset, _, t)) => {
                particles = apply_affine(&map, &offset, &x0);
                theta = t;
                flowed = true;
            }
            Err(e) => log::warn!("new-object flow failed ({e}); using zero flow"),
        }
    }

    let existent: Vec<f64> = particles
        .column_iter()
        .zip(x0.column_iter())
        .map(|(x1, x0)| {
            let ratio = if flowed {
                let l1 = birth.log_density_at(x1.as_slice());
                if l1 == f64::NEG_INFINITY {
                    return 0.0;
                }
                theta * libm::exp(l1 - birth.log_density_at(x0.as_slice()))
            } else {
                1.0
            };
            libm::exp(log_c + sensor.log_lik(z.as_slice(), x1.as_slice())) * ratio * w0
        })
        .collect();
    let mass: f64 = existent.iter().sum();
    if !mass.is_finite() {
        return Err(Error::NonFiniteMessage { iteration: 0 });
    }
    Ok(NewPoEvaluation {
        particles,
        existent,
        xi0: 1.0 + mass,
        theta,
        flowed,
    })
}
