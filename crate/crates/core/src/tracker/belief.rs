//! Particle beliefs of potential objects, prediction, estimation, pruning
//! and resampling.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::traits::Motion;
use crate::flow::GaussianSummary;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Identifies a potential object by the step and measurement that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_step: u32,
    pub measurement: u32,
}

impl Label {
    pub fn new(birth_step: u32, measurement: u32) -> Self {
        Self {
            birth_step,
            measurement,
        }
    }

    pub(crate) fn key(self) -> (u32, u32) {
        (self.birth_step, self.measurement)
    }
}

/// Belief of one potential object. The weights carry the existent mass, so
/// they sum to `existence`; the nonexistent mass is `1 − existence`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBelief {
    pub label: Label,
    /// Column-wise states.
    pub particles: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub existence: f64,
}

impl LabeledBelief {
    pub fn new(
        label: Label,
        particles: DMatrix<f64>,
        weights: Vec<f64>,
        existence: f64,
    ) -> Result<Self> {
        if particles.ncols() == 0 {
            return Err(Error::InvalidBelief("belief has no particles"));
        }
        if weights.len() != particles.ncols() {
            return Err(Error::InvalidBelief("one weight per particle is required"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidBelief(
                "weights must be finite and nonnegative",
            ));
        }
        if !(0.0..=1.0).contains(&existence) {
            return Err(Error::InvalidBelief("existence must lie in [0, 1]"));
        }
        Ok(Self {
            label,
            particles,
            weights,
            existence,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.particles.ncols()
    }

    /// MMSE state estimate `Σ wᵢ xᵢ / p_e`; `None` when `p_e = 0`.
    pub fn estimate(&self) -> Option<DVector<f64>> {
        if !(self.existence > 0.0) {
            return None;
        }
        let mut x = DVector::zeros(self.particles.nrows());
        for (col, &w) in self.particles.column_iter().zip(&self.weights) {
            x.axpy(w, &col, 1.0);
        }
        Some(x / self.existence)
    }
}

/// Prediction of a belief to the next step.
#[derive(Debug, Clone)]
pub struct PredictedMessage {
    pub particles: DMatrix<f64>,
    /// Sum to `alpha_e`.
    pub weights: Vec<f64>,
    pub alpha_e: f64,
    /// Regularized moment match of the weighted particles; prior of the flow.
    pub gaussian: GaussianSummary,
}

impl PredictedMessage {
    pub fn alpha_n(&self) -> f64 {
        1.0 - self.alpha_e
    }
}

pub fn predict<M: Motion + ?Sized>(
    belief: &LabeledBelief,
    motion: &M,
    rng: &mut StreamRng,
) -> Result<PredictedMessage> {
    let n = belief.n_particles();
    if n == 0 {
        return Err(Error::InvalidBelief("belief has no particles"));
    }
    let mut particles = belief.particles.clone();
    motion.propagate(&mut particles, rng);
    let alpha_e = motion.survival_prob() * belief.existence;
    let total: f64 = belief.weights.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        belief.weights.iter().map(|w| w / total * alpha_e).collect()
    } else {
        vec![alpha_e / n as f64; n]
    };
    let shape: Vec<f64> = if total > 0.0 {
        belief.weights.clone()
    } else {
        vec![1.0; n]
    };
    let gaussian = GaussianSummary::from_weighted_particles(&particles, &shape)?.regularized();
    Ok(PredictedMessage {
        particles,
        weights,
        alpha_e,
        gaussian,
    })
}

/// Systematic resampling to `n_out` particles of weight `Σw / n_out` each.
pub fn resample(
    particles: &DMatrix<f64>,
    weights: &[f64],
    n_out: usize,
    rng: &mut StreamRng,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if weights.len() != particles.ncols() {
        return Err(Error::DimensionMismatch {
            context: "resample",
            expected: particles.ncols(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() || n_out == 0 {
        return Err(Error::DegenerateWeights);
    }
    let step = total / n_out as f64;
    let mut threshold = rng.random::<f64>() * step;
    let mut out = DMatrix::zeros(particles.nrows(), n_out);
    let mut cumulative = 0.0;
    let mut src = 0;
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    for i in 0..n_out {
        while src < last && cumulative + weights[src] <= threshold {
            cumulative += weights[src];
            src += 1;
        }
        out.set_column(i, &particles.column(src));
        threshold += step;
    }
    Ok((out, vec![step; n_out]))
}

/// A declared object at the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub label: Label,
    pub state: DVector<f64>,
    pub existence: f64,
}

/// Beliefs with existence strictly above `p_th`, with their MMSE estimates.
pub fn detect_and_estimate(beliefs: &[LabeledBelief], p_th: f64) -> Vec<Estimate> {
    beliefs
        .iter()
        .filter(|b| b.existence > p_th)
        .filter_map(|b| {
            b.estimate().map(|state| Estimate {
                label: b.label,
                state,
                existence: b.existence,
            })
        })
        .collect()
}

/// Drops beliefs with existence strictly below `p_pr`.
pub fn prune(beliefs: Vec<LabeledBelief>, p_pr: f64) -> Vec<LabeledBelief> {
    beliefs
        .into_iter()
        .filter(|b| !(b.existence < p_pr))
        .collect()
}
