//! Measurement update of legacy and new potential objects.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::belief::{resample, Label, LabeledBelief, PredictedMessage};
use super::evaluation::{ExtendedParticleSet, NewPoEvaluation};
use crate::linalg::argmax;
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Diagnostics of one legacy update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegacyUpdateInfo {
    /// Block whose particles joined block 0 in the proposal.
    pub selected_block: usize,
    pub block_sums: [f64; 2],
    pub degenerate: bool,
}

/// Updates a legacy object with its κ row.
///
/// Every particle of every block is weighted by
/// `γ(x) = (1 − p_d) κ(0) + Σ_m q(x, m) κ(m)`. The block with the largest
/// weight sum joins block 0; the union carries halved weights and is
/// normalized against the nonexistent mass `α_n κ(0)`.
pub fn measurement_update_legacy(
    label: Label,
    ext: &ExtendedParticleSet,
    pred: &PredictedMessage,
    kappa: &[f64],
    p_d: f64,
    n_out: usize,
    rng: &mut StreamRng,
) -> Result<(LabeledBelief, LegacyUpdateInfo)> {
    if kappa.len() != ext.n_blocks() {
        return Err(Error::DimensionMismatch {
            context: "measurement_update_legacy",
            expected: ext.n_blocks(),
            found: kappa.len(),
        });
    }
    let missed = (1.0 - p_d) * kappa[0];
    let gamma_weights = |a: usize| -> Vec<f64> {
        let block = ext.block(a);
        block
            .weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                if w == 0.0 {
                    return 0.0;
                }
                let mut g = missed;
                for (m, &k) in kappa[1..].iter().enumerate() {
                    let lq = block.log_q[(m, i)];
                    if lq > f64::NEG_INFINITY {
                        g += libm::exp(lq) * k;
                    }
                }
                g * w
            })
            .collect()
    };

    let base = gamma_weights(0);
    let base_sum: f64 = base.iter().sum();
    let mut sums = vec![base_sum; ext.n_blocks()];
    let mut cached: Vec<Option<Vec<f64>>> = vec![None; ext.n_blocks()];
    for (a, sum) in sums.iter_mut().enumerate().skip(1) {
        if ext.is_flowed(a) {
            let w = gamma_weights(a);
            *sum = w.iter().sum();
            cached[a] = Some(w);
        }
    }
    let selected = argmax(&sums).unwrap_or(0);
    let selected_weights = cached[selected].take().unwrap_or_else(|| base.clone());
    let selected_block = ext.block(selected);

    let w_b = pred.alpha_n() * kappa[0];
    let union_sum = 0.5 * (base_sum + sums[selected]);
    let denom = union_sum + w_b;
    let info = |degenerate| LegacyUpdateInfo {
        selected_block: selected,
        block_sums: [base_sum, sums[selected]],
        degenerate,
    };
    if !(denom > 0.0) || !denom.is_finite() || !union_sum.is_finite() {
        log::warn!("degenerate evidence for {label:?}; existence set to 0");
        let n = pred.particles.ncols();
        let belief = LabeledBelief::new(label, pred.particles.clone(), vec![0.0; n], 0.0)?;
        return Ok((belief, info(true)));
    }

    let existence = (union_sum / denom).clamp(0.0, 1.0);
    if existence == 0.0 {
        let n = pred.particles.ncols();
        return Ok((
            LabeledBelief::new(label, pred.particles.clone(), vec![0.0; n], 0.0)?,
            info(false),
        ));
    }
    let n = ext.base.particles.ncols();
    let m = selected_block.particles.ncols();
    let dim = ext.base.particles.nrows();
    let mut union = DMatrix::zeros(dim, n + m);
    union.columns_mut(0, n).copy_from(&ext.base.particles);
    union.columns_mut(n, m).copy_from(&selected_block.particles);
    let scale = 0.5 / denom;
    let weights: Vec<f64> = base
        .iter()
        .chain(&selected_weights)
        .map(|w| w * scale)
        .collect();
    let (particles, _) = resample(&union, &weights, n_out, rng)?;
    let belief = LabeledBelief::new(
        label,
        particles,
        vec![existence / n_out as f64; n_out],
        existence,
    )?;
    Ok((belief, info(false)))
}

/// Updates the new object of measurement `m` with its ι row
/// `[ι(0) = 1, φ_{1→m}, …]`.
pub fn measurement_update_new(
    label: Label,
    eval: &NewPoEvaluation,
    iota: &[f64],
    n_out: usize,
    rng: &mut StreamRng,
) -> Result<LabeledBelief> {
    let iota0 = iota
        .first()
        .copied()
        .ok_or(Error::invalid("empty iota row"))?;
    let existent_mass: f64 = iota0 * eval.existent.iter().sum::<f64>();
    let nonexistent: f64 = iota.iter().sum();
    let denom = existent_mass + nonexistent;
    if !(denom > 0.0) || !denom.is_finite() || !(existent_mass > 0.0) {
        if !(denom > 0.0) || !denom.is_finite() {
            log::warn!("degenerate evidence for {label:?}; existence set to 0");
        }
        let keep = eval
            .particles
            .columns(0, n_out.min(eval.particles.ncols()))
            .into_owned();
        let n = keep.ncols();
        return LabeledBelief::new(label, keep, vec![0.0; n], 0.0);
    }
    let existence = (existent_mass / denom).clamp(0.0, 1.0);
    let weights: Vec<f64> = eval.existent.iter().map(|w| w * iota0 / denom).collect();
    let (particles, _) = resample(&eval.particles, &weights, n_out, rng)?;
    LabeledBelief::new(
        label,
        particles,
        vec![existence / n_out as f64; n_out],
        existence,
    )
}
