use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};

use super::*;
use crate::flow::{GaussianSummary, LinearGaussianModel, MeasurementModel};
use crate::models::{Aabb, BirthModel, CvMotionModel, TdoaModel};
use crate::rng::StreamRng;
use crate::sim::{default_scenario, simulate, MeasurementFrame};

/// `z = h x + v` in one dimension with uniform clutter on `[-l, l]`.
#[derive(Debug, Clone)]
struct ToySensor {
    lin: LinearGaussianModel,
    h: f64,
    r: f64,
    p_d: f64,
    mu_c: f64,
    half_width: f64,
}

impl ToySensor {
    fn new(h: f64, r: f64, p_d: f64, mu_c: f64, half_width: f64) -> Self {
        let lin = LinearGaussianModel::new(
            DMatrix::from_element(1, 1, h),
            DMatrix::from_element(1, 1, r),
        )
        .unwrap();
        Self {
            lin,
            h,
            r,
            p_d,
            mu_c,
            half_width,
        }
    }
}

impl MeasurementModel for ToySensor {
    fn state_dim(&self) -> usize {
        1
    }
    fn measurement_dim(&self) -> usize {
        1
    }
    fn predict(&self, x: &DVector<f64>) -> crate::Result<DVector<f64>> {
        self.lin.predict(x)
    }
    fn jacobian(&self, x: &DVector<f64>) -> crate::Result<DMatrix<f64>> {
        self.lin.jacobian(x)
    }
    fn noise_cov(&self) -> DMatrix<f64> {
        self.lin.noise_cov()
    }
    fn log_likelihood(&self, z: &DVector<f64>, x: &DVector<f64>) -> crate::Result<f64> {
        self.lin.log_likelihood(z, x)
    }
}

impl Sensor for ToySensor {
    fn detection_prob(&self) -> f64 {
        self.p_d
    }
    fn clutter_rate(&self) -> f64 {
        self.mu_c
    }
    fn clutter_log_density(&self, _z: &[f64]) -> f64 {
        -libm::log(2.0 * self.half_width)
    }
    fn log_lik(&self, z: &[f64], x: &[f64]) -> f64 {
        let e = z[0] - self.h * x[0];
        -0.5 * (e * e / self.r + libm::log(2.0 * core::f64::consts::PI * self.r))
    }
}

#[derive(Debug, Clone)]
struct RandomWalk {
    q: f64,
    p_s: f64,
}

impl Motion for RandomWalk {
    fn survival_prob(&self) -> f64 {
        self.p_s
    }
    fn propagate(&self, particles: &mut DMatrix<f64>, rng: &mut StreamRng) {
        let sd = libm::sqrt(self.q);
        for v in particles.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *v += sd * e;
        }
    }
}

/// Uniform birth on `[lo, hi]`.
#[derive(Debug, Clone)]
struct UniformBirth {
    mu_b: f64,
    lo: f64,
    hi: f64,
}

impl BirthProcess for UniformBirth {
    fn birth_rate(&self) -> f64 {
        self.mu_b
    }
    fn sample_states(&self, n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
        DMatrix::from_fn(1, n, |_, _| rng.random_range(self.lo..self.hi))
    }
    fn log_density_at(&self, x: &[f64]) -> f64 {
        if (self.lo..=self.hi).contains(&x[0]) {
            -libm::log(self.hi - self.lo)
        } else {
            f64::NEG_INFINITY
        }
    }
    fn moment_match(&self) -> (DVector<f64>, DMatrix<f64>) {
        let w = self.hi - self.lo;
        (
            DVector::from_element(1, 0.5 * (self.lo + self.hi)),
            DMatrix::from_element(1, 1, w * w / 12.0),
        )
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    libm::exp(-0.5 * (x - mean) * (x - mean) / var) / libm::sqrt(2.0 * core::f64::consts::PI * var)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

fn rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Predicted message of `n` Gaussian particles `N(mean, var)` with mass `alpha_e`.
fn gaussian_pred(n: usize, mean: f64, var: f64, alpha_e: f64, seed: u64) -> PredictedMessage {
    let mut r = rng(seed);
    let normal = Normal::new(mean, libm::sqrt(var)).unwrap();
    let particles = DMatrix::from_fn(1, n, |_, _| normal.sample(&mut r));
    let gaussian = GaussianSummary::new(
        DVector::from_element(1, mean),
        DMatrix::from_element(1, 1, var),
    )
    .unwrap();
    PredictedMessage {
        particles,
        weights: vec![alpha_e / n as f64; n],
        alpha_e,
        gaussian,
    }
}

fn frame(k: u32, zs: &[f64]) -> MeasurementFrame {
    MeasurementFrame::new(k, zs.iter().map(|z| DVector::from_element(1, *z)).collect())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

#[test]
fn config_validation() {
    assert!(TrackerConfig::default().validate().is_ok());
    let bad = |f: fn(&mut TrackerConfig)| {
        let mut c = TrackerConfig::default();
        f(&mut c);
        c.validate().is_err()
    };
    assert!(bad(|c| c.p_pr = 0.0));
    assert!(bad(|c| c.p_pr = 0.6));
    assert!(bad(|c| c.p_th = 1.0));
    assert!(bad(|c| c.n_particles = 0));
    assert!(bad(|c| c.gate_threshold = Some(-1.0)));
    assert!(bad(|c| c.da_max_iters = 0));
}

#[test]
fn evaluation_of_nonexistent_object() {
    let sensor = ToySensor::new(1.0, 1.0, 0.9, 1.0, 50.0);
    let pred = gaussian_pred(100, 0.0, 1.0, 0.0, 1);
    let eval = measurement_evaluation(
        &pred,
        &sensor,
        &frame(1, &[0.5, -2.0]),
        &TrackerConfig::default(),
    )
    .unwrap();
    assert_eq!(eval.beta, vec![1.0, 0.0, 0.0]);
}

#[test]
fn evaluation_without_measurements() {
    let sensor = ToySensor::new(1.0, 1.0, 0.9, 1.0, 50.0);
    let pred = gaussian_pred(100, 0.0, 1.0, 0.7, 1);
    let eval =
        measurement_evaluation(&pred, &sensor, &frame(1, &[]), &TrackerConfig::default()).unwrap();
    assert_eq!(eval.beta, vec![(1.0 - 0.9) * 0.7 + (1.0 - 0.7)]);
    assert_eq!(eval.extended.n_blocks(), 1);
}

#[test]
fn beta_matches_predictive_likelihood() {
    let (mean, var, r, z, alpha_e) = (0.5, 2.0, 1.0, 1.7, 0.8);
    let sensor = ToySensor::new(1.0, r, 0.9, 2.0, 50.0);
    let oracle = 0.9 * normal_pdf(z, mean, var + r) / (2.0 * (1.0 / 100.0));
    for mode in [ProposalMode::Flow, ProposalMode::Bootstrap] {
        let n = 10_000;
        let pred = gaussian_pred(n, mean, var, alpha_e, 2);
        let cfg = TrackerConfig {
            proposal_mode: mode,
            ..Default::default()
        };
        let eval = measurement_evaluation(&pred, &sensor, &frame(1, &[z]), &cfg).unwrap();
        assert_eq!(eval.extended.is_flowed(1), mode == ProposalMode::Flow);
        let block = eval.extended.block(1);
        let contributions: Vec<f64> = (0..n)
            .map(|i| n as f64 * libm::exp(block.log_q[(0, i)]) * block.weights[i] / alpha_e)
            .collect();
        let (est, se) = mean_and_se(&contributions);
        assert!((eval.beta[1] / alpha_e - est).abs() < 1e-9 * est);
        assert!(
            (est - oracle).abs() < 3.0 * se,
            "{mode:?}: {est} vs {oracle} (se {se})"
        );
    }
}

// The flowed proposal has variance `T² P`; importance weights against the
// prior have finite variance only while that exceeds `P / 2`, i.e. for a
// weakly informative measurement.
#[test]
fn flowed_blocks_estimate_alpha_e() {
    let alpha_e = 0.6;
    let sensor = ToySensor::new(1.0, 16.0, 0.9, 1.0, 50.0);
    let n = 10_000;
    let pred = gaussian_pred(n, 0.0, 4.0, alpha_e, 3);
    let eval = measurement_evaluation(
        &pred,
        &sensor,
        &frame(1, &[-1.0, 0.5, 3.0]),
        &TrackerConfig::default(),
    )
    .unwrap();
    for a in 1..=3 {
        assert!(eval.extended.is_flowed(a));
        let contributions: Vec<f64> = eval
            .extended
            .block(a)
            .weights
            .iter()
            .map(|w| w * n as f64)
            .collect();
        let (sum, se) = mean_and_se(&contributions);
        assert!(
            (sum - alpha_e).abs() < 5.0 * se,
            "block {a}: {sum} (se {se})"
        );
    }
    assert_eq!(eval.extended.block(0).weights, pred.weights);
}

#[test]
fn gating_zeroes_far_measurements() {
    let sensor = ToySensor::new(1.0, 1.0, 0.9, 1.0, 50.0);
    let pred = gaussian_pred(500, 0.0, 1.0, 0.9, 4);
    let cfg = TrackerConfig {
        gate_threshold: Some(16.0),
        ..Default::default()
    };
    let eval = measurement_evaluation(&pred, &sensor, &frame(1, &[0.3, 20.0]), &cfg).unwrap();
    assert_eq!(eval.stats.gated, 1);
    assert!(eval.beta[1] > 0.0);
    assert_eq!(eval.beta[2], 0.0);
    assert!(!eval.extended.is_flowed(2));
}

#[test]
fn new_po_trivial_cases() {
    let sensor = ToySensor::new(1.0, 1.0, 0.9, 1.0, 50.0);
    let z = DVector::from_element(1, 0.0);
    let cfg = TrackerConfig::default();
    let no_births = UniformBirth {
        mu_b: 0.0,
        lo: -10.0,
        hi: 10.0,
    };
    assert_eq!(
        new_po_evaluation(&z, &sensor, &no_births, &cfg, &mut rng(1))
            .unwrap()
            .xi0,
        1.0
    );
    let blind = ToySensor { p_d: 0.0, ..sensor };
    let births = UniformBirth {
        mu_b: 0.1,
        lo: -10.0,
        hi: 10.0,
    };
    assert_eq!(
        new_po_evaluation(&z, &blind, &births, &cfg, &mut rng(1))
            .unwrap()
            .xi0,
        1.0
    );
}

#[test]
fn new_po_zero_flow_matches_monte_carlo() {
    // H = 0 leaves the particles in place.
    let sensor = ToySensor::new(0.0, 1.0, 0.9, 1.0, 50.0);
    let birth = UniformBirth {
        mu_b: 0.2,
        lo: -10.0,
        hi: 10.0,
    };
    let z = DVector::from_element(1, 0.4);
    let cfg = TrackerConfig {
        n_particles: 100,
        new_po_factor: 20,
        ..Default::default()
    };
    let eval = new_po_evaluation(&z, &sensor, &birth, &cfg, &mut rng(5)).unwrap();
    assert!(eval.flowed);
    assert!((eval.theta - 1.0).abs() < 1e-15);
    let c = 0.9 * 0.2 / (1.0 / 100.0);
    let mut r = rng(99);
    let samples: Vec<f64> = (0..2000)
        .map(|_| c * normal_pdf(0.4, 0.0 * r.random_range(-10.0..10.0), 1.0))
        .collect();
    let (mc, se) = mean_and_se(&samples);
    assert!((eval.xi0 - 1.0 - mc).abs() <= 3.0 * se + 1e-12 * mc);
}

/// `∫_a^b N(z; y, r) dy / (hi − lo)`.
fn uniform_gaussian_integral(a: f64, b: f64, z: f64, r: f64, width: f64) -> f64 {
    let sd = libm::sqrt(r);
    (normal_cdf((b - z) / sd) - normal_cdf((a - z) / sd)) / width
}

// Flowed birth particles only cover the image of the birth interval under
// the affine flow map, so the flow estimate targets the likelihood mass on
// that image.
#[test]
fn new_po_matches_closed_form_integral() {
    let (lo, hi, r, z) = (-10.0, 10.0, 0.25, 2.5);
    let sensor = ToySensor::new(1.0, r, 0.9, 1.0, 50.0);
    let birth = UniformBirth { mu_b: 0.2, lo, hi };
    let scale = 0.9 * 0.2 / (1.0 / 100.0);
    let zv = DVector::from_element(1, z);
    for mode in [ProposalMode::Flow, ProposalMode::Bootstrap] {
        let cfg = TrackerConfig {
            n_particles: 500,
            new_po_factor: 20,
            proposal_mode: mode,
            ..Default::default()
        };
        let oracle = if mode == ProposalMode::Flow {
            let (mean, cov) = birth.moment_match();
            let prior = GaussianSummary::new(mean.clone(), cov).unwrap();
            let (t, c, _, _) =
                crate::flow::flow_map(&mean, &prior, &sensor, &zv, &cfg.schedule).unwrap();
            let (a, b) = (t[(0, 0)] * lo + c[0], t[(0, 0)] * hi + c[0]);
            assert!(b - a < 0.5 * (hi - lo));
            scale * uniform_gaussian_integral(a, b, z, r, hi - lo)
        } else {
            scale * uniform_gaussian_integral(lo, hi, z, r, hi - lo)
        };
        let eval = new_po_evaluation(&zv, &sensor, &birth, &cfg, &mut rng(6)).unwrap();
        let n = eval.existent.len() as f64;
        let contributions: Vec<f64> = eval.existent.iter().map(|v| v * n).collect();
        let (est, se) = mean_and_se(&contributions);
        assert!((eval.xi0 - 1.0 - est).abs() < 1e-9 * est);
        assert!(
            (est - oracle).abs() < 3.0 * se,
            "{mode:?}: {est} vs {oracle} (se {se})"
        );
    }
}

fn legacy_update(
    pred: &PredictedMessage,
    zs: &[f64],
    kappa: &[f64],
    p_d: f64,
) -> (LabeledBelief, LegacyUpdateInfo) {
    let sensor = ToySensor::new(1.0, 1.0, p_d, 1.0, 50.0);
    let eval =
        measurement_evaluation(pred, &sensor, &frame(1, zs), &TrackerConfig::default()).unwrap();
    let n = pred.particles.ncols();
    measurement_update_legacy(
        Label::new(1, 0),
        &eval.extended,
        pred,
        kappa,
        p_d,
        n,
        &mut rng(7),
    )
    .unwrap()
}

#[test]
fn legacy_update_without_measurements() {
    let (alpha_e, p_d) = (0.7, 0.9);
    let pred = gaussian_pred(200, 0.0, 1.0, alpha_e, 8);
    let (b, _) = legacy_update(&pred, &[], &[1.0], p_d);
    let expected = alpha_e * (1.0 - p_d) / (alpha_e * (1.0 - p_d) + (1.0 - alpha_e));
    assert!((b.existence - expected).abs() < 1e-12);
    assert!((b.weights.iter().sum::<f64>() - b.existence).abs() < 1e-9);
}

#[test]
fn legacy_update_ignores_measurements_with_zero_kappa() {
    let pred = gaussian_pred(200, 0.0, 1.0, 0.6, 9);
    let (b, info) = legacy_update(&pred, &[0.5, -1.0], &[1.0, 0.0, 0.0], 0.0);
    assert_eq!(info.selected_block, 0);
    assert!((b.existence - 0.6).abs() < 1e-12);
    // Every resampled particle is a predicted one.
    for x in b.particles.iter() {
        assert!(pred.particles.iter().any(|p| p == x));
    }
}

#[test]
fn legacy_update_ties_pick_smallest_block() {
    let pred = gaussian_pred(50, 0.0, 1.0, 0.9, 10);
    let sensor = ToySensor::new(1.0, 1.0, 0.9, 1.0, 50.0);
    let cfg = TrackerConfig {
        proposal_mode: ProposalMode::Bootstrap,
        ..Default::default()
    };
    let eval = measurement_evaluation(&pred, &sensor, &frame(1, &[0.1, 0.2]), &cfg).unwrap();
    let (_, info) = measurement_update_legacy(
        Label::new(1, 0),
        &eval.extended,
        &pred,
        &[1.0, 0.5, 0.5],
        0.9,
        50,
        &mut rng(1),
    )
    .unwrap();
    assert_eq!(info.selected_block, 0);
}

#[test]
fn legacy_update_prefers_flowed_block() {
    let pred = gaussian_pred(200, 0.0, 25.0, 0.9, 11);
    let (b, info) = legacy_update(&pred, &[6.0], &[1.0, 1.0], 0.9);
    assert_eq!(info.selected_block, 1);
    assert!(b.existence > 0.0 && b.existence <= 1.0);
    let est = b.estimate().unwrap()[0];
    // Kalman posterior mean 25/26 · 6.
    assert!((est - 25.0 / 26.0 * 6.0).abs() < 0.5, "{est}");
}

#[test]
fn degenerate_evidence_gives_zero_existence() {
    // p_s = 1 and existence 1 leave no nonexistent mass; κ(0) = 0 removes the
    // missed-detection term.
    let pred = gaussian_pred(20, 0.0, 1.0, 1.0, 12);
    let (b, info) = legacy_update(&pred, &[1e6], &[0.0, 1.0], 0.9);
    assert!(info.degenerate);
    assert_eq!(b.existence, 0.0);
}

#[test]
fn new_update_examples() {
    let eval = NewPoEvaluation {
        particles: DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]),
        existent: vec![0.5, 1.0, 0.5, 2.0],
        xi0: 5.0,
        theta: 1.0,
        flowed: false,
    };
    let b = measurement_update_new(Label::new(2, 1), &eval, &[0.0, 3.0], 4, &mut rng(1)).unwrap();
    assert_eq!(b.existence, 0.0);
    let b = measurement_update_new(Label::new(2, 1), &eval, &[1.0], 4, &mut rng(1)).unwrap();
    assert!((b.existence - 4.0 / 5.0).abs() < 1e-15);
    assert!((b.weights.iter().sum::<f64>() - b.existence).abs() < 1e-12);
    assert_eq!(b.label, Label::new(2, 1));
    let b = measurement_update_new(Label::new(2, 1), &eval, &[0.5, 0.25, 0.25], 4, &mut rng(1))
        .unwrap();
    assert!((b.existence - 2.0 / 3.0).abs() < 1e-15);
}

fn toy_tracker(
    mode: ProposalMode,
    n: usize,
    seed: u64,
) -> Tracker<ToySensor, RandomWalk, UniformBirth> {
    let cfg = TrackerConfig {
        n_particles: n,
        proposal_mode: mode,
        ..Default::default()
    };
    Tracker::new(
        ToySensor::new(1.0, 1.0, 0.95, 0.1, 100.0),
        RandomWalk { q: 0.5, p_s: 0.999 },
        UniformBirth {
            mu_b: 0.5,
            lo: -50.0,
            hi: 50.0,
        },
        cfg,
        seed,
    )
    .unwrap()
}

#[test]
fn empty_steps() {
    let mut t = toy_tracker(ProposalMode::Flow, 50, 1);
    let out = t.step(&frame(1, &[])).unwrap();
    assert!(out.estimates.is_empty());
    assert!(t.beliefs().is_empty());
    let out = t.step(&frame(2, &[3.0])).unwrap();
    assert_eq!(out.diagnostics.n_before_prune, 1);
    assert_eq!(t.beliefs().len(), 1);
    assert_eq!(t.beliefs()[0].label, Label::new(2, 0));
}

#[test]
fn deterministic_replay() {
    let frames: Vec<MeasurementFrame> = (1..=6)
        .map(|k| frame(k, &[k as f64 * 0.5, -20.0]))
        .collect();
    let run = |seed| {
        let mut t = toy_tracker(ProposalMode::Flow, 80, seed);
        let outs: Vec<StepOutput> = frames.iter().map(|f| t.step(f).unwrap()).collect();
        (outs, t.beliefs().to_vec())
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).1, run(4).1);
}

/// One object starting at 0, measured every step without clutter.
fn toy_frames(steps: u32, seed: u64) -> Vec<MeasurementFrame> {
    let mut r = rng(seed);
    let mut x = 0.0;
    (1..=steps)
        .map(|k| {
            if k > 1 {
                let w: f64 = StandardNormal.sample(&mut r);
                x += libm::sqrt(0.5) * w;
            }
            let e: f64 = StandardNormal.sample(&mut r);
            frame(k, &[x + e])
        })
        .collect()
}

fn track_means(mode: ProposalMode, n: usize, seed: u64, frames: &[MeasurementFrame]) -> Vec<f64> {
    let mut t = toy_tracker(mode, n, seed);
    frames
        .iter()
        .map(|f| {
            t.step(f).unwrap();
            t.beliefs()
                .iter()
                .find(|b| b.label == Label::new(1, 0))
                .and_then(|b| b.estimate())
                .unwrap()[0]
        })
        .collect()
}

#[test]
fn flow_agrees_with_large_bootstrap() {
    let frames = toy_frames(8, 21);
    let reference = track_means(ProposalMode::Bootstrap, 100_000, 1, &frames);
    let runs: Vec<Vec<f64>> = (0..30)
        .map(|s| track_means(ProposalMode::Flow, 100, 100 + s, &frames))
        .collect();
    for k in 0..frames.len() {
        let values: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let (mean, se) = mean_and_se(&values);
        // The reference carries about 1/1000 of a single small run's variance.
        let sd = se * libm::sqrt(values.len() as f64);
        let combined = libm::sqrt(se * se + sd * sd * 100.0 / 100_000.0);
        assert!(
            (mean - reference[k]).abs() < 3.0 * combined,
            "step {}: {mean} vs {}",
            k + 1,
            reference[k]
        );
    }
}

fn check_beliefs(beliefs: &[LabeledBelief]) {
    let mut labels: Vec<Label> = beliefs.iter().map(|b| b.label).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), beliefs.len(), "labels unique");
    for b in beliefs {
        assert!((0.0..=1.0).contains(&b.existence));
        assert!(b
            .weights
            .iter()
            .all(|w| w.is_finite() && (0.0..=1.0).contains(w)));
        assert!((b.weights.iter().sum::<f64>() - b.existence).abs() < 1e-9);
        assert!(b.particles.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn invariants_over_randomized_tdoa_steps() {
    let scn = default_scenario().truncated(4, 200).unwrap();
    let mut steps = 0;
    for (seed, mode) in [
        (1, ProposalMode::Flow),
        (2, ProposalMode::Bootstrap),
        (3, ProposalMode::Flow),
    ] {
        let sim = simulate(&scn, &mut rng(seed)).unwrap();
        let cfg = TrackerConfig {
            n_particles: 40,
            new_po_factor: 10,
            proposal_mode: mode,
            ..Default::default()
        };
        let mut t = Tracker::new(scn.sensor.clone(), scn.motion, scn.birth, cfg, seed).unwrap();
        let frames = if seed == 3 {
            &sim.frames[..100]
        } else {
            &sim.frames[..]
        };
        for f in frames {
            let before = t.beliefs().len();
            let out = t.step(f).unwrap();
            let d = &out.diagnostics;
            assert_eq!(d.n_before_prune, before + f.len());
            assert_eq!(t.beliefs().len(), d.n_before_prune - d.pruned - d.evicted);
            for l in &d.legacy {
                assert_eq!(l.beta[0], (1.0 - scn.sensor.p_d) * l.alpha_e + l.alpha_n);
                assert!(l.beta.iter().all(|b| b.is_finite() && *b >= 0.0));
            }
            for e in &out.estimates {
                assert!(e.existence > 0.5 && e.existence <= 1.0);
            }
            check_beliefs(t.beliefs());
            steps += 1;
        }
    }
    assert!(steps >= 500);
}

#[test]
fn randomized_frames_keep_invariants() {
    let roi = Aabb::new([-500.0, -500.0, -500.0], [500.0, 500.0, 0.0]).unwrap();
    let sensor = TdoaModel::from_arrays(
        &[[250.0, 0.0, -10.0], [0.0, 250.0, -10.0]],
        10.0,
        1500.0,
        3e-6,
        0.9,
        1.0,
        roi,
    )
    .unwrap();
    let birth = BirthModel::new(0.011, roi, Aabb::symmetric(10.0).unwrap()).unwrap();
    let motion = CvMotionModel::new(1.0, 0.01, 0.999).unwrap();
    let cfg = TrackerConfig {
        n_particles: 30,
        new_po_factor: 5,
        ..Default::default()
    };
    let mut t = Tracker::new(sensor.clone(), motion, birth, cfg, 77).unwrap();
    let mut r = rng(123);
    for k in 1..=500 {
        let n = r.random_range(0..4);
        let zs: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                if r.random_bool(0.5) {
                    let x: Vec<f64> = (0..3)
                        .map(|i| r.random_range(roi.min[i]..roi.max[i]))
                        .collect();
                    sensor.tdoa(&[x[0], x[1], x[2], 0.0, 0.0, 0.0]).unwrap()
                } else {
                    sensor.sample_clutter(&mut r)
                }
            })
            .collect();
        t.step(&MeasurementFrame::new(k, zs)).unwrap();
        check_beliefs(t.beliefs());
    }
}

#[test]
fn cap_evicts_lowest_existence() {
    let mut t = toy_tracker(ProposalMode::Bootstrap, 20, 5);
    t.cfg.max_pos = 2;
    let out = t.step(&frame(1, &[-30.0, 0.0, 30.0])).unwrap();
    assert_eq!(out.diagnostics.evicted, 1);
    assert_eq!(t.beliefs().len(), 2);
}

#[test]
fn new_tdoa_object_is_localized_with_prior_velocities() {
    let scn = default_scenario();
    let cfg = TrackerConfig {
        n_particles: 200,
        ..Default::default()
    };
    let mut t = Tracker::new(scn.sensor.clone(), scn.motion, scn.birth, cfg, 9).unwrap();
    let truth = [120.0, -80.0, -300.0, 0.0, 0.0, 0.0];
    let out = t
        .step(&MeasurementFrame::new(
            1,
            vec![scn.sensor.tdoa(&truth).unwrap()],
        ))
        .unwrap();
    assert_eq!(out.estimates.len(), 1);
    let e = &out.estimates[0];
    assert!(e.existence > 0.999);
    let err = (0..3)
        .map(|i| (e.state[i] - truth[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err < 1.0, "position error {err}");
    // Uniform on [-10, 10]: standard deviation 10/√3.
    let b = &t.beliefs()[0];
    for i in 3..6 {
        let v: Vec<f64> = b.particles.row(i).iter().copied().collect();
        let (mean, se) = mean_and_se(&v);
        let sd = se * (v.len() as f64).sqrt();
        assert!(
            mean.abs() < 1.5 && (sd - 10.0 / 3f64.sqrt()).abs() < 1.0,
            "velocity {i}: {mean} {sd}"
        );
    }
}
