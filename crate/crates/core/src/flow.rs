//! Exact Daum-Huang particle flow with per-step linearization.
//!
//! For a Gaussian prior `N(x*₀, P)` and a linear model `z = Hx + v`,
//! `v ~ N(0, R)`, particles are moved through pseudo-time λ ∈ [0, 1] along
//! `dx/dλ = A(λ)x + b(λ)` with
//!
//! ```text
//! A(λ) = -½ P Hᵀ (λ H P Hᵀ + R)⁻¹ H
//! b(λ) = (I + 2λA) [ (I + λA) P Hᵀ R⁻¹ z + A x*₀ ]
//! ```
//!
//! Nonlinear models are linearized at an auxiliary mean that is carried along
//! the same Euler steps as the particles. Because the velocity field is
//! affine and shared by every particle, each Euler step is the affine map
//! `x ↦ (I + Δλ A)x + Δλ b`; [`run_flow`] composes the steps and applies the
//! product once. The mapping factor `θ = Π |det(I + Δλ A)|` is the Jacobian
//! determinant of that map, so the density of a migrated particle under the
//! flow proposal is `prior(x₀) / θ`.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::{regularize_covariance, weighted_moments};
use crate::{Error, Result};

/// Below this `|det(I + Δλ A)|` the flow map is treated as non-invertible.
pub const MIN_STEP_DET: f64 = 1e-12;

/// Pseudo-time grid `0 = λ₀ < λ₁ < … < λ_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSchedule {
    lambdas: Vec<f64>,
}

impl FlowSchedule {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 {
            return Err(Error::invalid("flow schedule needs at least one step"));
        }
        if lambdas[0] != 0.0 || *lambdas.last().unwrap() != 1.0 {
            return Err(Error::invalid("flow schedule must start at 0 and end at 1"));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("flow schedule must be strictly increasing"));
        }
        Ok(Self { lambdas })
    }

    /// Evenly spaced grid with `n_steps` steps.
    pub fn uniform(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be positive"));
        }
        let mut lambdas: Vec<f64> = (0..=n_steps).map(|l| l as f64 / n_steps as f64).collect();
        lambdas[n_steps] = 1.0;
        Self::new(lambdas)
    }

    /// Geometrically growing steps `first_step · ratio^(l-1)`, rescaled so
    /// the last grid point is exactly 1.
    pub fn geometric(n_steps: usize, first_step: f64, ratio: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be positive"));
        }
        if !(first_step > 0.0) || !first_step.is_finite() {
            return Err(Error::invalid("first_step must be positive"));
        }
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::invalid("ratio must exceed 1"));
        }
        let mut steps = Vec::with_capacity(n_steps);
        let mut step = first_step;
        for _ in 0..n_steps {
            steps.push(step);
            step *= ratio;
        }
        let total: f64 = steps.iter().sum();
        let mut lambdas = Vec::with_capacity(n_steps + 1);
        let mut acc = 0.0;
        lambdas.push(0.0);
        for s in &steps {
            acc += s / total;
            lambdas.push(acc);
        }
        lambdas[n_steps] = 1.0;
        Self::new(lambdas)
    }

    /// The schedule used when nothing else is configured: 29 steps, first
    /// step 1e-3, ratio 1.2.
    pub fn default_geometric() -> Self {
        Self::geometric(29, 1e-3, 1.2).expect("valid default schedule")
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_steps(&self) -> usize {
        self.lambdas.len() - 1
    }

    /// `(λ_l, λ_l - λ_{l-1})` for `l = 1..=N`.
    pub fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas.windows(2).map(|w| (w[1], w[1] - w[0]))
    }
}

impl Default for FlowSchedule {
    fn default() -> Self {
        Self::default_geometric()
    }
}

/// Mean and covariance of a Gaussian approximation to a predicted belief.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                context: "GaussianSummary",
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        Ok(Self { mean, cov })
    }

    /// Moment-matched Gaussian of a weighted particle set; the weights are
    /// normalized by their sum.
    pub fn from_weighted_particles(particles: &DMatrix<f64>, weights: &[f64]) -> Result<Self> {
        let (mean, cov) = weighted_moments(particles, weights)?;
        Ok(Self { mean, cov })
    }

    /// Same mean, covariance symmetrized with its spectrum floored.
    pub fn regularized(&self) -> Self {
        Self {
            mean: self.mean.clone(),
            cov: regularize_covariance(&self.cov),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A measurement model the flow can linearize.
pub trait MeasurementModel {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    /// Noise-free measurement `h(x)`.
    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Jacobian of `h` at `x` (`measurement_dim × state_dim`).
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
    /// Additive noise covariance.
    fn noise_cov(&self) -> DMatrix<f64>;
    /// `log f(z | x)`.
    fn log_likelihood(&self, z: &DVector<f64>, x: &DVector<f64>) -> Result<f64>;
}

/// `z = Hx + v`, `v ~ N(0, R)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    r_chol: Cholesky<f64, nalgebra::Dyn>,
}

impl LinearGaussianModel {
    pub fn new(h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if r.nrows() != h.nrows() || r.ncols() != h.nrows() {
            return Err(Error::DimensionMismatch {
                context: "LinearGaussianModel",
                expected: h.nrows(),
                found: r.nrows(),
            });
        }
        let r_chol =
            Cholesky::new(r.clone()).ok_or(Error::NotPositiveDefinite("measurement noise"))?;
        Ok(Self { h, r, r_chol })
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
}

impl MeasurementModel for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        self.h.ncols()
    }

    fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.h * x)
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.h.clone())
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }

    fn log_likelihood(&self, z: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        let mut d = z - &self.h * x;
        let l = self.r_chol.l();
        l.solve_lower_triangular_mut(&mut d);
        let log_det: f64 = l.diagonal().iter().map(|v| 2.0 * libm::log(*v)).sum();
        let m = z.len() as f64;
        Ok(-0.5 * (d.norm_squared() + log_det + m * libm::log(2.0 * core::f64::consts::PI)))
    }
}

/// Local linear model `z_eff ≈ H x + v`, `v ~ N(0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedMeasurement {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub z_eff: DVector<f64>,
}

/// First-order expansion of `model` at `x_star`, with the effective
/// measurement `z - h(x*) + H x*`.
pub fn linearize<M: MeasurementModel + ?Sized>(
    model: &M,
    x_star: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<LinearizedMeasurement> {
    if z.len() != model.measurement_dim() {
        return Err(Error::DimensionMismatch {
            context: "linearize",
            expected: model.measurement_dim(),
            found: z.len(),
        });
    }
    let h = model.jacobian(x_star)?;
    let z_eff = z - model.predict(x_star)? + &h * x_star;
    Ok(LinearizedMeasurement {
        h,
        r: model.noise_cov(),
        z_eff,
    })
}

/// Flow coefficients `(A(λ), b(λ))` for the linearized model.
pub fn edh_coefficients(
    prior: &GaussianSummary,
    lin: &LinearizedMeasurement,
    lambda: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dim = prior.dim();
    if lin.h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "edh_coefficients",
            expected: dim,
            found: lin.h.ncols(),
        });
    }
    let p = &prior.cov;
    let pht = p * lin.h.transpose();
    let s = &lin.h * &pht * lambda + &lin.r;
    let s_chol = Cholesky::new(s).ok_or(Error::SingularInnovation { lambda })?;
    let s_inv_h = s_chol.solve(&lin.h);
    let a = &pht * s_inv_h * -0.5;

    let r_chol =
        Cholesky::new(lin.r.clone()).ok_or(Error::NotPositiveDefinite("measurement noise"))?;
    let r_inv_z = r_chol.solve(&lin.z_eff);
    let eye = DMatrix::<f64>::identity(dim, dim);
    let inner = (&eye + &a * lambda) * (&pht * r_inv_z) + &a * &prior.mean;
    let b = (&eye + &a * (2.0 * lambda)) * inner;
    Ok((a, b))
}

/// Output of [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowResult {
    /// Migrated particles, column-wise, same order as the input.
    pub particles: DMatrix<f64>,
    pub aux_mean: DVector<f64>,
    /// Mapping factor `Π |det(I + Δλ Ã(λ_l))|`.
    pub theta: f64,
}

/// Migrates `particles` (column-wise) from λ = 0 to λ = 1.
///
/// The auxiliary mean starts at `aux_mean` and is the linearization point
/// of every step. The caller is expected to pass a prior whose covariance has
/// already been regularized if it may be degenerate.
pub fn run_flow<M: MeasurementModel + ?Sized>(
    particles: &DMatrix<f64>,
    aux_mean: &DVector<f64>,
    prior: &GaussianSummary,
    model: &M,
    z: &DVector<f64>,
    schedule: &FlowSchedule,
) -> Result<FlowResult> {
    let dim = prior.dim();
    if particles.ncols() == 0 {
        return Err(Error::invalid("run_flow needs at least one particle"));
    }
    if particles.nrows() != dim || aux_mean.len() != dim || model.state_dim() != dim {
        return Err(Error::DimensionMismatch {
            context: "run_flow",
            expected: dim,
            found: particles.nrows(),
        });
    }
    let (map, offset, aux, theta) = flow_map(aux_mean, prior, model, z, schedule)?;
    let mut out = &map * particles;
    for mut col in out.column_iter_mut() {
        col += &offset;
    }
    Ok(FlowResult {
        particles: out,
        aux_mean: aux,
        theta,
    })
}

/// Composed affine flow map `x ↦ T x + c`, the final auxiliary mean, and θ.
pub fn flow_map<M: MeasurementModel + ?Sized>(
    aux_mean: &DVector<f64>,
    prior: &GaussianSummary,
    model: &M,
    z: &DVector<f64>,
    schedule: &FlowSchedule,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>, f64)> {
    let dim = prior.dim();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let mut map = eye.clone();
    let mut offset = DVector::<f64>::zeros(dim);
    let mut aux = aux_mean.clone();
    let mut theta = 1.0;
    for (step, (lambda, dl)) in schedule.steps().enumerate() {
        let lin = linearize(model, &aux, z)?;
        let (a, b) = edh_coefficients(prior, &lin, lambda)?;
        let m = &eye + a * dl;
        let det = m.clone().lu().determinant().abs();
        if !(det >= MIN_STEP_DET) {
            return Err(Error::InvertibilityViolation {
                step: step + 1,
                det,
            });
        }
        theta *= det;
        let shift = b * dl;
        aux = &m * aux + &shift;
        offset = &m * offset + &shift;
        map = &m * map;
    }
    Ok((map, offset, aux, theta))
}
