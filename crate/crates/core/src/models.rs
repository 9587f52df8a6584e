//! Motion, sensor, clutter and birth models.
//!
//! States are `[x, y, z, vx, vy, vz]` in m and m/s.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::flow::MeasurementModel;
use crate::{Error, Result, STATE_DIM};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Distances below this (m) count as coincident with a receiver.
const MIN_RANGE: f64 = 1e-9;

/// Axis-aligned box in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|i| !(max[i] > min[i]) || !min[i].is_finite() || !max[i].is_finite()) {
            return Err(Error::invalid("box needs max > min on every axis"));
        }
        Ok(Self { min, max })
    }

    /// `[-b, b]³`.
    pub fn symmetric(b: f64) -> Result<Self> {
        Self::new([-b; 3], [b; 3])
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> [f64; 3] {
        core::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn widths(&self) -> [f64; 3] {
        core::array::from_fn(|i| self.max[i] - self.min[i])
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }
}

/// Constant-velocity motion with discrete white-noise acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvMotionModel {
    pub dt: f64,
    /// Acceleration noise variance (m²/s⁴).
    pub drive_var: f64,
    pub survival_prob: f64,
}

impl CvMotionModel {
    pub fn new(dt: f64, drive_var: f64, survival_prob: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(drive_var >= 0.0) || !drive_var.is_finite() {
            return Err(Error::invalid("drive_var must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&survival_prob) {
            return Err(Error::invalid("survival_prob must lie in [0, 1]"));
        }
        Ok(Self {
            dt,
            drive_var,
            survival_prob,
        })
    }

    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let mut f = DMatrix::identity(STATE_DIM, STATE_DIM);
        for i in 0..3 {
            f[(i, i + 3)] = self.dt;
        }
        f
    }

    /// `Q = q · [[dt⁴/4, dt³/2], [dt³/2, dt²]]` on every axis.
    pub fn process_cov(&self) -> DMatrix<f64> {
        let (dt, q) = (self.dt, self.drive_var);
        let mut m = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for i in 0..3 {
            m[(i, i)] = q * (dt * dt * dt * dt) / 4.0;
            m[(i, i + 3)] = q * dt * dt * dt / 2.0;
            m[(i + 3, i)] = q * (dt * dt * dt) / 2.0;
            m[(i + 3, i + 3)] = q * dt * dt;
        }
        m
    }

    /// One noisy transition of a single state.
    pub fn predict<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let mut m = DMatrix::from_column_slice(STATE_DIM, 1, x.as_slice());
        self.predict_columns(&mut m, rng);
        DVector::from_column_slice(m.as_slice())
    }

    /// Transitions every column of `particles` in place.
    ///
    /// The noise is `[dt²/2; dt] · a` per axis with `a ~ N(0, drive_var)`,
    /// whose covariance is exactly [`CvMotionModel::process_cov`].
    pub fn predict_columns<R: Rng + ?Sized>(&self, particles: &mut DMatrix<f64>, rng: &mut R) {
        let dt = self.dt;
        let sd = libm::sqrt(self.drive_var);
        for mut col in particles.column_iter_mut() {
            for i in 0..3 {
                col[i] += dt * col[i + 3];
            }
            if sd > 0.0 {
                for i in 0..3 {
                    let e: f64 = StandardNormal.sample(rng);
                    let a = sd * e;
                    col[i] += 0.5 * dt * dt * a;
                    col[i + 3] += dt * a;
                }
            }
        }
    }
}

/// TDOA measurements from receiver pairs, with detection and clutter
/// parameters of the sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TdoaModel {
    pub receivers: Vec<[f64; 3]>,
    /// `(s, t)` receiver indices; component l is `(‖p − p_s‖ − ‖p − p_t‖)/c`.
    pub pairs: Vec<(usize, usize)>,
    /// Propagation speed (m/s).
    pub c: f64,
    /// Noise standard deviation (s).
    pub sigma_v: f64,
    pub p_d: f64,
    pub clutter_mean: f64,
    pub roi: Aabb,
}

impl TdoaModel {
    pub fn new(
        receivers: Vec<[f64; 3]>,
        pairs: Vec<(usize, usize)>,
        c: f64,
        sigma_v: f64,
        p_d: f64,
        clutter_mean: f64,
        roi: Aabb,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("at least one receiver pair is required"));
        }
        for &(s, t) in &pairs {
            if s >= receivers.len() || t >= receivers.len() {
                return Err(Error::invalid("receiver pair index out of range"));
            }
            if dist(&receivers[s], &receivers[t]) <= MIN_RANGE {
                return Err(Error::invalid("receiver pair with zero baseline"));
            }
        }
        if !(c > 0.0) || !(sigma_v > 0.0) {
            return Err(Error::invalid(
                "propagation speed and noise std must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&p_d) {
            return Err(Error::invalid("p_d must lie in [0, 1]"));
        }
        if !(clutter_mean >= 0.0) || !clutter_mean.is_finite() {
            return Err(Error::invalid("clutter_mean must be nonnegative"));
        }
        Ok(Self {
            receivers,
            pairs,
            c,
            sigma_v,
            p_d,
            clutter_mean,
            roi,
        })
    }

    /// Receivers of one five-element array: center plus `(±arm, 0, 0)` and
    /// `(0, ±arm, 0)`, in the order center, +x, −x, +y, −y.
    pub fn array_receivers(center: [f64; 3], arm: f64) -> [[f64; 3]; 5] {
        let [x, y, z] = center;
        [
            [x, y, z],
            [x + arm, y, z],
            [x - arm, y, z],
            [x, y + arm, z],
            [x, y - arm, z],
        ]
    }

    /// Six pairs of an array whose receivers start at `base`: center with
    /// each outrigger, then the two opposite-outrigger pairs.
    pub fn array_pairs(base: usize) -> [(usize, usize); 6] {
        let b = base;
        [
            (b, b + 1),
            (b, b + 2),
            (b, b + 3),
            (b, b + 4),
            (b + 1, b + 2),
            (b + 3, b + 4),
        ]
    }

    /// Several identical arrays, six pairs each.
    pub fn from_arrays(
        centers: &[[f64; 3]],
        arm: f64,
        c: f64,
        sigma_v: f64,
        p_d: f64,
        clutter_mean: f64,
        roi: Aabb,
    ) -> Result<Self> {
        let mut receivers = Vec::new();
        let mut pairs = Vec::new();
        for &center in centers {
            pairs.extend(Self::array_pairs(receivers.len()));
            receivers.extend(Self::array_receivers(center, arm));
        }
        Self::new(receivers, pairs, c, sigma_v, p_d, clutter_mean, roi)
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Largest magnitude of pair l's noise-free TDOA: `‖p_s − p_t‖ / c`.
    pub fn max_tdoa(&self, l: usize) -> f64 {
        let (s, t) = self.pairs[l];
        dist(&self.receivers[s], &self.receivers[t]) / self.c
    }

    fn ranges(&self, pos: &[f64]) -> Result<Vec<f64>> {
        self.receivers
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d = dist(pos, r);
                if d <= MIN_RANGE {
                    Err(Error::ReceiverSingularity { receiver: i })
                } else {
                    Ok(d)
                }
            })
            .collect()
    }

    /// Noise-free TDOA vector of a state (only the position is used).
    pub fn tdoa(&self, x: &[f64]) -> Result<DVector<f64>> {
        let ranges = self.ranges(&x[..3])?;
        Ok(DVector::from_iterator(
            self.pairs.len(),
            self.pairs
                .iter()
                .map(|&(s, t)| (ranges[s] - ranges[t]) / self.c),
        ))
    }

    /// `log f(z | x)`: independent Gaussians around the noise-free TDOAs.
    pub fn log_likelihood_at(&self, z: &[f64], x: &[f64]) -> f64 {
        let p = &x[..3];
        let mut ranges = [0.0f64; 32];
        let ranges: &mut [f64] = if self.receivers.len() <= 32 {
            &mut ranges[..self.receivers.len()]
        } else {
            return self.log_likelihood_slow(z, x);
        };
        for (r, rx) in ranges.iter_mut().zip(&self.receivers) {
            *r = dist(p, rx);
        }
        let inv = 1.0 / (self.c * self.sigma_v);
        let zs = self.c * inv;
        let mut ss = 0.0;
        for (&(s, t), &zl) in self.pairs.iter().zip(z) {
            let e = zl * zs - (ranges[s] - ranges[t]) * inv;
            ss += e * e;
        }
        -0.5 * ss - self.pairs.len() as f64 * (LN_SQRT_2PI + libm::log(self.sigma_v))
    }

    fn log_likelihood_slow(&self, z: &[f64], x: &[f64]) -> f64 {
        let p = &x[..3];
        let mut ss = 0.0;
        for (&(s, t), &zl) in self.pairs.iter().zip(z) {
            let h = (dist(p, &self.receivers[s]) - dist(p, &self.receivers[t])) / self.c;
            let e = (zl - h) / self.sigma_v;
            ss += e * e;
        }
        -0.5 * ss - self.pairs.len() as f64 * (LN_SQRT_2PI + libm::log(self.sigma_v))
    }

    /// `log f_c(z)`: product of per-pair uniforms on `[-max_tdoa, max_tdoa]`,
    /// `-∞` outside.
    pub fn clutter_logpdf(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for l in 0..self.pairs.len() {
            let half = self.max_tdoa(l);
            if !(z[l].abs() <= half) {
                return f64::NEG_INFINITY;
            }
            acc -= libm::log(2.0 * half);
        }
        acc
    }

    /// Value of [`TdoaModel::clutter_logpdf`] inside the support.
    pub fn clutter_logpdf_interior(&self) -> f64 {
        (0..self.pairs.len())
            .map(|l| -libm::log(2.0 * self.max_tdoa(l)))
            .sum()
    }

    /// Draws one clutter vector uniformly from the clutter support.
    pub fn sample_clutter<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            (0..self.pairs.len()).map(|l| {
                let half = self.max_tdoa(l);
                rng.random_range(-half..=half)
            }),
        )
    }
}

impl MeasurementModel for TdoaModel {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn measurement_dim(&self) -> usize {
        self.pairs.len()
    }

    fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.tdoa(x.as_slice())
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = &x.as_slice()[..3];
        let ranges = self.ranges(p)?;
        let mut h = DMatrix::zeros(self.pairs.len(), STATE_DIM);
        for (l, &(s, t)) in self.pairs.iter().enumerate() {
            for i in 0..3 {
                let us = (p[i] - self.receivers[s][i]) / ranges[s];
                let ut = (p[i] - self.receivers[t][i]) / ranges[t];
                h[(l, i)] = (us - ut) / self.c;
            }
        }
        Ok(h)
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        DMatrix::identity(self.pairs.len(), self.pairs.len()) * (self.sigma_v * self.sigma_v)
    }

    fn log_likelihood(&self, z: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        if z.len() != self.pairs.len() {
            return Err(Error::DimensionMismatch {
                context: "TdoaModel::log_likelihood",
                expected: self.pairs.len(),
                found: z.len(),
            });
        }
        Ok(self.log_likelihood_at(z.as_slice(), x.as_slice()))
    }
}

/// Poisson birth process with a density uniform on a position box times a
/// velocity box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthModel {
    pub mean_births: f64,
    pub position_box: Aabb,
    pub velocity_box: Aabb,
}

impl BirthModel {
    pub fn new(mean_births: f64, position_box: Aabb, velocity_box: Aabb) -> Result<Self> {
        if !(mean_births >= 0.0) || !mean_births.is_finite() {
            return Err(Error::invalid("mean_births must be nonnegative"));
        }
        Ok(Self {
            mean_births,
            position_box,
            velocity_box,
        })
    }

    /// `n` states drawn from the birth density, column-wise.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(STATE_DIM, n);
        for mut col in out.column_iter_mut() {
            for i in 0..3 {
                col[i] = rng.random_range(self.position_box.min[i]..self.position_box.max[i]);
            }
            for i in 0..3 {
                col[i + 3] = rng.random_range(self.velocity_box.min[i]..self.velocity_box.max[i]);
            }
        }
        out
    }

    /// Overwrites the velocity rows of every column with fresh draws from
    /// the velocity box.
    pub fn resample_velocities<R: Rng + ?Sized>(&self, particles: &mut DMatrix<f64>, rng: &mut R) {
        for mut col in particles.column_iter_mut() {
            for i in 0..3 {
                col[i + 3] = rng.random_range(self.velocity_box.min[i]..self.velocity_box.max[i]);
            }
        }
    }

    /// Log of the (constant) density inside the support.
    pub fn log_density(&self) -> f64 {
        -libm::log(self.position_box.volume()) - libm::log(self.velocity_box.volume())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.position_box.contains(&x[..3]) && self.velocity_box.contains(&x[3..6])
    }

    pub fn logpdf(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            self.log_density()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Mean and covariance of the uniform birth density.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let pc = self.position_box.center();
        let vc = self.velocity_box.center();
        let pw = self.position_box.widths();
        let vw = self.velocity_box.widths();
        let mean = DVector::from_iterator(STATE_DIM, pc.into_iter().chain(vc));
        let var = DVector::from_iterator(STATE_DIM, pw.into_iter().chain(vw).map(|w| w * w / 12.0));
        (mean, DMatrix::from_diagonal(&var))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    libm::sqrt(dx * dx + dy * dy + dz * dz)
}
