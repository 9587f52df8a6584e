//! Model interfaces the tracker is generic over.

use nalgebra::{DMatrix, DVector};

use crate::flow::MeasurementModel;
use crate::models::{BirthModel, CvMotionModel, TdoaModel};
use crate::rng::StreamRng;

/// Measurement model with detection and clutter statistics.
pub trait Sensor: MeasurementModel {
    fn detection_prob(&self) -> f64;
    fn clutter_rate(&self) -> f64;
    /// `log f_c(z)`; must be finite for every measurement the tracker sees.
    fn clutter_log_density(&self, z: &[f64]) -> f64;
    /// `log f(z | x)` for a state given as a slice.
    fn log_lik(&self, z: &[f64], x: &[f64]) -> f64;
    /// True when the likelihood depends on the position rows only.
    fn position_only(&self) -> bool {
        false
    }
}

pub trait Motion {
    fn survival_prob(&self) -> f64;
    /// Propagates every column of `particles` in place.
    fn propagate(&self, particles: &mut DMatrix<f64>, rng: &mut StreamRng);
}

/// Poisson birth process with density `f_b`.
pub trait BirthProcess {
    fn birth_rate(&self) -> f64;
    fn sample_states(&self, n: usize, rng: &mut StreamRng) -> DMatrix<f64>;
    /// `log f_b(x)`, `-∞` outside the support.
    fn log_density_at(&self, x: &[f64]) -> f64;
    /// Mean and covariance of `f_b`.
    fn moment_match(&self) -> (DVector<f64>, DMatrix<f64>);
    /// If `f_b` factorizes into position and velocity, replaces the velocity
    /// rows with independent draws from its velocity marginal and returns
    /// true. The default does nothing.
    fn redraw_velocities(&self, _particles: &mut DMatrix<f64>, _rng: &mut StreamRng) -> bool {
        false
    }
}

impl Sensor for TdoaModel {
    fn detection_prob(&self) -> f64 {
        self.p_d
    }

    fn clutter_rate(&self) -> f64 {
        self.clutter_mean
    }

    /// Noisy detections can fall just outside the clutter support; they are
    /// scored with the in-support density instead of zero.
    fn clutter_log_density(&self, z: &[f64]) -> f64 {
        let v = self.clutter_logpdf(z);
        if v.is_finite() {
            v
        } else {
            self.clutter_logpdf_interior()
        }
    }

    fn log_lik(&self, z: &[f64], x: &[f64]) -> f64 {
        self.log_likelihood_at(z, x)
    }

    fn position_only(&self) -> bool {
        true
    }
}

impl Motion for CvMotionModel {
    fn survival_prob(&self) -> f64 {
        self.survival_prob
    }

    fn propagate(&self, particles: &mut DMatrix<f64>, rng: &mut StreamRng) {
        self.predict_columns(particles, rng);
    }
}

impl BirthProcess for BirthModel {
    fn birth_rate(&self) -> f64 {
        self.mean_births
    }

    fn sample_states(&self, n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
        self.sample(n, rng)
    }

    fn log_density_at(&self, x: &[f64]) -> f64 {
        self.logpdf(x)
    }

    fn moment_match(&self) -> (DVector<f64>, DMatrix<f64>) {
        self.moments()
    }

    fn redraw_velocities(&self, particles: &mut DMatrix<f64>, rng: &mut StreamRng) -> bool {
        self.resample_velocities(particles, rng);
        true
    }
}
