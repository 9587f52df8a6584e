//! Ground-truth scenario generation and measurement simulation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};

use crate::models::{Aabb, BirthModel, CvMotionModel, TdoaModel};
use crate::{Error, Result, STATE_DIM};

/// One object of the ground truth: present for `birth ≤ k < death`
/// (through the last step if `death` is `None`), with `initial` its state at
/// step `birth`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthObject {
    pub birth: u32,
    pub death: Option<u32>,
    pub initial: [f64; STATE_DIM],
}

impl TruthObject {
    pub fn alive_at(&self, k: u32) -> bool {
        k >= self.birth && self.death.is_none_or(|d| k < d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_steps: u32,
    pub objects: Vec<TruthObject>,
    pub motion: CvMotionModel,
    pub sensor: TdoaModel,
    pub birth: BirthModel,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        n_steps: u32,
        objects: Vec<TruthObject>,
        motion: CvMotionModel,
        sensor: TdoaModel,
        birth: BirthModel,
        seed: u64,
    ) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("scenario needs at least one step"));
        }
        for o in &objects {
            if o.birth < 1 || o.birth > n_steps {
                return Err(Error::invalid("object birth step outside 1..=n_steps"));
            }
            if let Some(d) = o.death {
                if d <= o.birth || d > n_steps {
                    return Err(Error::invalid(
                        "object death must satisfy birth < death <= n_steps",
                    ));
                }
            }
            if o.initial.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("object initial state must be finite"));
            }
        }
        Ok(Self {
            n_steps,
            objects,
            motion,
            sensor,
            birth,
            seed,
        })
    }

    /// Keeps the first `n_objects` objects and the first `n_steps` steps.
    /// Deaths after the new horizon become `None`; objects born after it are
    /// dropped.
    pub fn truncated(&self, n_objects: usize, n_steps: u32) -> Result<Self> {
        let objects = self
            .objects
            .iter()
            .take(n_objects)
            .filter(|o| o.birth <= n_steps)
            .map(|o| TruthObject {
                death: o.death.filter(|&d| d <= n_steps),
                ..o.clone()
            })
            .collect();
        Self::new(
            n_steps,
            objects,
            self.motion,
            self.sensor.clone(),
            self.birth,
            self.seed,
        )
    }
}

/// Parameters from which [`Scenario`] is built. The defaults reproduce the
/// eight-object crossing scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub n_steps: u32,
    pub birth_steps: Vec<u32>,
    /// Paired with the births from the second one on; the first-born object
    /// persists when there is one fewer death than births.
    pub death_steps: Vec<u32>,
    pub roi: Aabb,
    pub velocity_bound: f64,
    pub array_centers: Vec<[f64; 3]>,
    pub array_arm: f64,
    pub c: f64,
    pub sigma_v: f64,
    pub p_d: f64,
    pub clutter_mean: f64,
    pub mean_births: f64,
    pub survival_prob: f64,
    pub drive_var: f64,
    pub dt: f64,
    /// Objects start this far from the crossing point, horizontally.
    pub start_radius: f64,
    /// Azimuth increment between consecutive objects, degrees.
    pub azimuth_step_deg: f64,
    pub crossing_point: [f64; 3],
    /// Nominal speed is `start_radius / (speed_horizon − birth)`, clamped.
    pub speed_horizon: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_steps: 200,
            birth_steps: vec![1, 10, 20, 30, 40, 50, 60, 70],
            death_steps: vec![130, 140, 150, 160, 170, 180, 190],
            roi: Aabb {
                min: [-500.0, -500.0, -500.0],
                max: [500.0, 500.0, 0.0],
            },
            velocity_bound: 10.0,
            array_centers: vec![[250.0, 0.0, -10.0], [0.0, 250.0, -10.0]],
            array_arm: 10.0,
            c: 1500.0,
            sigma_v: 3e-6,
            p_d: 0.9,
            clutter_mean: 1.0,
            mean_births: 0.011,
            survival_prob: 0.999,
            drive_var: 0.01,
            dt: 1.0,
            start_radius: 400.0,
            azimuth_step_deg: 45.0,
            crossing_point: [0.0, 0.0, -250.0],
            speed_horizon: 100.0,
            speed_min: 2.0,
            speed_max: 8.0,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn motion(&self) -> Result<CvMotionModel> {
        CvMotionModel::new(self.dt, self.drive_var, self.survival_prob)
    }

    pub fn sensor(&self) -> Result<TdoaModel> {
        TdoaModel::from_arrays(
            &self.array_centers,
            self.array_arm,
            self.c,
            self.sigma_v,
            self.p_d,
            self.clutter_mean,
            self.roi,
        )
    }

    pub fn birth_model(&self) -> Result<BirthModel> {
        BirthModel::new(
            self.mean_births,
            self.roi,
            Aabb::symmetric(self.velocity_bound)?,
        )
    }

    /// Initial state of the `j`-th object born at `birth`: on a circle around
    /// the crossing point, heading straight for it.
    pub fn initial_state(&self, j: usize, birth: u32) -> [f64; STATE_DIM] {
        let az = (self.azimuth_step_deg * j as f64).to_radians();
        let (s, c) = libm::sincos(az);
        let p = self.crossing_point;
        let horizon = self.speed_horizon - birth as f64;
        let nominal = if horizon > 0.0 {
            self.start_radius / horizon
        } else {
            self.speed_max
        };
        let speed = nominal.clamp(self.speed_min, self.speed_max);
        [
            p[0] + self.start_radius * c,
            p[1] + self.start_radius * s,
            p[2],
            -speed * c,
            -speed * s,
            0.0,
        ]
    }

    pub fn build(&self) -> Result<Scenario> {
        if self.death_steps.len() > self.birth_steps.len() {
            return Err(Error::invalid("more death steps than birth steps"));
        }
        if !(self.speed_min > 0.0 && self.speed_min <= self.speed_max) {
            return Err(Error::invalid("speed bounds must satisfy 0 < min <= max"));
        }
        let offset = self.birth_steps.len() - self.death_steps.len();
        let objects = self
            .birth_steps
            .iter()
            .enumerate()
            .map(|(j, &birth)| TruthObject {
                birth,
                death: j.checked_sub(offset).map(|i| self.death_steps[i]),
                initial: self.initial_state(j, birth),
            })
            .collect();
        Scenario::new(
            self.n_steps,
            objects,
            self.motion()?,
            self.sensor()?,
            self.birth_model()?,
            self.seed,
        )
    }
}

pub fn default_scenario() -> Scenario {
    ScenarioParams::default()
        .build()
        .expect("default scenario parameters are valid")
}

/// Ground-truth state of one object at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub k: u32,
    pub object_id: u32,
    pub state: [f64; STATE_DIM],
}

/// Measurements received at step `k`, in random order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementFrame {
    pub k: u32,
    pub measurements: Vec<DVector<f64>>,
}

impl MeasurementFrame {
    pub fn new(k: u32, measurements: Vec<DVector<f64>>) -> Self {
        Self { k, measurements }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOutput {
    pub truth: Vec<TruthRow>,
    pub frames: Vec<MeasurementFrame>,
}

impl SimOutput {
    /// True positions per step, `positions[k - 1]`.
    pub fn truth_positions(&self, n_steps: u32) -> Vec<Vec<[f64; 3]>> {
        let mut out = vec![Vec::new(); n_steps as usize];
        for row in &self.truth {
            out[row.k as usize - 1].push([row.state[0], row.state[1], row.state[2]]);
        }
        out
    }
}

/// Simulates ground truth and one measurement frame per step `1..=n_steps`.
pub fn simulate<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<SimOutput> {
    let sensor = &scn.sensor;
    let detect =
        Bernoulli::new(sensor.p_d).map_err(|_| Error::invalid("p_d must lie in [0, 1]"))?;
    let clutter = if sensor.clutter_mean > 0.0 {
        Some(
            Poisson::new(sensor.clutter_mean)
                .map_err(|_| Error::invalid("invalid clutter mean"))?,
        )
    } else {
        None
    };
    let mut states: Vec<Option<DVector<f64>>> = vec![None; scn.objects.len()];
    let mut out = SimOutput::default();

    for k in 1..=scn.n_steps {
        let mut measurements = Vec::new();
        for (id, obj) in scn.objects.iter().enumerate() {
            if !obj.alive_at(k) {
                states[id] = None;
                continue;
            }
            let x = match states[id].take() {
                Some(prev) => scn.motion.predict(&prev, rng),
                None => DVector::from_column_slice(&obj.initial),
            };
            let mut state = [0.0; STATE_DIM];
            state.copy_from_slice(x.as_slice());
            out.truth.push(TruthRow {
                k,
                object_id: id as u32,
                state,
            });
            if detect.sample(rng) {
                let mut z = sensor.tdoa(x.as_slice())?;
                for v in z.iter_mut() {
                    let e: f64 = StandardNormal.sample(rng);
                    *v += sensor.sigma_v * e;
                }
                measurements.push(z);
            }
            states[id] = Some(x);
        }
        let n_clutter = clutter.map_or(0, |p| p.sample(rng) as usize);
        for _ in 0..n_clutter {
            measurements.push(sensor.sample_clutter(rng));
        }
        measurements.shuffle(rng);
        out.frames.push(MeasurementFrame::new(k, measurements));
    }
    Ok(out)
}
