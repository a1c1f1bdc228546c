//! Scenario description, JSON (de)serialization and validation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::environment::{max_rate, EnvConfig};
use crate::error::{Error, Result};
use crate::estimator::{CovUpdate, UkfParams};
use crate::noise::check_covariance;
use crate::observer::{
    ball_radius, build_t, check_conditions, discrete_stability, ConditionReport, DiscreteStability,
    ObserverGains, StabilityCheck,
};
use crate::vessel::{BodyVelocity, DampingForm, InverseMass, Pose, Vessel, VesselParams};

/// How the process-noise covariance enters the velocity update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseScaling {
    /// `w ~ N(0, Q)` added to the next velocity as is.
    Direct,
    /// `w ~ N(0, Q dt)`, a Wiener increment on the velocity.
    SqrtDt,
    /// `w = dt M^-1 f` with `f ~ N(0, Q)`: `Q` is a generalized-force covariance.
    #[default]
    Force,
}

/// Where the observer takes its velocity from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocitySource {
    /// Unscented Kalman filter fed by noisy measurements.
    #[default]
    Ukf,
    /// The true plant velocity (perfect measurements, filter bypassed).
    Truth,
}

/// Disturbance the filter's prediction model is driven with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterDisturbance {
    /// The simulated environmental force, as in the discretized model.
    #[default]
    Environment,
    /// The observer's current estimate.
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    #[serde(with = "crate::noise::matrix_rows")]
    pub process_cov: Matrix3<f64>,
    #[serde(with = "crate::noise::matrix_rows")]
    pub measurement_cov: Matrix3<f64>,
    pub scaling: NoiseScaling,
    /// Extra generalized-force covariance the filter assumes on top of the plant
    /// noise, e.g. to cover a disturbance estimate used as model input.
    #[serde(with = "crate::noise::matrix_rows")]
    pub filter_force_cov: Matrix3<f64>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            process_cov: Matrix3::identity() * 30_000.0,
            measurement_cov: Matrix3::identity(),
            scaling: NoiseScaling::default(),
            filter_force_cov: Matrix3::zeros(),
        }
    }
}

impl NoiseSettings {
    /// Covariance of the velocity increment injected at every plant step.
    pub fn velocity_cov(&self, inverse_mass: &InverseMass, dt: f64) -> Matrix3<f64> {
        match self.scaling {
            NoiseScaling::Direct => self.process_cov,
            NoiseScaling::SqrtDt => self.process_cov * dt,
            NoiseScaling::Force => {
                let k = inverse_mass.matrix();
                let c = k * self.process_cov * k.transpose() * (dt * dt);
                0.5 * (c + c.transpose())
            }
        }
    }

    /// Process covariance assumed by the filter for one sample interval of
    /// `decimation` plant steps.
    pub fn filter_cov(&self, inverse_mass: &InverseMass, dt: f64, decimation: usize) -> Matrix3<f64> {
        let dt_m = dt * decimation as f64;
        let k = inverse_mass.matrix();
        let mismatch = k * self.filter_force_cov * k.transpose() * (dt_m * dt_m);
        self.velocity_cov(inverse_mass, dt) * decimation as f64 + 0.5 * (mismatch + mismatch.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UkfSettings {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    /// Initial covariance is `p_init * I`.
    pub p_init: f64,
    pub cov_update: CovUpdate,
}

impl Default for UkfSettings {
    fn default() -> Self {
        let p = UkfParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            kappa: p.kappa,
            p_init: 0.1,
            cov_update: CovUpdate::Standard,
        }
    }
}

impl UkfSettings {
    pub fn params(&self) -> UkfParams {
        UkfParams {
            alpha: self.alpha,
            beta: self.beta,
            kappa: self.kappa,
        }
    }
}

/// Initial pose with the heading given in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialPose {
    pub x: f64,
    pub y: f64,
    pub psi_deg: f64,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            psi_deg: 30.0,
        }
    }
}

impl InitialPose {
    pub fn to_pose(self) -> Pose {
        Pose::new(self.x, self.y, self.psi_deg.to_radians())
    }
}

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub plant: u64,
    pub measurement: u64,
    pub disturbance: u64,
}

impl Seeds {
    /// Derives the three stream seeds from a single base seed.
    pub fn from_base(base: u64) -> Self {
        const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
        Self {
            plant: base,
            measurement: base ^ GOLDEN,
            disturbance: base ^ GOLDEN.rotate_left(17),
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_base(0)
    }
}

/// Complete parameterization of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub vessel: VesselParams,
    pub damping_form: DampingForm,
    pub environment: EnvConfig,
    pub noise: NoiseSettings,
    pub ukf: UkfSettings,
    pub gains: ObserverGains,
    pub dt: f64,
    pub duration: f64,
    pub initial_pose: InitialPose,
    pub initial_velocity: BodyVelocity,
    /// Constant control force.
    pub control: [f64; 3],
    pub seeds: Seeds,
    /// Filter and observer run every n-th plant step, holding their output in between.
    pub measurement_decimation: usize,
    pub velocity_source: VelocitySource,
    pub filter_disturbance: FilterDisturbance,
    /// Leading window excluded from post-transient metrics, in seconds.
    pub transient: f64,
    /// Any state component above this magnitude aborts the run.
    pub divergence_limit: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            vessel: VesselParams::milliampere(),
            damping_form: DampingForm::Literal,
            environment: EnvConfig::default(),
            noise: NoiseSettings::default(),
            ukf: UkfSettings::default(),
            gains: ObserverGains::default(),
            dt: 0.01,
            duration: 200.0,
            initial_pose: InitialPose::default(),
            initial_velocity: BodyVelocity::ZERO,
            control: [0.0; 3],
            seeds: Seeds::default(),
            measurement_decimation: 1,
            velocity_source: VelocitySource::Ukf,
            filter_disturbance: FilterDisturbance::Environment,
            transient: 20.0,
            divergence_limit: 1e12,
        }
    }
}

/// Result of checking a configuration without simulating it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub inverse_mass: InverseMass,
    pub sigma: f64,
    pub t: [[f64; 3]; 3],
    pub conditions: ConditionReport,
    /// `lambda_min(gamma) * sigma`; the ball bound needs it above 1/2.
    pub gain_margin: f64,
    pub gain_condition_holds: bool,
    pub stability: StabilityCheck,
    /// Rate bound of the noise-free disturbance at the initial heading.
    pub theta_at_initial_heading: f64,
    pub ball_radius: Option<f64>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl ScenarioConfig {
    /// Parses and structurally checks a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check_structure()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies a `dotted.path=value` override. The value is parsed as JSON
    /// and falls back to a plain string.
    pub fn with_override(&self, spec: &str) -> Result<Self> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
        let value: Value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut doc = serde_json::to_value(self)?;
        let mut cursor = &mut doc;
        let keys: Vec<&str> = path.trim().split('.').collect();
        for (i, key) in keys.iter().enumerate() {
            let last = i + 1 == keys.len();
            cursor = match cursor {
                Value::Object(map) => {
                    if !map.contains_key(*key) && !last {
                        return Err(Error::Config(format!("unknown config key `{path}`")));
                    }
                    map.entry(key.to_string()).or_insert(Value::Null)
                }
                Value::Array(items) => {
                    let idx: usize = key
                        .parse()
                        .map_err(|_| Error::Config(format!("`{key}` is not an index in `{path}`")))?;
                    items
                        .get_mut(idx)
                        .ok_or_else(|| Error::Config(format!("index {idx} out of range in `{path}`")))?
                }
                _ => return Err(Error::Config(format!("`{path}` does not name a config field"))),
            };
        }
        *cursor = value;
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("override `{spec}`: {e}")))
    }

    pub fn vessel(&self) -> Result<Vessel> {
        Vessel::new(self.vessel, self.damping_form)
    }

    pub fn step_count(&self) -> usize {
        // guard against 200.0 / 0.01 landing just below an integer
        (self.duration / self.dt * (1.0 + 1e-12)).floor() as usize
    }

    /// Interval between filter/observer updates.
    pub fn sample_dt(&self) -> f64 {
        self.dt * self.measurement_decimation as f64
    }

    /// Structural checks that do not depend on gain tuning.
    pub fn check_structure(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!(
                "duration must be finite and >= 0, got {}",
                self.duration
            )));
        }
        if self.measurement_decimation == 0 {
            return Err(Error::Config("measurement_decimation must be >= 1".into()));
        }
        if !(self.transient >= 0.0) {
            return Err(Error::Config("transient must be >= 0".into()));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(Error::Config("divergence_limit must be > 0".into()));
        }
        if !(self.ukf.p_init >= 0.0) || !self.ukf.p_init.is_finite() {
            return Err(Error::Config("p_init must be finite and >= 0".into()));
        }
        let pose = self.initial_pose;
        if ![pose.x, pose.y, pose.psi_deg].iter().all(|x| x.is_finite())
            || !self.initial_velocity.is_finite()
            || !self.control.iter().all(|x| x.is_finite())
        {
            return Err(Error::Config("initial state and control must be finite".into()));
        }
        self.vessel()?;
        self.environment.validate()?;
        check_covariance(&self.noise.process_cov, "process noise covariance")?;
        check_covariance(&self.noise.measurement_cov, "measurement noise covariance")?;
        check_covariance(&self.noise.filter_force_cov, "filter model-error covariance")?;
        self.ukf.params().validate()?;
        self.gains.validate()?;
        Ok(())
    }

    /// Full report: structure, design conditions, gain margin and discrete stability.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.check_structure()?;
        let vessel = self.vessel()?;
        let k = vessel.inverse_mass;
        let (t, sigma) = build_t(&self.gains, &k)?;
        let conditions = check_conditions(&t, &k);
        let gain_margin = self.gains.min() * sigma;
        let stability = discrete_stability(&self.gains, sigma, self.sample_dt());

        let psi0 = self.initial_pose.to_pose().psi;
        let samples: Vec<_> = (0..=self.step_count())
            .map(|i| self.environment.deterministic(i as f64 * self.dt, psi0))
            .collect();
        let theta = max_rate(&samples, self.dt);

        let mut warnings = Vec::new();
        let mut errors = Vec::new();
        if !conditions.all_hold() {
            errors.push(format!("design conditions violated: {conditions:?}"));
        }
        let gain_condition_holds = gain_margin > 0.5;
        if !gain_condition_holds {
            errors.push(format!(
                "lambda_min(gamma)*sigma = {gain_margin} does not exceed 1/2"
            ));
        }
        match stability.level {
            DiscreteStability::Monotone => {}
            DiscreteStability::Oscillatory => warnings.push(format!(
                "gamma*sigma*dt = {:?} >= 1: observer error alternates sign",
                stability.products
            )),
            DiscreteStability::Unstable => errors.push(format!(
                "gamma*sigma*dt = {:?} >= 2: observer recursion diverges",
                stability.products
            )),
        }
        Ok(ValidationReport {
            inverse_mass: k,
            sigma,
            t: [
                [t[(0, 0)], t[(0, 1)], t[(0, 2)]],
                [t[(1, 0)], t[(1, 1)], t[(1, 2)]],
                [t[(2, 0)], t[(2, 1)], t[(2, 2)]],
            ],
            conditions,
            gain_margin,
            gain_condition_holds,
            stability,
            theta_at_initial_heading: theta,
            ball_radius: ball_radius(&self.gains, sigma, theta).ok(),
            warnings,
            errors,
        })
    }

    /// Copy with every noise source switched off.
    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        c.noise.process_cov = Matrix3::zeros();
        c.noise.measurement_cov = Matrix3::zeros();
        c.environment.noise_enabled = false;
        c
    }

    pub fn control_force(&self) -> Vector3<f64> {
        Vector3::from(self.control)
    }
}
