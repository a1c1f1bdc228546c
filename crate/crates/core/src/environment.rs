//! Environmental loads: pulsating wind, oscillating waves and a ramping current,
//! optionally perturbed by Gaussian noise.
//!
//! Impact angles are measured against the global x-axis, so every component
//! depends on the relative angle `gamma - psi`.

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{check_covariance, GaussianSampler};
use crate::vessel::ForceVector;

/// Shape of the deterministic disturbance signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceProfile {
    /// Wind + waves + current.
    #[default]
    Environment,
    /// Time-invariant force.
    Constant { force: [f64; 3] },
    /// Per-channel `amplitude * sin(omega * t)`.
    Sinusoid { amplitude: [f64; 3], omega: [f64; 3] },
    /// Per-channel `amplitude * exp(-t / time_constant)`.
    Decaying { amplitude: [f64; 3], time_constant: f64 },
}

/// Environmental load parameters. Angles are kept in degrees at this level;
/// the accessors convert to radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub profile: DisturbanceProfile,
    pub wind_force: f64,
    pub wave_force: f64,
    pub current_force: f64,
    pub gamma_wind_deg: f64,
    pub gamma_wave_deg: f64,
    pub gamma_current_deg: f64,
    pub ship_length: f64,
    pub current_time_constant: f64,
    /// Covariance of the additive disturbance noise.
    #[serde(with = "crate::noise::matrix_rows")]
    pub noise_cov: Matrix3<f64>,
    pub noise_enabled: bool,
    /// Adds a smaller `sin(2t)` swell on top of the primary wave oscillation.
    pub wave_second_harmonic: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            profile: DisturbanceProfile::Environment,
            wind_force: 10_000.0,
            wave_force: 8_000.0,
            current_force: 18_000.0,
            gamma_wind_deg: 135.0,
            gamma_wave_deg: 155.0,
            gamma_current_deg: 300.0,
            ship_length: 5.0,
            current_time_constant: 15.0,
            noise_cov: Matrix3::identity() * 1000.0,
            noise_enabled: false,
            wave_second_harmonic: false,
        }
    }
}

const SECOND_HARMONIC_RATIO: f64 = 0.25;

impl EnvConfig {
    pub fn gamma_wind(&self) -> f64 {
        self.gamma_wind_deg.to_radians()
    }

    pub fn gamma_wave(&self) -> f64 {
        self.gamma_wave_deg.to_radians()
    }

    pub fn gamma_current(&self) -> f64 {
        self.gamma_current_deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        let forces = [self.wind_force, self.wave_force, self.current_force];
        if forces.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config("force magnitudes must be finite and >= 0".into()));
        }
        let angles = [self.gamma_wind_deg, self.gamma_wave_deg, self.gamma_current_deg];
        if angles.iter().any(|a| !a.is_finite()) || !self.ship_length.is_finite() {
            return Err(Error::Config("angles and ship length must be finite".into()));
        }
        if !(self.current_time_constant > 0.0) {
            return Err(Error::Config("current time constant must be > 0".into()));
        }
        check_covariance(&self.noise_cov, "disturbance noise covariance")?;
        match self.profile {
            DisturbanceProfile::Environment => {}
            DisturbanceProfile::Constant { force } => finite3(&force, "constant force")?,
            DisturbanceProfile::Sinusoid { amplitude, omega } => {
                finite3(&amplitude, "sinusoid amplitude")?;
                finite3(&omega, "sinusoid frequency")?;
            }
            DisturbanceProfile::Decaying {
                amplitude,
                time_constant,
            } => {
                finite3(&amplitude, "decay amplitude")?;
                if !(time_constant > 0.0) {
                    return Err(Error::Config("decay time constant must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    /// Noise-free disturbance at time `t` for heading `psi`.
    pub fn deterministic(&self, t: f64, psi: f64) -> ForceVector {
        match self.profile {
            DisturbanceProfile::Environment => {
                wind(t, psi, self) + wave(t, psi, self) + current(t, psi, self)
            }
            DisturbanceProfile::Constant { force } => force.into(),
            DisturbanceProfile::Sinusoid { amplitude, omega } => ForceVector::new(
                amplitude[0] * (omega[0] * t).sin(),
                amplitude[1] * (omega[1] * t).sin(),
                amplitude[2] * (omega[2] * t).sin(),
            ),
            DisturbanceProfile::Decaying {
                amplitude,
                time_constant,
            } => {
                let f = (-t / time_constant).exp();
                ForceVector::new(amplitude[0] * f, amplitude[1] * f, amplitude[2] * f)
            }
        }
    }
}

fn finite3(v: &[f64; 3], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite")))
    }
}

pub fn wind(t: f64, psi: f64, cfg: &EnvConfig) -> ForceVector {
    let rel = cfg.gamma_wind() - psi;
    let pulse = cfg.wind_force * (1.0 + (5.0 * t).sin() / 10.0);
    ForceVector::new(
        pulse * rel.cos(),
        -pulse * rel.sin(),
        pulse * (2.0 * rel).sin() * cfg.ship_length / 4.0,
    )
}

pub fn wave(t: f64, psi: f64, cfg: &EnvConfig) -> ForceVector {
    let rel = cfg.gamma_wave() - psi;
    let mut swell = 1.0 + t.sin();
    if cfg.wave_second_harmonic {
        swell += SECOND_HARMONIC_RATIO * (2.0 * t).sin();
    }
    let mag = cfg.wave_force * swell;
    ForceVector::new(mag * rel.cos(), -mag * rel.sin(), 0.0)
}

pub fn current(t: f64, psi: f64, cfg: &EnvConfig) -> ForceVector {
    let rel = cfg.gamma_current() - psi;
    let mag = cfg.current_force * (1.0 - (-t / cfg.current_time_constant).exp());
    ForceVector::new(mag * rel.cos(), -mag * rel.sin(), 0.0)
}

/// Disturbance generator with its noise factor precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Environment {
    pub config: EnvConfig,
    sampler: GaussianSampler,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let sampler = GaussianSampler::new(config.noise_cov)?;
        Ok(Self { config, sampler })
    }

    pub fn deterministic(&self, t: f64, psi: f64) -> ForceVector {
        self.config.deterministic(t, psi)
    }

    /// Deterministic load plus, when enabled, one draw of the disturbance noise.
    pub fn total_disturbance<R: Rng + ?Sized>(&self, t: f64, psi: f64, rng: &mut R) -> ForceVector {
        let clean = self.deterministic(t, psi);
        if self.config.noise_enabled {
            (clean.to_vector() + self.sampler.sample(rng)).into()
        } else {
            clean
        }
    }
}

/// Largest forward-difference rate `|f(k+1) - f(k)| / dt` over a sampled signal.
pub fn max_rate(samples: &[ForceVector], dt: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| (w[1].to_vector() - w[0].to_vector()).norm() / dt)
        .fold(0.0, f64::max)
}
