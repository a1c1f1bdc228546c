//! Multi-run studies: process-noise sweeps, gain comparisons, trajectory
//! sensitivity and the high-rate reference floor.

use std::thread;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::environment::DisturbanceProfile;
use crate::error::{Error, Result};
use crate::observer::{DiscreteStability, ObserverGains};

use super::config::{ScenarioConfig, VelocitySource};
use super::run::{run, run_with, RunOptions, RunOutput};

/// Runs every configuration on its own thread, preserving order.
fn run_all(cfgs: &[ScenarioConfig], opts: RunOptions) -> Vec<Result<RunOutput>> {
    thread::scope(|s| {
        let handles: Vec<_> = cfgs.iter().map(|c| s.spawn(move || run_with(c, opts))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub scale: f64,
    pub output: RunOutput,
}

/// One run per `Q = scale * I`, all with the seeds of `cfg`.
pub fn q_sweep(cfg: &ScenarioConfig, scales: &[f64]) -> Result<Vec<SweepEntry>> {
    let cfgs: Vec<_> = scales
        .iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.noise.process_cov = Matrix3::identity() * s;
            c
        })
        .collect();
    scales
        .iter()
        .zip(run_all(&cfgs, RunOptions::default()))
        .map(|(&scale, out)| out.map(|output| SweepEntry { scale, output }))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GammaEntry {
    pub gamma: f64,
    pub output: RunOutput,
    /// Per-channel error divided by its initial value.
    pub normalized: [Vec<f64>; 3],
    /// First time the normalized error magnitude reaches one half.
    pub time_to_half: [Option<f64>; 3],
    /// `gamma * sigma <= 1/2`: the continuous-time ball bound does not apply.
    pub weak_gain: bool,
    pub stability: DiscreteStability,
}

/// The gain-comparison scenario: the same exponentially decaying force on all
/// three channels, no noise and exact velocity feedback.
pub fn gamma_scenario(cfg: &ScenarioConfig, gamma: f64) -> ScenarioConfig {
    let mut c = cfg.noiseless();
    let env = c.environment;
    c.environment.profile = DisturbanceProfile::Decaying {
        amplitude: [env.current_force; 3],
        time_constant: env.current_time_constant,
    };
    c.velocity_source = VelocitySource::Truth;
    c.gains = ObserverGains::uniform(gamma);
    c
}

pub fn gamma_comparison(cfg: &ScenarioConfig, gammas: &[f64]) -> Result<Vec<GammaEntry>> {
    let cfgs: Vec<_> = gammas.iter().map(|&g| gamma_scenario(cfg, g)).collect();
    let opts = RunOptions {
        require_gain_margin: false,
        ..Default::default()
    };
    let outputs = run_all(&cfgs, opts);
    gammas
        .iter()
        .zip(outputs)
        .map(|(&gamma, out)| {
            let output = out?;
            let normalized: [Vec<f64>; 3] = std::array::from_fn(|i| {
                let z0 = output.trace.first().map_or(0.0, |r| r.z[i]);
                output.trace.iter().map(|r| r.z[i] / z0).collect()
            });
            let time_to_half = std::array::from_fn(|i| {
                normalized[i]
                    .iter()
                    .zip(&output.trace)
                    .find(|(z, _)| z.abs() <= 0.5)
                    .map(|(_, r)| r.t)
            });
            Ok(GammaEntry {
                gamma,
                weak_gain: !output.metrics.gain_condition_holds,
                stability: output.metrics.discrete_stability,
                normalized,
                time_to_half,
                output,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrajectoryComparison {
    pub with_noise: RunOutput,
    pub without_noise: RunOutput,
    /// Planar distance between the two final positions.
    pub terminal_separation: f64,
}

/// Runs `cfg` as configured and again without process noise.
pub fn trajectory_comparison(cfg: &ScenarioConfig) -> Result<TrajectoryComparison> {
    let mut clean = cfg.clone();
    clean.noise.process_cov = Matrix3::zeros();
    trajectory_pair(cfg, &clean)
}

/// Compares two runs that must share every seed.
pub fn trajectory_pair(a: &ScenarioConfig, b: &ScenarioConfig) -> Result<TrajectoryComparison> {
    if a.seeds != b.seeds {
        return Err(Error::SeedMismatch(format!("{:?} vs {:?}", a.seeds, b.seeds)));
    }
    let mut outs = run_all(&[a.clone(), b.clone()], RunOptions::default()).into_iter();
    let with_noise = outs.next().expect("two runs")?;
    let without_noise = outs.next().expect("two runs")?;
    let terminal_separation = match (with_noise.trace.last(), without_noise.trace.last()) {
        (Some(p), Some(q)) => (p.eta.x - q.eta.x).hypot(p.eta.y - q.eta.y),
        _ => 0.0,
    };
    Ok(TrajectoryComparison {
        with_noise,
        without_noise,
        terminal_separation,
    })
}

/// Attainable reconstruction quality for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFloor {
    pub dt: f64,
    /// Post-transient mean `|z_r|` per channel of the reference run.
    pub mean_abs_relative_error: [Option<f64>; 3],
}

impl ReferenceFloor {
    pub const DT: f64 = 0.001;
    pub const FACTOR: f64 = 3.0;

    /// Acceptance thresholds, `FACTOR` times the floor.
    pub fn thresholds(&self) -> [Option<f64>; 3] {
        self.mean_abs_relative_error.map(|f| f.map(|f| f * Self::FACTOR))
    }
}

/// The scenario without any noise, sampled at 1 kHz with exact velocity feedback.
pub fn reference_scenario(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.noiseless();
    c.dt = ReferenceFloor::DT;
    c.measurement_decimation = 1;
    c.velocity_source = VelocitySource::Truth;
    c
}

pub fn reference_floor(cfg: &ScenarioConfig) -> Result<ReferenceFloor> {
    let out = run(&reference_scenario(cfg))?;
    Ok(ReferenceFloor {
        dt: ReferenceFloor::DT,
        mean_abs_relative_error: out.metrics.mean_abs_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> ScenarioConfig {
        ScenarioConfig {
            duration: 10.0,
            ..Default::default()
        }
    }

    #[test]
    fn single_scale_sweep_matches_run() {
        let c = short();
        let sweep = q_sweep(&c, &[30_000.0]).unwrap();
        assert_eq!(sweep[0].output.trace, run(&c).unwrap().trace);
    }

    #[test]
    fn zero_scale_is_noiseless_plant() {
        let c = short();
        let sweep = q_sweep(&c, &[0.0]).unwrap();
        let mut quiet = c.clone();
        quiet.noise.process_cov = Matrix3::zeros();
        let out = run(&quiet).unwrap();
        assert_eq!(sweep[0].output.trace, out.trace);
    }

    #[test]
    fn identical_configs_give_identical_trajectories() {
        let mut c = short();
        c.noise.process_cov = Matrix3::zeros();
        let cmp = trajectory_comparison(&c).unwrap();
        assert_eq!(cmp.terminal_separation, 0.0);
    }

    #[test]
    fn seed_mismatch_is_refused() {
        let a = short();
        let mut b = a.clone();
        b.seeds.plant ^= 1;
        assert!(matches!(trajectory_pair(&a, &b), Err(Error::SeedMismatch(_))));
    }

    #[test]
    fn weak_gain_flagged_but_run() {
        let c = ScenarioConfig {
            duration: 30.0,
            ..Default::default()
        };
        let out = gamma_comparison(&c, &[0.4, 10.0]).unwrap();
        assert!(out[0].weak_gain);
        assert!(!out[1].weak_gain);
        let slow = out[0].time_to_half[0].unwrap();
        let fast = out[1].time_to_half[0].unwrap();
        assert!(fast < slow);
    }

    #[test]
    fn floor_is_small_and_positive() {
        let c = ScenarioConfig {
            duration: 40.0,
            ..Default::default()
        };
        let f = reference_floor(&c).unwrap();
        for v in f.mean_abs_relative_error {
            let v = v.unwrap();
            assert!(v > 0.0 && v < 0.05, "{v}");
        }
    }
}
