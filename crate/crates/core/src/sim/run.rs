//! The closed loop: plant, measurement, observer and filter, one record per step.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::environment::{max_rate, Environment};
use crate::error::{Error, Result};
use crate::estimator::{correct, predict, Belief, NoiseModel};
use crate::noise::{rng_from_seed, GaussianSampler};
use crate::observer::{ball_radius, discrete_stability, DiscreteStability, ObserverState};
use crate::vessel::{BodyVelocity, ForceVector, Pose};

use super::config::{FilterDisturbance, ScenarioConfig, VelocitySource};

/// One time step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub nu: BodyVelocity,
    pub nu_measured: BodyVelocity,
    pub nu_filtered: BodyVelocity,
    pub eta: Pose,
    pub tau_d: ForceVector,
    pub tau_hat: ForceVector,
    /// Observer error `tau_d - tau_hat`.
    pub z: [f64; 3],
    pub zeta: [f64; 3],
    /// Diagonal of the filter covariance.
    pub p_diag: [f64; 3],
}

/// Post-run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: usize,
    /// Per-channel relative error series; `None` when the disturbance channel
    /// is identically zero. Written to the trace file, not to the metrics file.
    #[serde(skip)]
    pub relative_error: [Option<Vec<f64>>; 3],
    pub relative_error_defined: [bool; 3],
    pub mean_abs_relative_error: [Option<f64>; 3],
    pub max_abs_relative_error: [Option<f64>; 3],
    pub rmse_measured: [f64; 3],
    pub rmse_filtered: [f64; 3],
    pub max_error_norm: f64,
    pub theta: f64,
    pub ball_radius: Option<f64>,
    pub gain_condition_holds: bool,
    pub discrete_stability: DiscreteStability,
    pub transient: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub metrics: RunMetrics,
}

/// Which configuration checks `run_with` enforces before stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Reject `gamma * sigma * dt >= 2` up front instead of letting the run diverge.
    pub precheck_stability: bool,
    /// Reject `lambda_min(gamma) * sigma <= 1/2`.
    pub require_gain_margin: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            precheck_stability: true,
            require_gain_margin: true,
        }
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_with(cfg, RunOptions::default())
}

fn check_bounded(step: usize, time: f64, limit: f64, what: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || x.abs() > limit) {
        return Err(Error::Divergence {
            step,
            time,
            what: format!("{what} = {v:?} exceeds {limit:e}"),
        });
    }
    Ok(())
}

pub fn run_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput> {
    cfg.check_structure()?;
    let vessel = cfg.vessel()?;
    let env = Environment::new(cfg.environment)?;
    let mut observer = ObserverState::new(&cfg.gains, &vessel.inverse_mass)?;
    let sigma = observer.sigma;
    let sample_dt = cfg.sample_dt();
    let stability = discrete_stability(&cfg.gains, sigma, sample_dt);
    if opts.precheck_stability {
        stability.into_result()?;
    }
    let gain_margin = cfg.gains.min() * sigma;
    if opts.require_gain_margin && !(gain_margin > 0.5) {
        return Err(Error::WeakGains { value: gain_margin });
    }

    let dt = cfg.dt;
    let decimation = cfg.measurement_decimation;
    let n_steps = cfg.step_count();
    let limit = cfg.divergence_limit;
    let tau: ForceVector = cfg.control.into();

    let step_cov = cfg.noise.velocity_cov(&vessel.inverse_mass, dt);
    let process = GaussianSampler::new(step_cov)?;
    let measurement = GaussianSampler::new(cfg.noise.measurement_cov)?;
    let filter_noise = NoiseModel {
        q: cfg.noise.filter_cov(&vessel.inverse_mass, dt, decimation),
        r: cfg.noise.measurement_cov,
    };
    let ukf = cfg.ukf.params();

    let mut plant_rng = rng_from_seed(cfg.seeds.plant);
    let mut meas_rng = rng_from_seed(cfg.seeds.measurement);
    let mut dist_rng = rng_from_seed(cfg.seeds.disturbance);

    let mut nu = cfg.initial_velocity;
    let mut eta = cfg.initial_pose.to_pose();
    let mut belief = Belief::new(nu.to_vector(), Matrix3::identity() * cfg.ukf.p_init);

    let mut trace = Vec::with_capacity(n_steps + 1);
    let mut clean = Vec::with_capacity(n_steps + 1);

    // held between samples
    let mut nu_meas = nu;
    let mut nu_hat = nu;
    let mut tau_hat = ForceVector::ZERO;
    let mut zeta = observer.zeta;

    for k in 0..=n_steps {
        let t = k as f64 * dt;
        let tau_d_clean = env.deterministic(t, eta.psi);
        let tau_d = env.total_disturbance(t, eta.psi, &mut dist_rng);
        clean.push(tau_d_clean);

        let sample = k % decimation == 0;
        if sample {
            nu_meas = (nu.to_vector() + measurement.sample(&mut meas_rng)).into();
            nu_hat = match cfg.velocity_source {
                VelocitySource::Ukf => belief.mean.into(),
                VelocitySource::Truth => nu,
            };
            tau_hat = observer.estimate(nu_hat);
            zeta = observer.zeta;
        }

        let z = tau_d.to_vector() - tau_hat.to_vector();
        trace.push(TraceRecord {
            t,
            nu,
            nu_measured: nu_meas,
            nu_filtered: nu_hat,
            eta,
            tau_d,
            tau_hat,
            z: [z[0], z[1], z[2]],
            zeta: [zeta[0], zeta[1], zeta[2]],
            p_diag: [belief.cov[(0, 0)], belief.cov[(1, 1)], belief.cov[(2, 2)]],
        });

        check_bounded(k, t, limit, "velocity", &nu.to_array())?;
        check_bounded(k, t, limit, "pose", &eta.to_array())?;
        check_bounded(k, t, limit, "velocity estimate", &nu_hat.to_array())?;
        check_bounded(k, t, limit, "observer variable", observer.zeta.as_slice())?;
        check_bounded(k, t, limit, "disturbance estimate", &tau_hat.to_array())?;

        if k == n_steps {
            break;
        }

        if sample {
            // observer first, then the filter, both on the current estimate
            observer.zeta = observer.update(nu_hat, tau, &vessel, sample_dt);
            if cfg.velocity_source == VelocitySource::Ukf {
                let model_force = match cfg.filter_disturbance {
                    FilterDisturbance::Environment => tau_d,
                    FilterDisturbance::Observer => tau_hat,
                };
                let plant =
                    |x: &Vector3<f64>| vessel.euler_velocity((*x).into(), tau, model_force, sample_dt);
                let pred = predict(&belief, plant, |x| *x, &filter_noise, &ukf)?;
                belief = correct(&pred, &nu_meas.to_vector(), cfg.ukf.cov_update)?;
                check_bounded(k, t, limit, "filter covariance", belief.cov.as_slice())?;
            }
        }

        let w = process.sample(&mut plant_rng);
        (nu, eta) = vessel.step(nu, eta, tau, tau_d, dt, w);
    }

    let theta = max_rate(&clean, dt);
    let metrics = compute_metrics(&trace, cfg.transient, theta, &cfg.gains, sigma, stability.level);
    Ok(RunOutput { trace, metrics })
}

/// `(tau_d,i - tau_hat,i) / max_k |tau_d,i|` on every channel.
pub fn relative_error(trace: &[TraceRecord]) -> Result<[Vec<f64>; 3]> {
    let channels = relative_error_channels(trace);
    let mut out: [Vec<f64>; 3] = Default::default();
    for (i, ch) in channels.into_iter().enumerate() {
        out[i] = ch.ok_or(Error::ZeroDisturbance { channel: i + 1 })?;
    }
    Ok(out)
}

/// Like [`relative_error`] but reports an identically-zero channel as `None`.
pub fn relative_error_channels(trace: &[TraceRecord]) -> [Option<Vec<f64>>; 3] {
    std::array::from_fn(|i| {
        let peak = trace
            .iter()
            .map(|r| r.tau_d.to_array()[i].abs())
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return None;
        }
        Some(
            trace
                .iter()
                .map(|r| (r.tau_d.to_array()[i] - r.tau_hat.to_array()[i]) / peak)
                .collect(),
        )
    })
}

fn rmse(trace: &[TraceRecord], pick: impl Fn(&TraceRecord) -> [f64; 3]) -> [f64; 3] {
    if trace.is_empty() {
        return [0.0; 3];
    }
    let mut acc = [0.0; 3];
    for r in trace {
        let est = pick(r);
        let truth = r.nu.to_array();
        for i in 0..3 {
            acc[i] += (est[i] - truth[i]).powi(2);
        }
    }
    acc.map(|a| (a / trace.len() as f64).sqrt())
}

pub fn compute_metrics(
    trace: &[TraceRecord],
    transient: f64,
    theta: f64,
    gains: &crate::observer::ObserverGains,
    sigma: f64,
    discrete: DiscreteStability,
) -> RunMetrics {
    let relative_error = relative_error_channels(trace);
    let start = trace.iter().position(|r| r.t >= transient).unwrap_or(trace.len());
    let tail = |series: &Vec<f64>, f: fn(f64, f64) -> f64, init: f64| -> Option<f64> {
        let post = &series[start.min(series.len())..];
        if post.is_empty() {
            None
        } else {
            Some(post.iter().fold(init, |a, x| f(a, x.abs())))
        }
    };
    let mean_abs = std::array::from_fn(|i| {
        relative_error[i].as_ref().and_then(|s| {
            let n = s.len().saturating_sub(start);
            tail(s, |a, x| a + x, 0.0).map(|sum| sum / n as f64)
        })
    });
    let max_abs = std::array::from_fn(|i| relative_error[i].as_ref().and_then(|s| tail(s, f64::max, 0.0)));
    let max_error_norm = trace[start.min(trace.len())..]
        .iter()
        .map(|r| Vector3::from(r.z).norm())
        .fold(0.0, f64::max);
    RunMetrics {
        records: trace.len(),
        relative_error_defined: std::array::from_fn(|i| relative_error[i].is_some()),
        relative_error,
        mean_abs_relative_error: mean_abs,
        max_abs_relative_error: max_abs,
        rmse_measured: rmse(trace, |r| r.nu_measured.to_array()),
        rmse_filtered: rmse(trace, |r| r.nu_filtered.to_array()),
        max_error_norm,
        theta,
        ball_radius: ball_radius(gains, sigma, theta).ok(),
        gain_condition_holds: gains.min() * sigma > 0.5,
        discrete_stability: discrete,
        transient,
    }
}
