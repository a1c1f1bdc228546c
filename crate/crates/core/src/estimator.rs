//! Additive-noise unscented Kalman filter over a three-dimensional state.
//!
//! The prediction propagates noise-free sigma points through the plant map and
//! evaluates the measurement map on the same (unpropagated) points, so the
//! cross covariance relates the next state to the current measurement. With a
//! linear plant this is exactly the one-step Kalman predictor.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::check_covariance;

pub const STATE_DIM: usize = 3;
pub const SIGMA_COUNT: usize = 2 * STATE_DIM + 1;

const MAX_JITTER_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    pub fn lambda(&self) -> f64 {
        let l = STATE_DIM as f64;
        self.alpha * self.alpha * (l + self.kappa) - l
    }

    /// `L + lambda`, the squared spread of the sigma points in units of `P`.
    pub fn spread(&self) -> f64 {
        // same as L + lambda, without the cancellation for small alpha
        self.alpha * self.alpha * (STATE_DIM as f64 + self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.beta.is_finite() || !self.kappa.is_finite() {
            return Err(Error::Config("beta and kappa must be finite".into()));
        }
        if !(self.spread() > 0.0) {
            return Err(Error::Config(format!(
                "L + lambda must be > 0, got {}",
                self.spread()
            )));
        }
        Ok(())
    }
}

/// Covariance correction variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovUpdate {
    /// `P_x - K P_y K^T`.
    #[default]
    Standard,
    /// `P_x - K P_y P_x`, not symmetric in general.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Belief {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl Belief {
    pub fn new(mean: Vector3<f64>, cov: Matrix3<f64>) -> Self {
        Self { mean, cov }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Process noise covariance added to the predicted state covariance.
    #[serde(with = "crate::noise::matrix_rows")]
    pub q: Matrix3<f64>,
    /// Measurement noise covariance added to the predicted measurement covariance.
    #[serde(with = "crate::noise::matrix_rows")]
    pub r: Matrix3<f64>,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        check_covariance(&self.q, "process noise covariance")?;
        check_covariance(&self.r, "measurement noise covariance")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub mean: [f64; SIGMA_COUNT],
    pub cov: [f64; SIGMA_COUNT],
}

pub fn weights(p: &UkfParams) -> Weights {
    let lambda = p.lambda();
    let spread = p.spread();
    let wi = 1.0 / (2.0 * spread);
    let mut mean = [wi; SIGMA_COUNT];
    let mut cov = [wi; SIGMA_COUNT];
    mean[0] = lambda / spread;
    cov[0] = mean[0] + (1.0 - p.alpha * p.alpha + p.beta);
    Weights { mean, cov }
}

/// Lower Cholesky factor of `cov`, adding diagonal jitter on failure.
///
/// The first retry uses `1e-9 * trace / 3` (or `1e-9` for a zero trace), each
/// further retry ten times more.
pub fn cholesky_with_jitter(cov: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let sym = 0.5 * (cov + cov.transpose());
    if let Some(c) = sym.cholesky() {
        return Ok(c.l());
    }
    let trace = sym.trace();
    let mut eps = if trace > 0.0 && trace.is_finite() {
        1e-9 * trace / STATE_DIM as f64
    } else {
        1e-9
    };
    for _ in 0..MAX_JITTER_ATTEMPTS {
        if let Some(c) = (sym + Matrix3::identity() * eps).cholesky() {
            return Ok(c.l());
        }
        eps *= 10.0;
    }
    Err(Error::Factorization {
        attempts: MAX_JITTER_ATTEMPTS,
    })
}

pub fn sigma_points(b: &Belief, p: &UkfParams) -> Result<[Vector3<f64>; SIGMA_COUNT]> {
    let root = cholesky_with_jitter(&b.cov)? * p.spread().sqrt();
    let mut pts = [b.mean; SIGMA_COUNT];
    for i in 0..STATE_DIM {
        let col = root.column(i).into_owned();
        pts[1 + i] = b.mean + col;
        pts[1 + STATE_DIM + i] = b.mean - col;
    }
    Ok(pts)
}

/// Moments produced by the prediction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub state: Vector3<f64>,
    pub measurement: Vector3<f64>,
    pub p_x: Matrix3<f64>,
    pub p_y: Matrix3<f64>,
    pub p_xy: Matrix3<f64>,
}

/// Weighted mean, anchored at the central point. Equal to `sum w_i x_i` since
/// the weights sum to one, but it avoids cancellation when `w_0` is large and
/// negative.
fn weighted_mean(w: &[f64; SIGMA_COUNT], xs: &[Vector3<f64>; SIGMA_COUNT]) -> Vector3<f64> {
    let anchor = xs[0];
    let mut acc = Vector3::zeros();
    for i in 1..SIGMA_COUNT {
        acc += w[i] * (xs[i] - anchor);
    }
    anchor + acc
}

pub fn predict<F, G>(
    b: &Belief,
    plant: F,
    measure: G,
    noise: &NoiseModel,
    p: &UkfParams,
) -> Result<Prediction>
where
    F: Fn(&Vector3<f64>) -> Vector3<f64>,
    G: Fn(&Vector3<f64>) -> Vector3<f64>,
{
    let pts = sigma_points(b, p)?;
    let w = weights(p);
    let fx = pts.map(|x| plant(&x));
    let gx = pts.map(|x| measure(&x));
    let state = weighted_mean(&w.mean, &fx);
    let measurement = weighted_mean(&w.mean, &gx);

    let mut p_x = noise.q;
    let mut p_y = noise.r;
    let mut p_xy = Matrix3::zeros();
    for i in 0..SIGMA_COUNT {
        let dx = fx[i] - state;
        let dy = gx[i] - measurement;
        p_x += w.cov[i] * dx * dx.transpose();
        p_y += w.cov[i] * dy * dy.transpose();
        p_xy += w.cov[i] * dx * dy.transpose();
    }
    Ok(Prediction {
        state,
        measurement,
        p_x,
        p_y,
        p_xy,
    })
}

pub fn correct(pred: &Prediction, y: &Vector3<f64>, update: CovUpdate) -> Result<Belief> {
    let p_y_inv = pred.p_y.try_inverse().ok_or(Error::SingularInnovation)?;
    if p_y_inv.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let gain = pred.p_xy * p_y_inv;
    let mean = pred.state + gain * (y - pred.measurement);
    let cov = match update {
        CovUpdate::Standard => {
            let c = pred.p_x - gain * pred.p_y * gain.transpose();
            0.5 * (c + c.transpose())
        }
        CovUpdate::Asymmetric => pred.p_x - gain * pred.p_y * pred.p_x,
    };
    Ok(Belief { mean, cov })
}
