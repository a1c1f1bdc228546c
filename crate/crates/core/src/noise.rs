//! Seeded Gaussian sampling with a fixed covariance.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `N(0, cov)` samples through a symmetric square root of `cov`.
///
/// The factor comes from an eigendecomposition so singular (PSD) covariances,
/// including the zero matrix, are accepted. Every draw consumes exactly three
/// standard normals regardless of the covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSampler {
    factor: Matrix3<f64>,
}

impl GaussianSampler {
    pub fn new(cov: Matrix3<f64>) -> Result<Self> {
        check_covariance(&cov, "covariance")?;
        let eig = SymmetricEigen::new(cov);
        let scale = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = eig.eigenvectors * Matrix3::from_diagonal(&scale);
        Ok(Self { factor })
    }

    pub fn zero() -> Self {
        Self {
            factor: Matrix3::zeros(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector3<f64> {
        let z = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        self.factor * z
    }
}

/// Symmetric, finite, and positive semidefinite up to round-off.
pub fn check_covariance(cov: &Matrix3<f64>, what: &str) -> Result<()> {
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what} has non-finite entries")));
    }
    let scale = cov.abs().max().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::Config(format!("{what} is not symmetric")));
    }
    let min_eig = SymmetricEigen::new(*cov).eigenvalues.min();
    if min_eig < -1e-12 * scale {
        return Err(Error::Config(format!(
            "{what} is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Serde adapter writing a 3x3 matrix as three rows.
pub mod matrix_rows {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(Matrix3::from_fn(|i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_gives_zero_but_consumes_draws() {
        let s = GaussianSampler::new(Matrix3::zeros()).unwrap();
        let mut a = rng_from_seed(3);
        let mut b = rng_from_seed(3);
        assert_eq!(s.sample(&mut a), Vector3::zeros());
        let _ = GaussianSampler::new(Matrix3::identity()).unwrap().sample(&mut b);
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn rejects_indefinite() {
        let cov = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(GaussianSampler::new(cov).is_err());
        let mut asym = Matrix3::identity();
        asym[(0, 1)] = 0.5;
        assert!(GaussianSampler::new(asym).is_err());
    }
}
