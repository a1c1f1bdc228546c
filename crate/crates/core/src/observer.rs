//! Nonlinear disturbance observer with diagonal, gain-synchronized error dynamics.
//!
//! The estimate is `tau_hat = zeta + T nu` and the observer variable follows
//! `zeta_dot = -T nu_dot(tau_d = tau_hat)`. `T` is the Jacobian of a linear
//! map chosen so that `T M^-1 = diag(gamma_i * sigma)`, which decouples the
//! error `z = tau_d - tau_hat` into three scalar first-order systems
//! `z_i' = -gamma_i sigma z_i`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vessel::{BodyVelocity, ForceVector, InverseMass, Vessel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObserverGains(pub [f64; 3]);

impl ObserverGains {
    pub const fn uniform(g: f64) -> Self {
        Self([g; 3])
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|g| !g.is_finite() || *g <= 0.0) {
            return Err(Error::Config(format!(
                "observer gains must be finite and > 0, got {:?}",
                self.0
            )));
        }
        Ok(())
    }
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self::uniform(50.0)
    }
}

/// `1 - k23 k32 / (k22 k33)`.
pub fn coupling(k: &InverseMass) -> f64 {
    1.0 - (k.k23 * k.k32) / (k.k22 * k.k33)
}

/// Builds the observer matrix `T` and the coupling scalar `sigma`.
///
/// Only the weak-coupling case `k23 k32 < k22 k33` is supported; the other
/// two cases would need non-positive gains.
pub fn build_t(gains: &ObserverGains, k: &InverseMass) -> Result<(Matrix3<f64>, f64)> {
    let product = k.k23 * k.k32;
    let diagonal = k.k22 * k.k33;
    if !(product < diagonal) {
        return Err(Error::CaseViolation { product, diagonal });
    }
    let sigma = coupling(k);
    let [g1, g2, g3] = gains.0;
    let t = Matrix3::new(
        g1 * sigma / k.k11,
        0.0,
        0.0, //
        0.0,
        g2 / k.k22,
        -g2 * k.k23 / diagonal, //
        0.0,
        -g3 * k.k32 / diagonal,
        g3 / k.k33,
    );
    Ok((t, sigma))
}

/// One condition value together with the magnitude of the terms it sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub value: f64,
    pub scale: f64,
    pub holds: bool,
}

impl Condition {
    fn vanishing(a: f64, b: f64) -> Self {
        let value = a + b;
        let scale = a.abs() + b.abs();
        Self {
            value,
            scale,
            holds: value.abs() <= 1e-12 * scale,
        }
    }

    fn positive(a: f64, b: f64) -> Self {
        let value = a + b;
        Self {
            value,
            scale: a.abs() + b.abs(),
            holds: value > 0.0,
        }
    }
}

/// Evaluation of the design conditions for a given `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `dmu1/du * k11 > 0`.
    pub surge: Condition,
    pub c1: Condition,
    pub c2: Condition,
    pub c3: Condition,
    pub c4: Condition,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        [self.surge, self.c1, self.c2, self.c3, self.c4]
            .iter()
            .all(|c| c.holds)
    }
}

pub fn check_conditions(t: &Matrix3<f64>, k: &InverseMass) -> ConditionReport {
    ConditionReport {
        surge: Condition::positive(t[(0, 0)] * k.k11, 0.0),
        c1: Condition::vanishing(t[(1, 1)] * k.k23, t[(1, 2)] * k.k33),
        c2: Condition::positive(t[(1, 1)] * k.k22, t[(1, 2)] * k.k32),
        c3: Condition::vanishing(t[(2, 1)] * k.k22, t[(2, 2)] * k.k32),
        c4: Condition::positive(t[(2, 1)] * k.k23, t[(2, 2)] * k.k33),
    }
}

/// Ultimate bound `theta / sqrt(2 lambda_min(gamma) sigma - 1)` on the error norm.
pub fn ball_radius(gains: &ObserverGains, sigma: f64, theta: f64) -> Result<f64> {
    let value = gains.min() * sigma;
    if !(value > 0.5) {
        return Err(Error::WeakGains { value });
    }
    Ok(theta / (2.0 * value - 1.0).sqrt())
}

/// Severity of the explicit-Euler observer recursion `z <- (1 - gamma sigma dt) z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteStability {
    /// Monotone decay, `gamma sigma dt < 1`.
    Monotone,
    /// Sign-alternating but decaying, `1 <= gamma sigma dt < 2`.
    Oscillatory,
    /// Growing, `gamma sigma dt >= 2`.
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub products: [f64; 3],
    pub level: DiscreteStability,
}

impl StabilityCheck {
    pub fn into_result(self) -> Result<Self> {
        if self.level == DiscreteStability::Unstable {
            let (channel, product) =
                self.products
                    .iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |a, (i, p)| if p > a.1 { (i, p) } else { a },
                    );
            return Err(Error::UnstableDiscretization {
                channel: channel + 1,
                product,
            });
        }
        Ok(self)
    }
}

pub fn discrete_stability(gains: &ObserverGains, sigma: f64, dt: f64) -> StabilityCheck {
    let products = gains.0.map(|g| g * sigma * dt);
    let worst = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let level = if worst >= 2.0 {
        DiscreteStability::Unstable
    } else if worst >= 1.0 {
        DiscreteStability::Oscillatory
    } else {
        DiscreteStability::Monotone
    };
    StabilityCheck { products, level }
}

/// Observer variable together with its precomputed design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub zeta: Vector3<f64>,
    pub t: Matrix3<f64>,
    pub sigma: f64,
}

impl ObserverState {
    /// Zero-initialized observer for the given vessel and gains.
    pub fn new(gains: &ObserverGains, k: &InverseMass) -> Result<Self> {
        gains.validate()?;
        let (t, sigma) = build_t(gains, k)?;
        Ok(Self {
            zeta: Vector3::zeros(),
            t,
            sigma,
        })
    }

    pub fn estimate(&self, nu_hat: BodyVelocity) -> ForceVector {
        (self.zeta + self.t * nu_hat.to_vector()).into()
    }

    /// Next observer variable: `zeta - dt * T * nu_dot(nu_hat, tau, tau_hat)`.
    pub fn update(&self, nu_hat: BodyVelocity, tau: ForceVector, vessel: &Vessel, dt: f64) -> Vector3<f64> {
        let tau_hat = self.estimate(nu_hat);
        let accel = vessel.acceleration(nu_hat, tau, tau_hat).to_vector();
        self.zeta - dt * (self.t * accel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vessel::{DampingForm, VesselParams};
    use proptest::prelude::*;

    fn ferry_inverse() -> InverseMass {
        InverseMass::from_params(&VesselParams::milliampere()).unwrap()
    }

    #[test]
    fn sigma_for_ferry() {
        let (_, sigma) = build_t(&ObserverGains::default(), &ferry_inverse()).unwrap();
        let direct = 1.0 - (62.386 * 28.141) / (2533.911 * 5068.910);
        assert!((sigma - direct).abs() < 1e-15);
        assert!((sigma - 0.9998633).abs() < 1e-7);
    }

    #[test]
    fn decoupled_mass_gives_diagonal_t() {
        let k = InverseMass {
            k11: 0.5,
            k22: 0.25,
            k23: 0.0,
            k32: 0.0,
            k33: 0.125,
        };
        let (t, sigma) = build_t(&ObserverGains([1.0, 2.0, 3.0]), &k).unwrap();
        assert_eq!(sigma, 1.0);
        assert_eq!(t, Matrix3::from_diagonal(&Vector3::new(2.0, 8.0, 24.0)));
        let report = check_conditions(&t, &k);
        assert_eq!(report.c1.value, 0.0);
        assert_eq!(report.c3.value, 0.0);
    }

    #[test]
    fn ferry_conditions_hold() {
        let k = ferry_inverse();
        let (t, _) = build_t(&ObserverGains::default(), &k).unwrap();
        let report = check_conditions(&t, &k);
        assert!(report.all_hold(), "{report:?}");
    }

    #[test]
    fn negative_gain_breaks_c2() {
        let k = ferry_inverse();
        let (t, _) = build_t(&ObserverGains([50.0, -50.0, 50.0]), &k).unwrap();
        let report = check_conditions(&t, &k);
        assert!(!report.c2.holds);
        assert!(report.c4.holds);
        assert!(report.c1.holds);
    }

    #[test]
    fn strong_coupling_rejected() {
        let k = InverseMass {
            k11: 1.0,
            k22: 1.0,
            k23: 2.0,
            k32: 1.0,
            k33: 1.0,
        };
        assert!(matches!(
            build_t(&ObserverGains::default(), &k),
            Err(Error::CaseViolation { .. })
        ));
        let equal = InverseMass { k23: 1.0, ..k };
        assert!(build_t(&ObserverGains::default(), &equal).is_err());
    }

    #[test]
    fn estimate_is_affine() {
        let mut obs = ObserverState::new(&ObserverGains::default(), &ferry_inverse()).unwrap();
        assert_eq!(obs.estimate(BodyVelocity::ZERO), ForceVector::ZERO);
        obs.zeta = Vector3::new(5.0, 0.0, 0.0);
        let nu = BodyVelocity::new(1.0 / obs.t[(0, 0)], 0.0, 0.0);
        let est = obs.estimate(nu);
        assert!((est.x - 6.0).abs() < 1e-12);
        assert_eq!(est.y, 0.0);
    }

    #[test]
    fn update_at_rest_is_stationary() {
        let vessel = Vessel::new(VesselParams::milliampere(), DampingForm::Literal).unwrap();
        let obs = ObserverState::new(&ObserverGains::default(), &vessel.inverse_mass).unwrap();
        let next = obs.update(BodyVelocity::ZERO, ForceVector::ZERO, &vessel, 0.01);
        assert_eq!(next, Vector3::zeros());
    }

    #[test]
    fn ball_radius_values() {
        let sigma = 0.9998633;
        assert_eq!(ball_radius(&ObserverGains::default(), sigma, 0.0).unwrap(), 0.0);
        let r = ball_radius(&ObserverGains::default(), sigma, 1.0).unwrap();
        assert!((r - 1.0 / (2.0 * 50.0 * sigma - 1.0).sqrt()).abs() < 1e-15);
        assert!((r - 0.1005).abs() < 1e-4);
        let near = ball_radius(&ObserverGains::uniform(0.5 + 1e-9), 1.0, 1.0).unwrap();
        assert!(near > 1e4);
        assert!(matches!(
            ball_radius(&ObserverGains::uniform(0.4), 1.0, 1.0),
            Err(Error::WeakGains { .. })
        ));
    }

    #[test]
    fn discrete_stability_levels() {
        let s = 0.9998633;
        assert_eq!(
            discrete_stability(&ObserverGains::uniform(50.0), s, 0.01).level,
            DiscreteStability::Monotone
        );
        assert_eq!(
            discrete_stability(&ObserverGains::uniform(150.0), s, 0.01).level,
            DiscreteStability::Oscillatory
        );
        let bad = discrete_stability(&ObserverGains::uniform(250.0), s, 0.1);
        assert_eq!(bad.level, DiscreteStability::Unstable);
        assert!((bad.products[0] - 25.0).abs() < 0.01);
        assert!(matches!(
            bad.into_result(),
            Err(Error::UnstableDiscretization { .. })
        ));
    }

    fn arb_inverse() -> impl Strategy<Value = (InverseMass, ObserverGains)> {
        // off-diagonals below the geometric mean of the diagonal keep the
        // block invertible and in the weak-coupling case
        (
            (1.0f64..1e4, 1.0f64..1e4, 1.0f64..1e4),
            (-0.9f64..0.9, -0.9f64..0.9),
            prop::array::uniform3(0.01f64..300.0),
        )
            .prop_map(|((m11, m22, m33), (a, b), g)| {
                let gm = (m22 * m33).sqrt();
                let p = VesselParams {
                    m11,
                    m22,
                    m33,
                    m23: a * gm,
                    m32: b * gm,
                    ..VesselParams::milliampere()
                };
                (InverseMass::from_params(&p).unwrap(), ObserverGains(g))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn structural_identities((k, gains) in arb_inverse()) {
            let (t, sigma) = build_t(&gains, &k).unwrap();
            let report = check_conditions(&t, &k);
            prop_assert!(report.c1.holds && report.c3.holds);
            prop_assert!(report.all_hold());
            let product = t * k.matrix();
            let expected = Matrix3::from_diagonal(&Vector3::from(gains.0.map(|g| g * sigma)));
            let scale = expected.abs().max();
            prop_assert!((product - expected).abs().max() <= 1e-10 * scale);
        }
    }
}
