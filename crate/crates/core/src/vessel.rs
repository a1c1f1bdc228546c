//! Three degree-of-freedom surface vessel model.
//!
//! State is split into the body-frame velocity `nu = (u, v, r)` and the
//! global pose `eta = (x, y, psi)`. The dynamics are
//!
//! ```text
//! M nu_dot + D(nu) nu + C(nu) nu = tau + tau_d
//! eta_dot = R(psi) nu
//! ```
//!
//! with a constant mass matrix whose only off-diagonal entries couple sway
//! and yaw, a nonlinear damping matrix, and a skew-symmetric Coriolis matrix.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! triple {
    ($(#[$meta:meta])* $name:ident { $a:ident, $b:ident, $c:ident }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
        pub struct $name {
            pub $a: f64,
            pub $b: f64,
            pub $c: f64,
        }

        impl $name {
            pub const ZERO: Self = Self { $a: 0.0, $b: 0.0, $c: 0.0 };

            pub const fn new($a: f64, $b: f64, $c: f64) -> Self {
                Self { $a, $b, $c }
            }

            pub fn to_vector(self) -> Vector3<f64> {
                Vector3::new(self.$a, self.$b, self.$c)
            }

            pub fn to_array(self) -> [f64; 3] {
                [self.$a, self.$b, self.$c]
            }

            pub fn is_finite(&self) -> bool {
                self.$a.is_finite() && self.$b.is_finite() && self.$c.is_finite()
            }
        }

        impl From<Vector3<f64>> for $name {
            fn from(v: Vector3<f64>) -> Self {
                Self::new(v[0], v[1], v[2])
            }
        }

        impl From<[f64; 3]> for $name {
            fn from(v: [f64; 3]) -> Self {
                Self::new(v[0], v[1], v[2])
            }
        }

        impl From<$name> for Vector3<f64> {
            fn from(v: $name) -> Self {
                v.to_vector()
            }
        }
    };
}

triple!(
    /// Body-frame velocity: surge `u` and sway `v` in m/s, yaw rate `r` in rad/s.
    BodyVelocity { u, v, r }
);

triple!(
    /// Global position in metres and heading in radians (not wrapped).
    Pose { x, y, psi }
);

triple!(
    /// Generalized force: surge and sway force in N, yaw moment in N·m.
    ForceVector { x, y, n }
);

impl std::ops::Add for ForceVector {
    type Output = ForceVector;
    fn add(self, o: ForceVector) -> ForceVector {
        ForceVector::new(self.x + o.x, self.y + o.y, self.n + o.n)
    }
}

/// Which damping expressions to use for `d11` and `d22`.
///
/// `Literal` drops the `|u|` and `|v|` factors on the quadratic coefficients,
/// `AbsoluteValue` restores them (the usual Fossen form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingForm {
    #[default]
    Literal,
    AbsoluteValue,
}

/// Mass matrix entries and hydrodynamic derivatives of the vessel.
///
/// Field naming: `abs_u_u` stands for the coefficient `X_{|u|u}`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselParams {
    pub m11: f64,
    pub m22: f64,
    pub m23: f64,
    pub m32: f64,
    pub m33: f64,
    pub x_u: f64,
    pub x_abs_u_u: f64,
    pub x_uuu: f64,
    pub y_v: f64,
    pub y_abs_v_v: f64,
    pub y_abs_r_v: f64,
    pub y_vvv: f64,
    pub y_r: f64,
    pub y_abs_v_r: f64,
    pub y_abs_r_r: f64,
    pub n_v: f64,
    pub n_abs_v_v: f64,
    pub n_abs_r_v: f64,
    pub n_r: f64,
    pub n_abs_v_r: f64,
    pub n_abs_r_r: f64,
    pub n_rrr: f64,
}

impl VesselParams {
    /// Identified parameters of the milliAmpere passenger ferry.
    pub const fn milliampere() -> Self {
        Self {
            m11: 2389.657,
            m22: 2533.911,
            m23: 62.386,
            m32: 28.141,
            m33: 5068.910,
            x_u: -27.632,
            x_abs_u_u: -110.064,
            x_uuu: -13.965,
            y_v: -52.947,
            y_abs_v_v: -116.486,
            y_abs_r_v: -1540.383,
            y_vvv: -24.313,
            y_r: 24.732,
            y_abs_v_r: 572.141,
            y_abs_r_r: -115.457,
            n_v: 3.5241,
            n_abs_v_v: -0.832,
            n_abs_r_v: 336.827,
            n_r: -122.860,
            n_abs_v_r: -121.957,
            n_abs_r_r: -874.428,
            n_rrr: 0.0,
        }
    }

    pub fn mass_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.m11, 0.0, 0.0, //
            0.0, self.m22, self.m23, //
            0.0, self.m32, self.m33,
        )
    }

    /// Coupling scalar `1 - m23 m32 / (m22 m33)`, equal to `1 - k23 k32 / (k22 k33)`.
    pub fn coupling(&self) -> f64 {
        1.0 - (self.m23 * self.m32) / (self.m22 * self.m33)
    }

    /// Checks finiteness, positivity of `m11`, invertibility and the weak-coupling regime.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.m11,
            self.m22,
            self.m23,
            self.m32,
            self.m33,
            self.x_u,
            self.x_abs_u_u,
            self.x_uuu,
            self.y_v,
            self.y_abs_v_v,
            self.y_abs_r_v,
            self.y_vvv,
            self.y_r,
            self.y_abs_v_r,
            self.y_abs_r_r,
            self.n_v,
            self.n_abs_v_v,
            self.n_abs_r_v,
            self.n_r,
            self.n_abs_v_r,
            self.n_abs_r_r,
            self.n_rrr,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("vessel parameters must be finite".into()));
        }
        if self.m11 <= 0.0 {
            return Err(Error::Config(format!("m11 must be positive, got {}", self.m11)));
        }
        let inv = InverseMass::from_params(self)?;
        let product = inv.k23 * inv.k32;
        let diagonal = inv.k22 * inv.k33;
        if product >= diagonal {
            return Err(Error::CaseViolation { product, diagonal });
        }
        Ok(())
    }
}

impl Default for VesselParams {
    fn default() -> Self {
        Self::milliampere()
    }
}

/// Entries of the inverse mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMass {
    pub k11: f64,
    pub k22: f64,
    pub k23: f64,
    pub k32: f64,
    pub k33: f64,
}

impl InverseMass {
    pub fn from_params(p: &VesselParams) -> Result<Self> {
        let det = p.m22 * p.m33 - p.m23 * p.m32;
        if !det.is_finite() || det.abs() < 1e-12 * (p.m22 * p.m33).abs() || det == 0.0 {
            return Err(Error::SingularMass { det });
        }
        if p.m11 == 0.0 {
            return Err(Error::SingularMass { det: 0.0 });
        }
        Ok(Self {
            k11: 1.0 / p.m11,
            k22: p.m33 / det,
            k23: -p.m23 / det,
            k32: -p.m32 / det,
            k33: p.m22 / det,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.k11, 0.0, 0.0, //
            0.0, self.k22, self.k23, //
            0.0, self.k32, self.k33,
        )
    }
}

/// Rotation from body frame to the global frame about the vertical axis.
pub fn rotation_matrix(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(
        c, -s, 0.0, //
        s, c, 0.0, //
        0.0, 0.0, 1.0,
    )
}

pub fn damping(nu: BodyVelocity, p: &VesselParams, form: DampingForm) -> Matrix3<f64> {
    let (u, v, r) = (nu.u, nu.v, nu.r);
    let (au, av, ar) = (u.abs(), v.abs(), r.abs());
    let (quad_u, quad_v) = match form {
        DampingForm::Literal => (1.0, 1.0),
        DampingForm::AbsoluteValue => (au, av),
    };
    let d11 = -p.x_u - p.x_abs_u_u * quad_u - p.x_uuu * u * u;
    let d22 = -p.y_v - p.y_abs_v_v * quad_v - p.y_abs_r_v * ar - p.y_vvv * v * v;
    let d23 = -p.y_r - p.y_abs_v_r * av - p.y_abs_r_r * ar;
    let d32 = -p.n_v - p.n_abs_v_v * av - p.n_abs_r_v * ar;
    let d33 = -p.n_r - p.n_abs_v_r * av - p.n_abs_r_r * ar - p.n_rrr * r * r;
    Matrix3::new(
        d11, 0.0, 0.0, //
        0.0, d22, d23, //
        0.0, d32, d33,
    )
}

pub fn coriolis(nu: BodyVelocity, p: &VesselParams) -> Matrix3<f64> {
    let c13 = -p.m22 * nu.v - p.m23 * nu.r;
    let c23 = p.m11 * nu.u;
    Matrix3::new(
        0.0, 0.0, c13, //
        0.0, 0.0, c23, //
        -c13, -c23, 0.0,
    )
}

/// A vessel with its inverse mass precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vessel {
    pub params: VesselParams,
    pub inverse_mass: InverseMass,
    pub damping_form: DampingForm,
}

impl Vessel {
    pub fn new(params: VesselParams, damping_form: DampingForm) -> Result<Self> {
        params.validate()?;
        let inverse_mass = InverseMass::from_params(&params)?;
        Ok(Self {
            params,
            inverse_mass,
            damping_form,
        })
    }

    pub fn damping(&self, nu: BodyVelocity) -> Matrix3<f64> {
        damping(nu, &self.params, self.damping_form)
    }

    pub fn coriolis(&self, nu: BodyVelocity) -> Matrix3<f64> {
        coriolis(nu, &self.params)
    }

    /// `M^-1 (tau + tau_d - D(nu) nu - C(nu) nu)`.
    pub fn acceleration(&self, nu: BodyVelocity, tau: ForceVector, tau_d: ForceVector) -> BodyVelocity {
        let v = nu.to_vector();
        let rhs = tau.to_vector() + tau_d.to_vector() - self.damping(nu) * v - self.coriolis(nu) * v;
        (self.inverse_mass.matrix() * rhs).into()
    }

    /// One explicit Euler step of velocity and pose. `process_noise` is added to
    /// the new velocity as is.
    pub fn step(
        &self,
        nu: BodyVelocity,
        eta: Pose,
        tau: ForceVector,
        tau_d: ForceVector,
        dt: f64,
        process_noise: Vector3<f64>,
    ) -> (BodyVelocity, Pose) {
        let next_nu = self.euler_velocity(nu, tau, tau_d, dt) + process_noise;
        let next_eta = eta.to_vector() + dt * rotation_matrix(eta.psi) * nu.to_vector();
        (next_nu.into(), next_eta.into())
    }

    /// Noise-free velocity update `nu + dt * acceleration`.
    pub fn euler_velocity(
        &self,
        nu: BodyVelocity,
        tau: ForceVector,
        tau_d: ForceVector,
        dt: f64,
    ) -> Vector3<f64> {
        nu.to_vector() + dt * self.acceleration(nu, tau, tau_d).to_vector()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn ferry() -> Vessel {
        Vessel::new(VesselParams::milliampere(), DampingForm::Literal).unwrap()
    }

    #[test]
    fn rotation_known_angles() {
        assert_eq!(rotation_matrix(0.0), Matrix3::identity());
        let q = rotation_matrix(FRAC_PI_2);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((q - expected).abs().max() < 1e-15);
    }

    #[test]
    fn inverse_mass_table_values() {
        let p = VesselParams::milliampere();
        let inv = InverseMass::from_params(&p).unwrap();
        assert!((inv.k11 - 4.184702e-4).abs() < 1e-9);
        // 2x2 block inverse, written out independently
        let det: f64 = 2533.911 * 5068.910 - 62.386 * 28.141;
        assert!((62.386f64 * 28.141 - 1.7556e3).abs() < 0.1);
        assert!((inv.k22 - 5068.910 / det).abs() < 1e-18);
        assert!((inv.k33 - 2533.911 / det).abs() < 1e-18);
        let round = p.mass_matrix() * inv.matrix();
        assert!((round - Matrix3::identity()).abs().max() < 1e-10);
    }

    #[test]
    fn inverse_mass_diagonal_case() {
        let p = VesselParams {
            m23: 0.0,
            m32: 0.0,
            ..VesselParams::milliampere()
        };
        let inv = InverseMass::from_params(&p).unwrap();
        assert!((inv.k22 * p.m22 - 1.0).abs() < 1e-15);
        assert!((inv.k33 * p.m33 - 1.0).abs() < 1e-15);
        assert_eq!(inv.k23, 0.0);
        assert_eq!(inv.k32, 0.0);
    }

    #[test]
    fn singular_block_rejected() {
        let p = VesselParams {
            m22: 2.0,
            m33: 8.0,
            m23: 4.0,
            m32: 4.0,
            ..VesselParams::milliampere()
        };
        assert!(matches!(
            InverseMass::from_params(&p),
            Err(Error::SingularMass { .. })
        ));
    }

    #[test]
    fn strong_coupling_rejected() {
        // det < 0 puts k23 k32 above k22 k33
        let p = VesselParams {
            m22: 2.0,
            m33: 8.0,
            m23: 5.0,
            m32: 5.0,
            ..VesselParams::milliampere()
        };
        assert!(matches!(p.validate(), Err(Error::CaseViolation { .. })));
    }

    #[test]
    fn damping_at_rest() {
        let d = damping(
            BodyVelocity::ZERO,
            &VesselParams::milliampere(),
            DampingForm::Literal,
        );
        assert!((d[(0, 0)] - 137.696).abs() < 1e-9);
        assert!((d[(1, 2)] + 24.732).abs() < 1e-12);
        // absolute-value form loses the constant quadratic term at rest
        let d_abs = damping(
            BodyVelocity::ZERO,
            &VesselParams::milliampere(),
            DampingForm::AbsoluteValue,
        );
        assert!((d_abs[(0, 0)] - 27.632).abs() < 1e-12);
    }

    #[test]
    fn damping_zero_coefficients() {
        let p = VesselParams {
            x_u: 0.0,
            x_abs_u_u: 0.0,
            x_uuu: 0.0,
            y_v: 0.0,
            y_abs_v_v: 0.0,
            y_abs_r_v: 0.0,
            y_vvv: 0.0,
            y_r: 0.0,
            y_abs_v_r: 0.0,
            y_abs_r_r: 0.0,
            n_v: 0.0,
            n_abs_v_v: 0.0,
            n_abs_r_v: 0.0,
            n_r: 0.0,
            n_abs_v_r: 0.0,
            n_abs_r_r: 0.0,
            n_rrr: 0.0,
            ..VesselParams::milliampere()
        };
        let nu = BodyVelocity::new(1.3, -0.4, 0.2);
        for form in [DampingForm::Literal, DampingForm::AbsoluteValue] {
            assert_eq!(damping(nu, &p, form), Matrix3::zeros());
        }
    }

    #[test]
    fn coriolis_surge_only() {
        let c = coriolis(BodyVelocity::new(1.0, 0.0, 0.0), &VesselParams::milliampere());
        assert_eq!(c[(1, 2)], 2389.657);
        assert_eq!(c[(2, 1)], -2389.657);
        assert_eq!(
            coriolis(BodyVelocity::ZERO, &VesselParams::milliampere()),
            Matrix3::zeros()
        );
    }

    #[test]
    fn acceleration_decoupled_surge() {
        let a = ferry().acceleration(
            BodyVelocity::ZERO,
            ForceVector::ZERO,
            ForceVector::new(1000.0, 0.0, 0.0),
        );
        assert!((a.u - 0.41847).abs() < 1e-5);
        assert_eq!(a.v, 0.0);
        assert_eq!(a.r, 0.0);
        let rest = ferry().acceleration(BodyVelocity::ZERO, ForceVector::ZERO, ForceVector::ZERO);
        assert_eq!(rest, BodyVelocity::ZERO);
    }

    #[test]
    fn step_at_rest_and_axis_motion() {
        let vessel = ferry();
        let (nu, eta) = vessel.step(
            BodyVelocity::ZERO,
            Pose::new(3.0, -2.0, 0.7),
            ForceVector::ZERO,
            ForceVector::ZERO,
            0.1,
            Vector3::zeros(),
        );
        assert_eq!(nu, BodyVelocity::ZERO);
        assert_eq!(eta, Pose::new(3.0, -2.0, 0.7));

        let (_, eta) = vessel.step(
            BodyVelocity::new(1.0, 0.0, 0.0),
            Pose::ZERO,
            ForceVector::ZERO,
            ForceVector::ZERO,
            0.1,
            Vector3::zeros(),
        );
        assert!((eta.x - 0.1).abs() < 1e-15);
        assert_eq!(eta.y, 0.0);
    }

    /// Classical RK4 on the continuous velocity dynamics, test-only reference.
    fn rk4(vessel: &Vessel, nu: BodyVelocity, tau_d: ForceVector, h: f64) -> Vector3<f64> {
        let f = |x: Vector3<f64>| {
            vessel
                .acceleration(x.into(), ForceVector::ZERO, tau_d)
                .to_vector()
        };
        let x = nu.to_vector();
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    #[test]
    fn euler_local_error_is_second_order() {
        let vessel = ferry();
        let nu = BodyVelocity::new(1.2, -0.3, 0.05);
        let tau_d = ForceVector::new(2000.0, -800.0, 300.0);
        let err = |h: f64| {
            (vessel.euler_velocity(nu, ForceVector::ZERO, tau_d, h) - rk4(&vessel, nu, tau_d, h)).norm()
        };
        let e1 = err(0.4);
        let e2 = err(0.2);
        let e3 = err(0.1);
        for ratio in [e1 / e2, e2 / e3] {
            assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn rotation_is_proper_orthogonal(psi in -100.0f64..100.0) {
            let q = rotation_matrix(psi);
            prop_assert!((q.transpose() * q - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((q.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn coriolis_skew_symmetric(u in -10.0f64..10.0, v in -10.0f64..10.0, r in -2.0f64..2.0) {
            let nu = BodyVelocity::new(u, v, r);
            let c = coriolis(nu, &VesselParams::milliampere());
            prop_assert_eq!(c + c.transpose(), Matrix3::zeros());
            let x = nu.to_vector();
            let power = x.dot(&(c * x));
            let scale = c.abs().max() * x.norm_squared() + 1.0;
            prop_assert!(power.abs() <= 1e-9 * scale);
        }

        #[test]
        fn equation_of_motion_residual(
            u in -10.0f64..10.0, v in -10.0f64..10.0, r in -2.0f64..2.0,
            t in prop::array::uniform3(-2e4f64..2e4),
            d in prop::array::uniform3(-2e4f64..2e4),
        ) {
            let vessel = ferry();
            let nu = BodyVelocity::new(u, v, r);
            let (tau, tau_d) = (ForceVector::from(t), ForceVector::from(d));
            let a = vessel.acceleration(nu, tau, tau_d).to_vector();
            let x = nu.to_vector();
            let dx = vessel.damping(nu) * x;
            let cx = vessel.coriolis(nu) * x;
            let residual = vessel.params.mass_matrix() * a + dx + cx - tau.to_vector() - tau_d.to_vector();
            let scale = dx.norm() + cx.norm() + tau.to_vector().norm() + tau_d.to_vector().norm() + 1.0;
            prop_assert!(residual.norm() <= 1e-8 * scale);
        }

        #[test]
        fn surge_damping_is_even(u in -20.0f64..20.0) {
            let p = VesselParams::milliampere();
            for form in [DampingForm::Literal, DampingForm::AbsoluteValue] {
                let plus = damping(BodyVelocity::new(u, 0.0, 0.0), &p, form)[(0, 0)];
                let minus = damping(BodyVelocity::new(-u, 0.0, 0.0), &p, form)[(0, 0)];
                prop_assert_eq!(plus, minus);
            }
        }
    }
}
