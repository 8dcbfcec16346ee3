//! Relative attitude kinematics and the two-direction measurement model.
//!
//! The state is `(R, omega)`: the attitude of the chaser relative to the target
//! and the target angular velocity expressed in the chaser frame. With chaser
//! rate `u`, target acceleration `a` and the virtual inputs `v`, `w`:
//!
//! ```text
//! R'     = R (u - omega + v)^
//! omega' = (omega + w) x u + a
//! ```

mod observability;
mod poly;

pub use observability::{observability_rank, ObservabilityReport, DEFAULT_LIE_ORDER};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::liegroup::{random_unit_vector, so3_exp, wedge, Rotation};

/// Relative attitude and target angular velocity (rad/s, chaser frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldState {
    pub rot: Rotation,
    pub omega: Vector3<f64>,
}

impl ManifoldState {
    pub fn new(rot: Rotation, omega: Vector3<f64>) -> Self {
        ManifoldState { rot, omega }
    }

    /// The coordinate origin `(I, 0)`.
    pub fn origin() -> Self {
        ManifoldState::new(Rotation::identity(), Vector3::zeros())
    }

    /// Target angular velocity expressed in the target frame, `R omega`.
    pub fn omega_target(&self) -> Vector3<f64> {
        self.rot.matrix() * self.omega
    }
}

/// Chaser rate `u`, target acceleration `a` and virtual inputs `v`, `w`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemInput {
    pub u: Vector3<f64>,
    pub a: Vector3<f64>,
    pub v: Vector3<f64>,
    pub w: Vector3<f64>,
}

impl SystemInput {
    /// Gyro-only input with `a = v = w = 0`.
    pub fn from_rate(u: Vector3<f64>) -> Self {
        SystemInput { u, ..Default::default() }
    }

    pub fn is_finite(&self) -> bool {
        [self.u, self.a, self.v, self.w].iter().all(|x| x.iter().all(|c| c.is_finite()))
    }
}

/// Two non-collinear unit directions fixed in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceDirections {
    d1: Vector3<f64>,
    d2: Vector3<f64>,
}

impl ReferenceDirections {
    pub fn new(d1: Vector3<f64>, d2: Vector3<f64>) -> Result<Self> {
        let unit = |d: &Vector3<f64>| (d.norm() - 1.0).abs() <= 1e-12;
        if !unit(&d1) || !unit(&d2) || d1.cross(&d2).norm() <= 1e-6 {
            return Err(Error::DegenerateDirections);
        }
        Ok(ReferenceDirections { d1, d2 })
    }

    /// Normalizes both inputs before validation.
    pub fn normalized(d1: Vector3<f64>, d2: Vector3<f64>) -> Result<Self> {
        let (n1, n2) = (d1.norm(), d2.norm());
        if n1 == 0.0 || n2 == 0.0 || !n1.is_finite() || !n2.is_finite() {
            return Err(Error::DegenerateDirections);
        }
        Self::new(d1 / n1, d2 / n2)
    }

    /// `e1` and `e2`.
    pub fn standard() -> Self {
        ReferenceDirections { d1: Vector3::x(), d2: Vector3::y() }
    }

    pub fn d1(&self) -> &Vector3<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &Vector3<f64> {
        &self.d2
    }

    pub fn as_array(&self) -> [Vector3<f64>; 2] {
        [self.d1, self.d2]
    }
}

impl Default for ReferenceDirections {
    fn default() -> Self {
        ReferenceDirections::standard()
    }
}

/// Directions observed in the chaser frame at time `t` (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
    pub t: f64,
}

impl Measurement {
    pub fn new(d1: Vector3<f64>, d2: Vector3<f64>, t: f64) -> Self {
        Measurement { d1, d2, t }
    }

    /// Stacked `[d1; d2]`.
    pub fn stacked(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(self.d1.x, self.d1.y, self.d1.z, self.d2.x, self.d2.y, self.d2.z)
    }

    pub fn as_array(&self) -> [Vector3<f64>; 2] {
        [self.d1, self.d2]
    }
}

/// Tangent `(R', omega')` of the extended system.
pub fn state_derivative(x: &ManifoldState, input: &SystemInput) -> (Matrix3<f64>, Vector3<f64>) {
    let r_dot = x.rot.matrix() * wedge(&(input.u - x.omega + input.v));
    let omega_dot = (x.omega + input.w).cross(&input.u) + input.a;
    (r_dot, omega_dot)
}

/// One step of the ground-truth integrator.
///
/// The attitude flow is split into `R exp(-dt omega^) exp(dt (u + v)^)` and
/// the rate into `exp(-dt u^) omega + dt (a - u x w)`. Both factors stay on
/// their manifolds, and with `a = v = w = 0` and constant `u` the step is the
/// exact flow, so `|omega|` is conserved to rounding.
pub fn integrate_truth(x: &ManifoldState, input: &SystemInput, dt: f64) -> Result<ManifoldState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("integration step must be positive, got {dt}")));
    }
    let rot = x.rot * so3_exp(&(-dt * x.omega)) * so3_exp(&(dt * (input.u + input.v)));
    let omega = so3_exp(&(-dt * input.u)).matrix() * x.omega + dt * (input.a - input.u.cross(&input.w));
    Ok(ManifoldState::new(rot, omega))
}

/// `d_i = R^T d_i_ring`.
pub fn measure(x: &ManifoldState, refs: &ReferenceDirections, t: f64) -> Measurement {
    let rt = x.rot.matrix().transpose();
    Measurement::new(rt * refs.d1, rt * refs.d2, t)
}

/// Rotates each direction by an independent random angle
/// `theta ~ N(0, sigma_theta^2)` about a uniform random axis.
pub fn apply_noise<R: Rng + ?Sized>(m: &Measurement, sigma_theta: f64, rng: &mut R) -> Measurement {
    assert!(sigma_theta >= 0.0, "sigma_theta must be non-negative");
    if sigma_theta == 0.0 {
        return *m;
    }
    let normal = Normal::new(0.0, sigma_theta).expect("valid normal");
    let mut perturb = |d: &Vector3<f64>| {
        let theta: f64 = normal.sample(rng);
        let axis = random_unit_vector(rng);
        let out = Rotation::from_axis_angle(&axis, theta) * *d;
        out / out.norm()
    };
    let d1 = perturb(&m.d1);
    let d2 = perturb(&m.d2);
    Measurement::new(d1, d2, m.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::random_rotation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    #[test]
    fn derivative_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_rotation(&mut rng);
        let w = rand_vec(&mut rng, 1.0);
        let u = rand_vec(&mut rng, 1.0);

        let (rd, wd) = state_derivative(&ManifoldState::new(r, w), &SystemInput::from_rate(w));
        assert_eq!(rd, Matrix3::zeros());
        assert!((wd - w.cross(&w)).norm() < 1e-15);

        let (rd, wd) = state_derivative(&ManifoldState::new(r, Vector3::zeros()), &SystemInput::default());
        assert_eq!(rd, Matrix3::zeros());
        assert_eq!(wd, Vector3::zeros());

        // R' from the two inertial attitudes: R u^ - (omega_T)^ R with omega_T = R omega.
        let (rd, _) = state_derivative(&ManifoldState::new(r, w), &SystemInput::from_rate(u));
        let omega_t = r.matrix() * w;
        let oracle = r.matrix() * wedge(&u) - wedge(&omega_t) * r.matrix();
        assert!((rd - oracle).norm() < 1e-12);
    }

    #[test]
    fn integrator_rejects_non_positive_step() {
        let x = ManifoldState::origin();
        assert!(integrate_truth(&x, &SystemInput::default(), 0.0).is_err());
        assert!(integrate_truth(&x, &SystemInput::default(), -1.0).is_err());
    }

    #[test]
    fn integrator_tiny_step_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = ManifoldState::new(random_rotation(&mut rng), rand_vec(&mut rng, 1.5));
        let input = SystemInput::from_rate(rand_vec(&mut rng, 1.5));
        let y = integrate_truth(&x, &input, 1e-9).unwrap();
        assert!((y.rot.matrix() - x.rot.matrix()).norm() <= 1e-8);
        assert!((y.omega - x.omega).norm() <= 1e-8);
    }

    #[test]
    fn integrator_conserves_rate_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = ManifoldState::new(random_rotation(&mut rng), rand_vec(&mut rng, 1.5));
        let input = SystemInput::from_rate(rand_vec(&mut rng, 1.5));
        let n0 = x.omega.norm();
        // omega' . omega = (omega x u) . omega = 0
        let (_, wd) = state_derivative(&x, &input);
        assert!(wd.dot(&x.omega).abs() < 1e-12);
        for _ in 0..1000 {
            x = integrate_truth(&x, &input, 0.01).unwrap();
        }
        assert!((x.omega.norm() - n0).abs() <= 1e-6);
        assert!(x.rot.orthonormality_error() < 1e-12);
    }

    #[test]
    fn integrator_matches_closed_form_for_constant_rates() {
        // R(t) = exp(-t omega_T^) R0 exp(t u^) when omega_T and u are constant.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r0 = random_rotation(&mut rng);
        let w0 = rand_vec(&mut rng, 1.5);
        let u = rand_vec(&mut rng, 1.5);
        let omega_t = r0.matrix() * w0;
        let mut x = ManifoldState::new(r0, w0);
        let input = SystemInput::from_rate(u);
        for _ in 0..500 {
            x = integrate_truth(&x, &input, 0.01).unwrap();
        }
        let t = 5.0;
        let oracle = so3_exp(&(-t * omega_t)) * r0 * so3_exp(&(t * u));
        assert!((x.rot.matrix() - oracle.matrix()).norm() < 1e-10);
        assert!((x.omega - oracle.matrix().transpose() * omega_t).norm() < 1e-10);
    }

    #[test]
    fn integrator_first_order_with_acceleration() {
        // With a != 0 the step is first order: successive halvings shrink the
        // error against a fine reference by about 2.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = ManifoldState::new(random_rotation(&mut rng), rand_vec(&mut rng, 1.0));
        let input =
            SystemInput { u: rand_vec(&mut rng, 1.0), a: rand_vec(&mut rng, 1.0), ..Default::default() };
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut x = x0;
            for _ in 0..n {
                x = integrate_truth(&x, &input, dt).unwrap();
            }
            x
        };
        let reference = run(1 << 16);
        let err = |n: usize| {
            let x = run(n);
            (x.rot.matrix() - reference.rot.matrix()).norm() + (x.omega - reference.omega).norm()
        };
        let errors: Vec<f64> = [64, 128, 256, 512, 1024].iter().map(|&n| err(n)).collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn measure_known_values() {
        let refs = ReferenceDirections::standard();
        let m = measure(&ManifoldState::origin(), &refs, 0.0);
        assert_eq!(m.d1, *refs.d1());
        assert_eq!(m.d2, *refs.d2());

        let x = ManifoldState::new(so3_exp(&Vector3::new(0.0, 0.0, PI / 2.0)), Vector3::zeros());
        let m = measure(&x, &refs, 0.0);
        assert!((m.d1 - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn measure_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let refs = ReferenceDirections::normalized(Vector3::new(1.0, 0.2, 0.0), Vector3::new(0.3, 1.0, 0.5))
            .unwrap();
        let ref_angle = refs.d1().angle(refs.d2());
        for _ in 0..100 {
            let x = ManifoldState::new(random_rotation(&mut rng), Vector3::zeros());
            let m = measure(&x, &refs, 0.0);
            assert!((m.d1.angle(&m.d2) - ref_angle).abs() < 1e-12);
            assert!((m.d1.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_validation() {
        assert_eq!(ReferenceDirections::new(Vector3::x(), Vector3::x()), Err(Error::DegenerateDirections));
        assert_eq!(
            ReferenceDirections::new(Vector3::x() * 2.0, Vector3::y()),
            Err(Error::DegenerateDirections)
        );
        assert!(ReferenceDirections::normalized(Vector3::x() * 2.0, Vector3::y()).is_ok());
    }

    #[test]
    fn noise_free_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = Measurement::new(Vector3::x(), Vector3::y(), 1.0);
        assert_eq!(apply_noise(&m, 0.0, &mut rng), m);
    }

    #[test]
    fn noise_statistics() {
        // The deviation angle between d and R(theta, n) d is
        // acos(cos^2(a) + sin^2(a) cos(theta)) with a the angle between n and d.
        // Reference mean from an independent sampling of theta and a.
        let sigma = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(0.0, sigma).unwrap();
        let n = 100_000;
        let oracle: f64 = (0..n)
            .map(|_| {
                let theta: f64 = normal.sample(&mut rng);
                let c: f64 = rng.random_range(-1.0..1.0); // cos(a) is uniform on the sphere
                let s2 = 1.0 - c * c;
                (c * c + s2 * theta.cos()).clamp(-1.0, 1.0).acos()
            })
            .sum::<f64>()
            / n as f64;

        let d = Vector3::new(0.0, 0.6, 0.8);
        let m = Measurement::new(d, Vector3::x(), 0.0);
        let mut total = 0.0;
        for _ in 0..n {
            let noisy = apply_noise(&m, sigma, &mut rng);
            assert!((noisy.d1.norm() - 1.0).abs() <= 1e-12);
            assert!((noisy.d2.norm() - 1.0).abs() <= 1e-12);
            total += noisy.d1.angle(&d);
        }
        let mean = total / n as f64;
        assert!((mean - oracle).abs() < 0.002, "mean {mean} oracle {oracle}");
    }
}
