//! SE(3) symmetry of the relative attitude system.
//!
//! Right actions on states, inputs and outputs, the equivariant lift into
//! se(3), and the logarithmic chart at the origin `(I, 0)`. The residual
//! functions at the bottom evaluate the equivariance and lift conditions
//! numerically; they only call the actions and the system vector field, so
//! they serve as independent checks of the closed forms.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::liegroup::{so3_exp, so3_log, wedge, AlgebraElement, GroupElement};
use crate::model::{state_derivative, ManifoldState, Measurement, SystemInput};

/// Local coordinates `(log(e_R)^v, e_omega)` of a state error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalError {
    pub eps_r: Vector3<f64>,
    pub eps_omega: Vector3<f64>,
}

impl LocalError {
    pub fn new(eps_r: Vector3<f64>, eps_omega: Vector3<f64>) -> Self {
        LocalError { eps_r, eps_omega }
    }

    pub fn zero() -> Self {
        LocalError::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn to_vector(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.eps_r.x,
            self.eps_r.y,
            self.eps_r.z,
            self.eps_omega.x,
            self.eps_omega.y,
            self.eps_omega.z,
        )
    }

    pub fn from_vector(v: &nalgebra::Vector6<f64>) -> Self {
        LocalError::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }
}

/// `phi((Q, q), (R, omega)) = (R Q, Q^T (omega - q))`
pub fn phi(g: &GroupElement, x: &ManifoldState) -> ManifoldState {
    let qt = g.rot.transpose();
    ManifoldState::new(x.rot * g.rot, qt.matrix() * (x.omega - g.vec))
}

/// `psi((Q, q), (u, a, v, w)) = (Q^T u, Q^T a, Q^T (v - q), Q^T (w + q))`
pub fn psi(g: &GroupElement, input: &SystemInput) -> SystemInput {
    let qt = g.rot.matrix().transpose();
    SystemInput { u: qt * input.u, a: qt * input.a, v: qt * (input.v - g.vec), w: qt * (input.w + g.vec) }
}

/// `rho((Q, q), (d1, d2)) = (Q^T d1, Q^T d2)`
pub fn rho(g: &GroupElement, y: &Measurement) -> Measurement {
    let qt = g.rot.matrix().transpose();
    Measurement::new(qt * y.d1, qt * y.d2, y.t)
}

/// `Lambda = ((u - omega + v)^, -a + u x w + omega x v)`
pub fn lift(x: &ManifoldState, input: &SystemInput) -> AlgebraElement {
    AlgebraElement::new(
        wedge(&(input.u - x.omega + input.v)),
        -input.a + input.u.cross(&input.w) + x.omega.cross(&input.v),
    )
}

/// `|Ad_{g^-1} Lambda(x, in) - Lambda(phi_g(x), psi_g(in))|`
pub fn check_lift_condition2(g: &GroupElement, x: &ManifoldState, input: &SystemInput) -> f64 {
    let lhs = g.inverse().adjoint(&lift(x, input));
    let rhs = lift(&phi(g, x), &psi(g, input));
    (lhs - rhs).norm()
}

/// Group element that carries the origin to `x`: `(R, -R omega)`.
pub fn state_to_group(x: &ManifoldState) -> GroupElement {
    GroupElement::new(x.rot, -(x.rot.matrix() * x.omega))
}

/// `phi(g, (I, 0)) = (Q, -Q^T q)`
pub fn group_to_state(g: &GroupElement) -> ManifoldState {
    ManifoldState::new(g.rot, -(g.rot.matrix().transpose() * g.vec))
}

/// `E = X X_hat^-1 = (Q Q_hat^T, -Q Q_hat^T q_hat + q)`
pub fn group_error(truth: &GroupElement, estimate: &GroupElement) -> GroupElement {
    *truth * estimate.inverse()
}

/// Chart at the origin. Fails when the attitude error is a half turn.
pub fn theta(e: &ManifoldState) -> Result<LocalError> {
    Ok(LocalError::new(so3_log(&e.rot)?, e.omega))
}

pub fn theta_inv(eps: &LocalError) -> ManifoldState {
    ManifoldState::new(so3_exp(&eps.eps_r), eps.eps_omega)
}

/// Attitude and rate error norms `(|Q~ - I|_F, |q~|)` of a group error.
pub fn error_norms(e: &GroupElement) -> (f64, f64) {
    ((e.rot.matrix() - Matrix3::identity()).norm(), e.vec.norm())
}

/// Central-difference step on exponential coordinates.
pub const FD_STEP: f64 = 1e-6;

fn curve_point(x: &AlgebraElement, tau: f64) -> GroupElement {
    GroupElement::new(so3_exp(&(x.rot_vector() * tau)), x.vec * tau)
}

fn tangent_distance(
    (r_a, w_a): (Matrix3<f64>, Vector3<f64>),
    (r_b, w_b): (Matrix3<f64>, Vector3<f64>),
) -> f64 {
    ((r_a - r_b).norm_squared() + (w_a - w_b).norm_squared()).sqrt()
}

/// Numeric `D phi_x(I)[Lambda]` against the extended vector field (first lift
/// condition).
pub fn lift_condition1_residual(x: &ManifoldState, input: &SystemInput) -> f64 {
    let lam = lift(x, input);
    let h = FD_STEP;
    let plus = phi(&curve_point(&lam, h), x);
    let minus = phi(&curve_point(&lam, -h), x);
    let numeric =
        ((plus.rot.matrix() - minus.rot.matrix()) / (2.0 * h), (plus.omega - minus.omega) / (2.0 * h));
    tangent_distance(numeric, state_derivative(x, input))
}

/// Numeric `D phi_g(x)[f(x, in)]` against `f(phi_g(x), psi_g(in))`.
pub fn equivariance_residual(g: &GroupElement, x: &ManifoldState, input: &SystemInput) -> f64 {
    let (_, omega_dot) = state_derivative(x, input);
    let body_rate = input.u - x.omega + input.v;
    let h = FD_STEP;
    let along = |tau: f64| {
        let xt = ManifoldState::new(x.rot * so3_exp(&(body_rate * tau)), x.omega + omega_dot * tau);
        phi(g, &xt)
    };
    let (plus, minus) = (along(h), along(-h));
    let numeric =
        ((plus.rot.matrix() - minus.rot.matrix()) / (2.0 * h), (plus.omega - minus.omega) / (2.0 * h));
    tangent_distance(numeric, state_derivative(&phi(g, x), &psi(g, input)))
}

/// `|phi(g2, phi(g1, x)) - phi(g1 g2, x)|` (right action compatibility).
pub fn phi_compatibility_residual(g1: &GroupElement, g2: &GroupElement, x: &ManifoldState) -> f64 {
    let two_step = phi(g2, &phi(g1, x));
    let joint = phi(&(*g1 * *g2), x);
    tangent_distance((*two_step.rot.matrix(), two_step.omega), (*joint.rot.matrix(), joint.omega))
}

/// Same law for `psi`.
pub fn psi_compatibility_residual(g1: &GroupElement, g2: &GroupElement, input: &SystemInput) -> f64 {
    let a = psi(g2, &psi(g1, input));
    let b = psi(&(*g1 * *g2), input);
    [(a.u - b.u), (a.a - b.a), (a.v - b.v), (a.w - b.w)].iter().map(|d| d.norm_squared()).sum::<f64>().sqrt()
}

/// Same law for `rho`.
pub fn rho_compatibility_residual(g1: &GroupElement, g2: &GroupElement, y: &Measurement) -> f64 {
    let a = rho(g2, &rho(g1, y));
    let b = rho(&(*g1 * *g2), y);
    ((a.d1 - b.d1).norm_squared() + (a.d2 - b.d2).norm_squared()).sqrt()
}
