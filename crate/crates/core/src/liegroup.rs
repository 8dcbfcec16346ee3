//! SO(3) and SE(3) primitives.
//!
//! Group elements of SE(3) are stored as a pair `(Q, q)` of a rotation and a
//! vector with product `(Q2, q2)(Q1, q1) = (Q2 Q1, Q2 q1 + q2)`. Algebra
//! elements are pairs `(S, s)` with `S` skew-symmetric.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Below this angle exp/log switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Rotations closer than this to a half turn have no principal logarithm here.
pub const PI_MARGIN: f64 = 1e-6;

/// Default tolerance for [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Skew-symmetric matrix with `wedge(v) * y == v.cross(&y)`.
#[inline]
pub fn wedge(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`wedge`]. Fails when `S` is not skew-symmetric to [`SKEW_TOLERANCE`].
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    vee_with_tolerance(s, SKEW_TOLERANCE)
}

pub fn vee_with_tolerance(s: &Matrix3<f64>, tol: f64) -> Result<Vector3<f64>> {
    let asymmetry = (s + s.transpose()).norm();
    if !(asymmetry <= tol) {
        return Err(Error::NonSkewInput { asymmetry });
    }
    Ok(vee_unchecked(s))
}

/// Reads the skew part without validation, averaging mirrored entries.
#[inline]
pub(crate) fn vee_unchecked(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(0.5 * (s[(2, 1)] - s[(1, 2)]), 0.5 * (s[(0, 2)] - s[(2, 0)]), 0.5 * (s[(1, 0)] - s[(0, 1)]))
}

/// Rodrigues exponential of a rotation vector.
pub fn so3_exp(v: &Vector3<f64>) -> Rotation {
    let theta_sq = v.norm_squared();
    let theta = theta_sq.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let k = wedge(v);
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// Principal logarithm as a rotation vector with angle in `[0, pi)`.
pub fn so3_log(r: &Rotation) -> Result<Vector3<f64>> {
    let m = &r.0;
    let axis_sin = vee_unchecked(m); // sin(theta) * axis
    let sin_theta = axis_sin.norm();
    let cos_theta = 0.5 * (m.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);

    if theta >= PI - PI_MARGIN {
        return Err(Error::NearPiSingularity { angle: theta });
    }
    if theta < SMALL_ANGLE {
        return Ok(axis_sin * (1.0 + theta * theta / 6.0));
    }
    if theta < PI - 1e-3 {
        return Ok(axis_sin * (theta / sin_theta));
    }

    // Close to a half turn sin(theta) carries little information about the
    // axis; read it from the symmetric part instead.
    let b = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let (col, _) =
        (0..3).map(|j| (j, b[(j, j)])).fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut axis: Vector3<f64> = b.column(col).into_owned();
    axis /= axis.norm();
    if axis.dot(&axis_sin) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Proper orthogonal 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix after checking orthonormality and determinant to `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let r = Rotation(m);
        let ortho = r.orthonormality_error();
        let det = m.determinant();
        if !(ortho <= tol) || !((det - 1.0).abs() <= tol) {
            return Err(Error::InvalidArgument(format!(
                "not a rotation: |R^T R - I| = {ortho:e}, det = {det}"
            )));
        }
        Ok(r)
    }

    /// Wraps a matrix the caller guarantees to be a rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Frobenius-nearest rotation (polar factor with the determinant forced to +1).
    pub fn nearest(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut fix = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            fix[(2, 2)] = -1.0;
        }
        Rotation(u * fix * v_t)
    }

    pub fn exp(v: &Vector3<f64>) -> Self {
        so3_exp(v)
    }

    pub fn log(&self) -> Result<Vector3<f64>> {
        so3_log(self)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let s = vee_unchecked(&self.0).norm();
        s.atan2(0.5 * (self.0.trace() - 1.0))
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// `|R^T R - I|_F`
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        so3_exp(&(axis * angle))
    }

    /// Haar-uniform sample built from a normalized isotropic Gaussian 4-vector.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        random_rotation(rng)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    #[inline]
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    #[inline]
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl Mul<&Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;
    #[inline]
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

/// Uniform sample on SO(3).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|c| c / n);
    Rotation(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Uniform sample on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Element `(Q, q)` of SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub rot: Rotation,
    pub vec: Vector3<f64>,
}

impl GroupElement {
    pub fn new(rot: Rotation, vec: Vector3<f64>) -> Self {
        GroupElement { rot, vec }
    }

    pub fn identity() -> Self {
        GroupElement::new(Rotation::identity(), Vector3::zeros())
    }

    /// `(Q^T, -Q^T q)`
    pub fn inverse(&self) -> Self {
        let rt = self.rot.transpose();
        GroupElement::new(rt, -(rt.0 * self.vec))
    }

    /// 4x4 homogeneous embedding `[[Q, q], [0, 1]]`.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot.0);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vec);
        m
    }

    /// Differential of left multiplication: `(Q S, Q s)`.
    ///
    /// The result is a tangent vector at `self`, not an algebra element, so it
    /// is returned as a raw pair.
    pub fn dl(&self, x: &AlgebraElement) -> (Matrix3<f64>, Vector3<f64>) {
        (self.rot.0 * x.skew, self.rot.0 * x.vec)
    }

    /// Differential of right multiplication: `(S Q, S q + s)`.
    pub fn dr(&self, x: &AlgebraElement) -> (Matrix3<f64>, Vector3<f64>) {
        (x.skew * self.rot.0, x.skew * self.vec + x.vec)
    }

    /// `Ad_g(S, s) = (Q S Q^T, -Q S Q^T q + Q s)`
    pub fn adjoint(&self, x: &AlgebraElement) -> AlgebraElement {
        let q = &self.rot.0;
        let s_rot = q * x.skew * q.transpose();
        AlgebraElement { skew: s_rot, vec: -(s_rot * self.vec) + q * x.vec }
    }
}

impl Default for GroupElement {
    fn default() -> Self {
        GroupElement::identity()
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    #[inline]
    fn mul(self, rhs: GroupElement) -> GroupElement {
        se3_mul(&self, &rhs)
    }
}

pub fn se3_mul(a: &GroupElement, b: &GroupElement) -> GroupElement {
    GroupElement::new(a.rot * b.rot, a.rot.0 * b.vec + a.vec)
}

pub fn se3_inv(a: &GroupElement) -> GroupElement {
    a.inverse()
}

pub fn se3_adjoint(g: &GroupElement, x: &AlgebraElement) -> AlgebraElement {
    g.adjoint(x)
}

/// Element `(S, s)` of se(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraElement {
    pub skew: Matrix3<f64>,
    pub vec: Vector3<f64>,
}

impl AlgebraElement {
    pub fn new(skew: Matrix3<f64>, vec: Vector3<f64>) -> Self {
        AlgebraElement { skew, vec }
    }

    /// `(w^, s)`
    pub fn from_vectors(w: &Vector3<f64>, s: &Vector3<f64>) -> Self {
        AlgebraElement::new(wedge(w), *s)
    }

    pub fn zero() -> Self {
        AlgebraElement::new(Matrix3::zeros(), Vector3::zeros())
    }

    /// Rotational part as a 3-vector.
    pub fn rot_vector(&self) -> Vector3<f64> {
        vee_unchecked(&self.skew)
    }

    pub fn is_skew(&self, tol: f64) -> bool {
        (self.skew + self.skew.transpose()).norm() <= tol
    }

    /// `sqrt(|S|_F^2 + |s|^2)`
    pub fn norm(&self) -> f64 {
        (self.skew.norm_squared() + self.vec.norm_squared()).sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        AlgebraElement::new(self.skew * k, self.vec * k)
    }
}

impl Add for AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement::new(self.skew + rhs.skew, self.vec + rhs.vec)
    }
}

impl Sub for AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: AlgebraElement) -> AlgebraElement {
        AlgebraElement::new(self.skew - rhs.skew, self.vec - rhs.vec)
    }
}

impl Neg for AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement::new(-self.skew, -self.vec)
    }
}
