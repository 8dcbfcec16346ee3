//! Extended Kalman filter baseline on the vectorized state `[vect(R); omega]`.
//!
//! `vect` stacks the columns of `R`. The mean is propagated with explicit
//! Euler, the covariance with the analytic Jacobian, and the attitude block is
//! projected back onto SO(3) after every measurement update.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::liegroup::{wedge, Rotation};
use crate::model::{ManifoldState, Measurement, ReferenceDirections};

pub type Vector12 = SVector<f64, 12>;
pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Matrix6x12 = SMatrix<f64, 6, 12>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    pub x: Vector12,
    pub p: Matrix12,
}

impl EkfState {
    pub fn new(x: Vector12, p: Matrix12) -> Self {
        EkfState { x, p }
    }

    pub fn from_manifold(m: &ManifoldState, p: Matrix12) -> Self {
        EkfState::new(vectorize(m.rot.matrix(), &m.omega), p)
    }

    /// Attitude block as a matrix; not orthonormal between projections.
    pub fn r_block(&self) -> Matrix3<f64> {
        Matrix3::from_column_slice(&self.x.as_slice()[..9])
    }

    pub fn omega(&self) -> Vector3<f64> {
        Vector3::new(self.x[9], self.x[10], self.x[11])
    }

    /// Estimate read out on the manifold (attitude block projected).
    pub fn estimate(&self) -> ManifoldState {
        ManifoldState::new(Rotation::nearest(&self.r_block()), self.omega())
    }
}

fn vectorize(r: &Matrix3<f64>, omega: &Vector3<f64>) -> Vector12 {
    let mut x = Vector12::zeros();
    x.fixed_rows_mut::<9>(0).copy_from_slice(r.as_slice());
    x.fixed_rows_mut::<3>(9).copy_from(omega);
    x
}

/// Continuous-time vector field `[vect(R (u - omega)^); omega x u]`.
pub fn vector_field(x: &Vector12, u: &Vector3<f64>) -> Vector12 {
    let r = Matrix3::from_column_slice(&x.as_slice()[..9]);
    let omega = Vector3::new(x[9], x[10], x[11]);
    vectorize(&(r * wedge(&(u - omega))), &omega.cross(u))
}

/// Jacobian of [`vector_field`] with respect to `x`.
pub fn dynamics_jacobian(x: &Vector12, u: &Vector3<f64>) -> Matrix12 {
    let r = Matrix3::from_column_slice(&x.as_slice()[..9]);
    let omega = Vector3::new(x[9], x[10], x[11]);
    let k = wedge(&(u - omega));
    let mut j = Matrix12::zeros();
    // vect(R K) = (K^T kron I) vect(R)
    for col in 0..3 {
        for row in 0..3 {
            let block = Matrix3::identity() * k[(row, col)];
            j.fixed_view_mut::<3, 3>(3 * col, 3 * row).copy_from(&block);
        }
    }
    for m in 0..3 {
        let d = -(r * wedge(&Vector3::ith(m, 1.0)));
        j.fixed_view_mut::<9, 1>(0, 9 + m).copy_from_slice(d.as_slice());
    }
    j.fixed_view_mut::<3, 3>(9, 9).copy_from(&(-wedge(u)));
    j
}

/// Output `[R^T d1; R^T d2]` of the vectorized state.
pub fn output(x: &Vector12, refs: &ReferenceDirections) -> Vector6<f64> {
    let rt = Matrix3::from_column_slice(&x.as_slice()[..9]).transpose();
    let mut y = Vector6::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&(rt * refs.d1()));
    y.fixed_rows_mut::<3>(3).copy_from(&(rt * refs.d2()));
    y
}

/// Jacobian of [`output`]; `(R^T d)_k = sum_a R[a, k] d_a`.
pub fn output_jacobian(refs: &ReferenceDirections) -> Matrix6x12 {
    let mut h = Matrix6x12::zeros();
    for (block, d) in refs.as_array().iter().enumerate() {
        for k in 0..3 {
            for a in 0..3 {
                h[(3 * block + k, 3 * k + a)] = d[a];
            }
        }
    }
    h
}

/// Euler mean step and `P <- F P F^T + dt M`.
pub fn ekf_predict(s: &EkfState, u: &Vector3<f64>, m: &Matrix12, dt: f64) -> Result<EkfState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("prediction step must be positive, got {dt}")));
    }
    let f = Matrix12::identity() + dynamics_jacobian(&s.x, u) * dt;
    let x = s.x + vector_field(&s.x, u) * dt;
    let p = f * s.p * f.transpose() + m * dt;
    Ok(EkfState::new(x, (p + p.transpose()) * 0.5))
}

/// Kalman update with discrete noise `n_d`, Joseph-form covariance, then
/// projection of the attitude block.
pub fn ekf_update(
    s: &EkfState,
    y: &Measurement,
    refs: &ReferenceDirections,
    n_d: &nalgebra::Matrix6<f64>,
) -> Result<EkfState> {
    let h = output_jacobian(refs);
    let innov = y.stacked() - output(&s.x, refs);
    let s_mat = h * s.p * h.transpose() + n_d;
    let s_inv = s_mat.cholesky().ok_or(Error::LostPositivity { dt: 0.0 })?.inverse();
    let k = s.p * h.transpose() * s_inv;
    let x = s.x + k * innov;
    let ikh = Matrix12::identity() - k * h;
    let p = ikh * s.p * ikh.transpose() + k * n_d * k.transpose();
    Ok(project_so3(&EkfState::new(x, (p + p.transpose()) * 0.5)))
}

/// Replaces the attitude block by the nearest rotation.
pub fn project_so3(s: &EkfState) -> EkfState {
    let r = Rotation::nearest(&s.r_block());
    let mut x = s.x;
    x.fixed_rows_mut::<9>(0).copy_from_slice(r.matrix().as_slice());
    EkfState::new(x, s.p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfConfig {
    /// Continuous process noise density; `P` grows by `dt M` per prediction.
    pub m: Matrix12,
    /// Continuous output gain; the discrete measurement noise is `N / period`.
    pub n: nalgebra::Matrix6<f64>,
    pub p0: Matrix12,
    pub refs: ReferenceDirections,
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig {
            m: Matrix12::identity(),
            n: nalgebra::Matrix6::identity() * 0.1,
            p0: Matrix12::identity(),
            refs: ReferenceDirections::standard(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ekf {
    config: EkfConfig,
    state: EkfState,
}

impl Ekf {
    /// Starts at `(I, 0)`.
    pub fn new(config: EkfConfig) -> Self {
        let state = EkfState::from_manifold(&ManifoldState::origin(), config.p0);
        Ekf { config, state }
    }

    pub fn state(&self) -> &EkfState {
        &self.state
    }

    pub fn predict(&mut self, u: &Vector3<f64>, dt: f64) -> Result<()> {
        self.state = ekf_predict(&self.state, u, &self.config.m, dt)?;
        Ok(())
    }

    pub fn update(&mut self, y: &Measurement, period: f64) -> Result<()> {
        if !(period > 0.0) {
            return Err(Error::InvalidArgument(format!("update period must be positive, got {period}")));
        }
        self.state = ekf_update(&self.state, y, &self.config.refs, &(self.config.n / period))?;
        Ok(())
    }

    pub fn estimate(&self) -> ManifoldState {
        self.state.estimate()
    }
}
