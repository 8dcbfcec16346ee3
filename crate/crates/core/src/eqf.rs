//! The equivariant filter.
//!
//! The estimate lives on SE(3) as `(Q_hat, q_hat)`, with the manifold state
//! read out at the origin as `(Q_hat, -Q_hat^T q_hat)`. A 6x6 Riccati state
//! `Sigma` in the local error coordinates `(eps_R, eps_omega)` sets the
//! correction gain.
//!
//! Prediction integrates `Q_hat' = Q_hat u^ + q_hat^ Q_hat` exactly by
//! splitting it into a left and a right factor, and grows `Sigma` with
//! `A Sigma + Sigma A^T + M`. An update computes the correction
//! `(Delta_Q, delta_q)` from the measured directions, applies it as a left
//! factor on the group and damps `Sigma` with `Sigma C^T N^-1 C Sigma`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::liegroup::{so3_exp, wedge, AlgebraElement, GroupElement, Rotation};
use crate::model::{measure, ManifoldState, Measurement, ReferenceDirections};
use crate::symmetry::{group_error, group_to_state, phi, state_to_group, theta};

/// State and output gain matrices `M`, `N` (both 6x6 SPD).
#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    m: Matrix6<f64>,
    n: Matrix6<f64>,
    n_inv: Matrix6<f64>,
}

impl GainConfig {
    pub fn new(m: Matrix6<f64>, n: Matrix6<f64>) -> Result<Self> {
        check_spd(&m, "M")?;
        check_spd(&n, "N")?;
        let n_inv = n.try_inverse().ok_or_else(|| Error::InvalidArgument("N is singular".into()))?;
        Ok(GainConfig { m, n, n_inv })
    }

    /// `M = m I`, `N = k_N^-1 I`.
    pub fn scalar(m: f64, k_n: f64) -> Result<Self> {
        if !(k_n > 0.0) || !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("gains must be positive (m = {m}, k_N = {k_n})")));
        }
        Self::new(Matrix6::identity() * m, Matrix6::identity() / k_n)
    }

    pub fn m(&self) -> &Matrix6<f64> {
        &self.m
    }

    pub fn n(&self) -> &Matrix6<f64> {
        &self.n
    }

    pub fn n_inv(&self) -> &Matrix6<f64> {
        &self.n_inv
    }

    /// Returns a copy with `N` multiplied by `k`.
    pub fn with_output_gain_scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.m, self.n * k)
    }
}

impl Default for GainConfig {
    /// `M = I`, `N = 0.1 I`.
    fn default() -> Self {
        GainConfig::scalar(1.0, 10.0).expect("default gains are valid")
    }
}

fn check_spd(m: &Matrix6<f64>, name: &str) -> Result<()> {
    if (m - m.transpose()).norm() > 1e-9 || m.cholesky().is_none() {
        return Err(Error::InvalidArgument(format!("{name} is not symmetric positive definite")));
    }
    Ok(())
}

/// Symmetric positive definite Riccati state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiState(Matrix6<f64>);

impl RiccatiState {
    pub fn new(sigma: Matrix6<f64>) -> Result<Self> {
        if (sigma - sigma.transpose()).norm() > 1e-9 {
            return Err(Error::InvalidArgument("Riccati state is not symmetric".into()));
        }
        if sigma.cholesky().is_none() {
            return Err(Error::InvalidArgument("Riccati state is not positive definite".into()));
        }
        Ok(RiccatiState(sigma))
    }

    pub fn identity() -> Self {
        RiccatiState(Matrix6::identity())
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    pub fn sigma_r(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn sigma_r_omega(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 3).into_owned()
    }

    pub fn sigma_omega(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(3, 3).into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Symmetrizes `m` and accepts it if its Cholesky factorization exists.
    fn checked(m: Matrix6<f64>, dt: f64) -> Result<Self> {
        let sym = (m + m.transpose()) * 0.5;
        if !sym.iter().all(|v| v.is_finite()) || sym.cholesky().is_none() {
            return Err(Error::LostPositivity { dt });
        }
        Ok(RiccatiState(sym))
    }
}

/// Filter estimate on the group, Riccati state and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x_hat: GroupElement,
    pub sigma: RiccatiState,
    pub t: f64,
}

impl FilterState {
    pub fn new(x_hat: GroupElement, sigma: RiccatiState, t: f64) -> Self {
        FilterState { x_hat, sigma, t }
    }

    /// Estimate at the group identity with `Sigma = I`.
    pub fn initial() -> Self {
        FilterState::new(GroupElement::identity(), RiccatiState::identity(), 0.0)
    }
}

/// `A = [[0, -I], [0, q_hat^]]`
pub fn compute_a(q_hat: &Vector3<f64>) -> Matrix6<f64> {
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-Matrix3::identity()));
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(&wedge(q_hat));
    a
}

/// First-order output matrix `[[Q_hat^T d1^, 0], [Q_hat^T d2^, 0]]`.
pub fn compute_c(refs: &ReferenceDirections, q_hat: &Rotation) -> Matrix6<f64> {
    let qt = q_hat.matrix().transpose();
    let mut c = Matrix6::zeros();
    c.fixed_view_mut::<3, 3>(0, 0).copy_from(&(qt * wedge(refs.d1())));
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&(qt * wedge(refs.d2())));
    c
}

/// Output matrix with third-order residual,
/// `1/2 [[(d1 + d1_hat)^ Q_hat^T, 0], [(d2 + d2_hat)^ Q_hat^T, 0]]`.
pub fn compute_c_star(y: &Measurement, y_hat: &Measurement, q_hat: &Rotation) -> Matrix6<f64> {
    let qt = q_hat.matrix().transpose();
    let mut c = Matrix6::zeros();
    c.fixed_view_mut::<3, 3>(0, 0).copy_from(&(wedge(&(y.d1 + y_hat.d1)) * qt * 0.5));
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&(wedge(&(y.d2 + y_hat.d2)) * qt * 0.5));
    c
}

/// One explicit Euler step of
/// `Sigma' = A Sigma + Sigma A^T + M - Sigma C^T N^-1 C Sigma`,
/// followed by symmetrization. Passing `C = 0` gives the prediction part only.
pub fn riccati_step(
    s: &RiccatiState,
    a: &Matrix6<f64>,
    c: &Matrix6<f64>,
    gains: &GainConfig,
    dt: f64,
) -> Result<RiccatiState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("Riccati step must be positive, got {dt}")));
    }
    let sig = &s.0;
    let damping = sig * c.transpose() * gains.n_inv * c * sig;
    let rate = a * sig + sig * a.transpose() + gains.m - damping;
    RiccatiState::checked(sig + rate * dt, dt)
}

/// Integrator for the measurement part `Sigma' = -Sigma C^T N^-1 C Sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingForm {
    /// `Sigma - dt Sigma C^T N^-1 C Sigma`; loses positivity when `dt` is large.
    Euler,
    /// `(Sigma^-1 + dt C^T N^-1 C)^-1`, the exact flow for `C` held over the step.
    #[default]
    Information,
}

/// Measurement-only Riccati step over `dt`.
pub fn riccati_damping(
    s: &RiccatiState,
    c: &Matrix6<f64>,
    gains: &GainConfig,
    dt: f64,
    form: DampingForm,
) -> Result<RiccatiState> {
    let sig = &s.0;
    let info_rate = c.transpose() * gains.n_inv * c;
    match form {
        DampingForm::Euler => RiccatiState::checked(sig - sig * info_rate * sig * dt, dt),
        DampingForm::Information => {
            let lost = Error::LostPositivity { dt };
            let info = sig.cholesky().ok_or(lost.clone())?.inverse() + info_rate * dt;
            let info = (info + info.transpose()) * 0.5;
            RiccatiState::checked(info.cholesky().ok_or(lost)?.inverse(), dt)
        }
    }
}

/// `(R_hat, omega_hat) = phi(X_hat, (I, 0))`
pub fn state_estimate(fs: &FilterState) -> ManifoldState {
    group_to_state(&fs.x_hat)
}

/// Predicted output of the current estimate.
pub fn predicted_output(fs: &FilterState, refs: &ReferenceDirections, t: f64) -> Measurement {
    measure(&state_estimate(fs), refs, t)
}

/// Prediction over `dt` with gyro rate `u` (and `a = v = w = 0`).
pub fn predict(fs: &FilterState, u: &Vector3<f64>, gains: &GainConfig, dt: f64) -> Result<FilterState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("prediction step must be positive, got {dt}")));
    }
    let x = &fs.x_hat;
    // left and right factors commute, so this is the exact flow for constant u, q_hat
    let rot = so3_exp(&(x.vec * dt)) * x.rot * so3_exp(&(u * dt));
    let sigma = riccati_step(&fs.sigma, &compute_a(&x.vec), &Matrix6::zeros(), gains, dt)?;
    Ok(FilterState::new(GroupElement::new(rot, x.vec), sigma, fs.t + dt))
}

/// Direction `gamma = Sigma C*^T N^-1 (y - y_hat)`.
pub fn innovation_direction(
    fs: &FilterState,
    y: &Measurement,
    refs: &ReferenceDirections,
    gains: &GainConfig,
) -> Vector6<f64> {
    let y_hat = predicted_output(fs, refs, y.t);
    let c_star = compute_c_star(y, &y_hat, &fs.x_hat.rot);
    fs.sigma.0 * c_star.transpose() * gains.n_inv * (y.stacked() - y_hat.stacked())
}

/// Correction terms `(Delta_Q, delta_q) = (gamma_1^, -gamma_2)`.
pub fn correction(
    fs: &FilterState,
    y: &Measurement,
    refs: &ReferenceDirections,
    gains: &GainConfig,
) -> AlgebraElement {
    let gamma = innovation_direction(fs, y, refs, gains);
    AlgebraElement::from_vectors(
        &gamma.fixed_rows::<3>(0).into_owned(),
        &-gamma.fixed_rows::<3>(3).into_owned(),
    )
}

/// Closed form of the correction for `N = k_N^-1 I`:
/// with `c = sum_i (Q_hat d_i) x d_i_ring`,
/// `Delta_Q = k_N (Sigma_R c)^` and `delta_q = -k_N Sigma_Rw^T c`.
pub fn correction_closed_form(
    fs: &FilterState,
    y: &Measurement,
    refs: &ReferenceDirections,
    k_n: f64,
) -> AlgebraElement {
    let q = fs.x_hat.rot.matrix();
    let c = (q * y.d1).cross(refs.d1()) + (q * y.d2).cross(refs.d2());
    AlgebraElement::from_vectors(
        &(fs.sigma.sigma_r() * c * k_n),
        &(-(fs.sigma.sigma_r_omega().transpose() * c) * k_n),
    )
}

/// How the Riccati damping is split across repeated updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingSchedule {
    /// Each iteration damps `Sigma` over its own reduced period.
    #[default]
    PerIteration,
    /// `Sigma` is held during the iterations and damped once over the full period.
    Once,
}

/// Iteration count and Riccati damping treatment of an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateSettings {
    pub iterations: usize,
    pub schedule: DampingSchedule,
    pub form: DampingForm,
}

impl Default for UpdateSettings {
    fn default() -> Self {
        UpdateSettings {
            iterations: 1,
            schedule: DampingSchedule::PerIteration,
            form: DampingForm::Information,
        }
    }
}

/// Result of an update: new state and the last correction applied.
#[derive(Debug, Clone, Copy)]
pub struct UpdateOutcome {
    pub state: FilterState,
    pub correction: AlgebraElement,
}

/// Applies the measurement `y` in `iterations` sub-steps of `period / iterations`.
pub fn update(
    fs: &FilterState,
    y: &Measurement,
    refs: &ReferenceDirections,
    gains: &GainConfig,
    period: f64,
    settings: &UpdateSettings,
) -> Result<UpdateOutcome> {
    let UpdateSettings { iterations, schedule, form } = *settings;
    if iterations == 0 {
        return Err(Error::InvalidArgument("update needs at least one iteration".into()));
    }
    if !(period > 0.0) {
        return Err(Error::InvalidArgument(format!("update period must be positive, got {period}")));
    }
    let dt = period / iterations as f64;
    let mut state = *fs;
    let mut last = AlgebraElement::zero();
    for _ in 0..iterations {
        let y_hat = predicted_output(&state, refs, y.t);
        let c_star = compute_c_star(y, &y_hat, &state.x_hat.rot);
        let gamma = state.sigma.0 * c_star.transpose() * gains.n_inv * (y.stacked() - y_hat.stacked());
        let delta_rot: Vector3<f64> = gamma.fixed_rows::<3>(0).into_owned();
        let delta_vec: Vector3<f64> = -gamma.fixed_rows::<3>(3).into_owned();

        let x = &state.x_hat;
        let rot = so3_exp(&(delta_rot * dt)) * x.rot;
        let vec = x.vec + (delta_rot.cross(&x.vec) + delta_vec) * dt;
        let sigma = match schedule {
            DampingSchedule::PerIteration => riccati_damping(&state.sigma, &c_star, gains, dt, form)?,
            DampingSchedule::Once => state.sigma,
        };
        state = FilterState::new(GroupElement::new(rot, vec), sigma, state.t);
        last = AlgebraElement::from_vectors(&delta_rot, &delta_vec);
    }
    if schedule == DampingSchedule::Once {
        let y_hat = predicted_output(fs, refs, y.t);
        let c_star = compute_c_star(y, &y_hat, &fs.x_hat.rot);
        state.sigma = riccati_damping(&fs.sigma, &c_star, gains, period, form)?;
    }
    Ok(UpdateOutcome { state, correction: last })
}

/// `V = eps^T Sigma^-1 eps` with `eps` the chart coordinates of the error
/// between `truth` and the estimate.
pub fn lyapunov_value(fs: &FilterState, truth: &GroupElement) -> Result<f64> {
    let e = group_error(truth, &fs.x_hat);
    let eps = theta(&phi(&e, &ManifoldState::origin()))?.to_vector();
    let chol = fs.sigma.0.cholesky().ok_or(Error::LostPositivity { dt: 0.0 })?;
    Ok(eps.dot(&chol.solve(&eps)))
}

/// Runtime configuration of an [`EqFilter`].
#[derive(Debug, Clone, PartialEq)]
pub struct EqfConfig {
    pub gains: GainConfig,
    pub sigma0: RiccatiState,
    pub refs: ReferenceDirections,
    pub update: UpdateSettings,
}

impl Default for EqfConfig {
    fn default() -> Self {
        EqfConfig {
            gains: GainConfig::default(),
            sigma0: RiccatiState::identity(),
            refs: ReferenceDirections::standard(),
            update: UpdateSettings::default(),
        }
    }
}

/// Stateful wrapper that owns a configuration and the current estimate.
#[derive(Debug, Clone)]
pub struct EqFilter {
    config: EqfConfig,
    state: FilterState,
    last_correction: Option<AlgebraElement>,
}

impl EqFilter {
    /// Starts at `X_hat = (I, 0)`.
    pub fn new(config: EqfConfig) -> Self {
        let state = FilterState::new(GroupElement::identity(), config.sigma0, 0.0);
        EqFilter { config, state, last_correction: None }
    }

    /// Starts with the estimate placed at `x0`.
    pub fn with_initial_estimate(config: EqfConfig, x0: &ManifoldState) -> Self {
        let mut f = Self::new(config);
        f.state.x_hat = state_to_group(x0);
        f
    }

    pub fn config(&self) -> &EqfConfig {
        &self.config
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn predict(&mut self, u: &Vector3<f64>, dt: f64) -> Result<()> {
        self.state = predict(&self.state, u, &self.config.gains, dt)?;
        Ok(())
    }

    pub fn update(&mut self, y: &Measurement, period: f64) -> Result<()> {
        let out = update(&self.state, y, &self.config.refs, &self.config.gains, period, &self.config.update)?;
        self.state = out.state;
        self.last_correction = Some(out.correction);
        Ok(())
    }

    pub fn estimate(&self) -> ManifoldState {
        state_estimate(&self.state)
    }

    pub fn last_correction(&self) -> Option<AlgebraElement> {
        self.last_correction
    }

    pub fn lyapunov(&self, truth: &ManifoldState) -> Result<f64> {
        lyapunov_value(&self.state, &state_to_group(truth))
    }
}
