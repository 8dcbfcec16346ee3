//! Numeric nonlinear observability rank of the vectorized system.
//!
//! The state is flattened to `x = [vect(R); omega]` in R^12 with `vect`
//! stacking the columns of `R`, so `R[(i, j)]` lives at index `3 j + i`.
//! Kinematics and outputs are polynomial in `x`, so the Lie derivatives are
//! formed exactly and only the final rank decision is numeric.

use nalgebra::{DMatrix, SVector, Vector3};

use super::poly::{Poly, NVARS};
use super::{ManifoldState, ReferenceDirections, SystemInput};
use crate::error::{Error, Result};

/// Highest Lie derivative order stacked by default.
pub const DEFAULT_LIE_ORDER: usize = 2;

/// Relative singular value threshold for the numeric rank.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Orthonormal basis of the numeric null space of `dO/dx`.
    pub null_space: Vec<SVector<f64, 12>>,
    /// `R^T (d1 x d2)`, normalized: the vector the plain outputs cannot see.
    pub unobserved_vector: Vector3<f64>,
    /// Largest `|dO/dx b| / sigma_max` over unit perturbations `b` that only
    /// change `R^T (d1 x d2)`.
    pub unobserved_residual: f64,
    /// Change of `R^T (d1 x d2)` produced by the null-space direction closest to
    /// a pure scaling of that vector; `None` at full rank.
    pub null_direction: Option<Vector3<f64>>,
    /// Angle (rad) between `null_direction` and `unobserved_vector`.
    pub null_direction_angle: Option<f64>,
}

#[inline]
fn r_index(i: usize, j: usize) -> usize {
    3 * j + i
}

pub(crate) fn vectorize(x: &ManifoldState) -> [f64; NVARS] {
    let mut out = [0.0; NVARS];
    let m = x.rot.matrix();
    for j in 0..3 {
        for i in 0..3 {
            out[r_index(i, j)] = m[(i, j)];
        }
    }
    out[9..12].copy_from_slice(x.omega.as_slice());
    out
}

fn vector_field(input: &SystemInput) -> [Poly; NVARS] {
    let r = |i: usize, j: usize| Poly::var(r_index(i, j));
    let w = |k: usize| Poly::var(9 + k);
    let u = input.u;
    // c = u - omega
    let c: [Poly; 3] = std::array::from_fn(|k| &Poly::constant(u[k]) + &w(k).scale(-1.0));
    let zero = Poly::zero();
    let wedge_c: [[Poly; 3]; 3] = [
        [zero.clone(), c[2].scale(-1.0), c[1].clone()],
        [c[2].clone(), zero.clone(), c[0].scale(-1.0)],
        [c[1].scale(-1.0), c[0].clone(), zero.clone()],
    ];

    let mut f: [Poly; NVARS] = std::array::from_fn(|_| Poly::zero());
    for i in 0..3 {
        for j in 0..3 {
            f[r_index(i, j)] = (0..3).fold(Poly::zero(), |acc, k| &acc + &(&r(i, k) * &wedge_c[k][j]));
        }
    }
    // omega x u + a
    for k in 0..3 {
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        f[9 + k] = &(&w(k1).scale(u[k2]) + &w(k2).scale(-u[k1])) + &Poly::constant(input.a[k]);
    }
    f
}

fn outputs(refs: &ReferenceDirections, expanded: bool) -> Vec<Poly> {
    let mut h = Vec::new();
    for d in refs.as_array() {
        // (R^T d)_j = sum_i R_ij d_i
        for j in 0..3 {
            h.push((0..3).fold(Poly::zero(), |acc, i| &acc + &Poly::var(r_index(i, j)).scale(d[i])));
        }
    }
    if expanded {
        // columns of R R^T
        for k in 0..3 {
            for i in 0..3 {
                h.push((0..3).fold(Poly::zero(), |acc, m| {
                    &acc + &(&Poly::var(r_index(i, m)) * &Poly::var(r_index(k, m)))
                }));
            }
        }
    }
    h
}

/// Jacobian of the stacked Lie derivatives `L^0 h .. L^max_order h` at `x`.
pub(crate) fn observability_jacobian(
    x: &ManifoldState,
    input: &SystemInput,
    refs: &ReferenceDirections,
    expanded: bool,
    max_order: usize,
) -> DMatrix<f64> {
    let f = vector_field(input);
    let point = vectorize(x);
    let mut layer = outputs(refs, expanded);
    let mut rows: Vec<[f64; NVARS]> = Vec::new();
    for order in 0..=max_order {
        for p in &layer {
            rows.push(std::array::from_fn(|i| p.derivative(i).eval(&point)));
        }
        if order < max_order {
            layer = layer.iter().map(|p| p.lie_derivative(&f)).collect();
        }
    }
    DMatrix::from_fn(rows.len(), NVARS, |r, c| rows[r][c])
}

/// Numeric rank of `dO/dx` with Lie derivatives up to order `max_order`.
///
/// With `expanded` the outputs are augmented by the columns of `R R^T`, which
/// encode the orthonormality constraint as extra measurements.
pub fn observability_rank(
    x: &ManifoldState,
    input: &SystemInput,
    refs: &ReferenceDirections,
    expanded: bool,
    max_order: usize,
) -> Result<ObservabilityReport> {
    if max_order < 1 {
        return Err(Error::InvalidArgument("at least one Lie derivative order is required".into()));
    }
    let n = refs.d1().cross(refs.d2());
    if n.norm() <= 1e-6 {
        return Err(Error::DegenerateDirections);
    }
    let n = n.normalize();

    let jac = observability_jacobian(x, input, refs, expanded, max_order);
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd v_t");
    let sigma_max = svd.singular_values.max();
    let cutoff = RANK_THRESHOLD * sigma_max;

    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut null_space = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            null_space.push(SVector::<f64, 12>::from_iterator(v_t.row(k).iter().copied()));
        }
    }
    // rows(v_t) == ncols when the Jacobian is tall; any missing directions are null
    for k in svd.singular_values.len()..NVARS {
        null_space.push(SVector::<f64, 12>::from_iterator(v_t.row(k).iter().copied()));
    }
    let rank = NVARS - null_space.len();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());

    // Perturbations n e_k^T of R only move n^T R, i.e. R^T n.
    let unobserved_vector = x.rot.matrix().transpose() * n;
    let unobserved_residual = (0..3)
        .map(|k| {
            let mut b = SVector::<f64, 12>::zeros();
            for i in 0..3 {
                b[r_index(i, k)] = n[i];
            }
            (&jac * nalgebra::DVector::from_column_slice(b.as_slice())).norm() / sigma_max
        })
        .fold(0.0, f64::max);

    let (null_direction, null_direction_angle) = if null_space.is_empty() {
        (None, None)
    } else {
        // Scaling R^T n along itself: dR = n (R^T n)^T.
        let mut target = SVector::<f64, 12>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                target[r_index(i, j)] = n[i] * unobserved_vector[j];
            }
        }
        let projected =
            null_space.iter().fold(SVector::<f64, 12>::zeros(), |acc, b| acc + b * b.dot(&target));
        // dR^T n for the projected perturbation
        let z = Vector3::from_fn(|j, _| (0..3).map(|i| projected[r_index(i, j)] * n[i]).sum());
        if z.norm() > 1e-12 {
            let z = z.normalize();
            (Some(z), Some(z.angle(&unobserved_vector)))
        } else {
            (None, None)
        }
    };

    Ok(ObservabilityReport {
        rank,
        singular_values,
        null_space,
        unobserved_vector,
        unobserved_residual,
        null_direction,
        null_direction_angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::random_rotation;
    use crate::model::{measure, state_derivative};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn generic(rng: &mut ChaCha8Rng) -> (ManifoldState, SystemInput) {
        let v = |rng: &mut ChaCha8Rng| {
            Vector3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            )
        };
        (ManifoldState::new(random_rotation(rng), v(rng)), SystemInput::from_rate(v(rng)))
    }

    #[test]
    fn first_rows_are_output_jacobian() {
        // Finite-difference the output map along random directions in R^12.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, input) = generic(&mut rng);
        let refs = ReferenceDirections::standard();
        let jac = observability_jacobian(&x, &input, &refs, false, 1);
        let base = vectorize(&x);
        let h = 1e-6;
        for col in 0..12 {
            let eval = |sign: f64| {
                let mut p = base;
                p[col] += sign * h;
                let rt = nalgebra::Matrix3::from_fn(|i, j| p[r_index(i, j)]).transpose();
                let mut y = Vec::new();
                for d in refs.as_array() {
                    y.extend((rt * d).iter().copied());
                }
                y
            };
            let (yp, ym) = (eval(1.0), eval(-1.0));
            for row in 0..6 {
                let fd = (yp[row] - ym[row]) / (2.0 * h);
                assert!((jac[(row, col)] - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn first_lie_derivative_is_output_rate() {
        // L_f h at x equals d/dt h along the flow.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, input) = generic(&mut rng);
        let refs = ReferenceDirections::standard();
        let f = vector_field(&input);
        let h = outputs(&refs, false);
        let point = vectorize(&x);
        let (r_dot, _) = state_derivative(&x, &input);
        for (k, d) in refs.as_array().iter().enumerate() {
            let rate = r_dot.transpose() * d;
            for j in 0..3 {
                let lie = h[3 * k + j].lie_derivative(&f).eval(&point);
                assert!((lie - rate[j]).abs() < 1e-12);
            }
        }
        // sanity: zeroth order reproduces the measurement
        let m = measure(&x, &refs, 0.0);
        assert!((h[0].eval(&point) - m.d1.x).abs() < 1e-15);
    }

    #[test]
    fn plain_outputs_rank_nine_expanded_twelve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let refs = ReferenceDirections::standard();
        for _ in 0..20 {
            let (x, input) = generic(&mut rng);
            let plain = observability_rank(&x, &input, &refs, false, DEFAULT_LIE_ORDER).unwrap();
            assert_eq!(plain.rank, 9);
            assert!(plain.unobserved_residual <= 1e-6);
            assert!(plain.null_direction_angle.unwrap() < 1e-6);
            let full = observability_rank(&x, &input, &refs, true, DEFAULT_LIE_ORDER).unwrap();
            assert_eq!(full.rank, 12);
            assert!(full.null_direction.is_none());
        }
    }

    #[test]
    fn collinear_references_are_rejected() {
        let refs = ReferenceDirections::standard();
        // bypass the constructor check to exercise the guard in the rank tool
        let degenerate = ReferenceDirections { d1: *refs.d1(), d2: *refs.d1() };
        let x = ManifoldState::origin();
        assert_eq!(
            observability_rank(&x, &SystemInput::default(), &degenerate, false, 2).unwrap_err(),
            Error::DegenerateDirections
        );
    }

    #[test]
    fn order_zero_is_rejected() {
        let x = ManifoldState::origin();
        let refs = ReferenceDirections::standard();
        assert!(observability_rank(&x, &SystemInput::default(), &refs, false, 0).is_err());
    }
}
