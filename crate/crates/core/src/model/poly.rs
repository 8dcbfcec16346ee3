//! Sparse multivariate polynomials over a fixed number of variables.
//!
//! Used to form exact Lie derivatives of the (polynomial) kinematics and
//! output maps for the observability rank test.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

pub(crate) const NVARS: usize = 12;

type Monomial = [u8; NVARS];

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_term([0; NVARS], c);
        p
    }

    pub fn var(i: usize) -> Self {
        let mut m = [0; NVARS];
        m[i] = 1;
        let mut p = Poly::zero();
        p.add_term(m, 1.0);
        p
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, c * k);
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m[i] > 0 {
                let mut d = *m;
                d[i] -= 1;
                out.add_term(d, c * m[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64; NVARS]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().zip(x).fold(*c, |acc, (&e, &xi)| acc * xi.powi(e as i32)))
            .sum()
    }

    /// Lie derivative along the vector field `f`: `sum_i dp/dx_i f_i`.
    pub fn lie_derivative(&self, f: &[Poly; NVARS]) -> Self {
        (0..NVARS).fold(Poly::zero(), |acc, i| {
            let d = self.derivative(i);
            if d.terms.is_empty() {
                acc
            } else {
                &acc + &(&d * &f[i])
            }
        })
    }

    #[cfg(test)]
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.iter().map(|&e| e as usize).sum()).max().unwrap_or(0)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, *c);
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let mut m = *ma;
                for (e, b) in m.iter_mut().zip(mb) {
                    *e += b;
                }
                out.add_term(m, ca * cb);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_evaluation() {
        let x0 = Poly::var(0);
        let x1 = Poly::var(1);
        // p = 3 x0^2 x1 + 2
        let p = &(&(&x0 * &x0) * &x1).scale(3.0) + &Poly::constant(2.0);
        let mut pt = [0.0; NVARS];
        pt[0] = 2.0;
        pt[1] = -1.5;
        assert_eq!(p.eval(&pt), 3.0 * 4.0 * -1.5 + 2.0);
        assert_eq!(p.degree(), 3);
        // dp/dx0 = 6 x0 x1
        assert_eq!(p.derivative(0).eval(&pt), 6.0 * 2.0 * -1.5);
        assert_eq!(p.derivative(5), Poly::zero());
        // cancellation leaves no terms behind
        assert_eq!(&p + &p.scale(-1.0), Poly::zero());
    }

    #[test]
    fn lie_derivative_of_linear_flow() {
        // f = (x1, -x0, 0, ...) rotates (x0, x1); L_f (x0^2 + x1^2) = 0.
        let mut f: [Poly; NVARS] = std::array::from_fn(|_| Poly::zero());
        f[0] = Poly::var(1);
        f[1] = Poly::var(0).scale(-1.0);
        let r2 = &(&Poly::var(0) * &Poly::var(0)) + &(&Poly::var(1) * &Poly::var(1));
        assert_eq!(r2.lie_derivative(&f), Poly::zero());
        // L_f x0 = x1
        assert_eq!(Poly::var(0).lie_derivative(&f), Poly::var(1));
    }
}
