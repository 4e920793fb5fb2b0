use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Piecewise polynomial part `p_{d,k}` of the Wendland function
/// `phi_{d,k}(r) = p_{d,k}(r)` on `[0,1]`, zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct WendlandPolynomial {
    pub d: usize,
    pub k: usize,
    /// `coeffs[l]` multiplies `r^l`, stored as exact `(numerator, denominator)`.
    pub coeffs: Vec<BigRational>,
    float_coeffs: Vec<f64>,
}

impl WendlandPolynomial {
    /// Applies the integral operator `(I f)(r) = int_r^1 t f(t) dt` `k` times
    /// to `(1-r)^{floor(d/2)+k+1}`.
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d == 0 || (k == 0 && d < 3) {
            return Err(Error::InvalidParameter(format!(
                "wendland requires d >= 1 and (k >= 1 or d >= 3), got d={d}, k={k}"
            )));
        }
        let ell = d / 2 + k + 1;
        let mut p = one_minus_r_pow(ell);
        for _ in 0..k {
            p = integrate_operator(&p);
        }
        Ok(Self::from_coeffs(d, k, p))
    }

    fn from_coeffs(d: usize, k: usize, coeffs: Vec<BigRational>) -> Self {
        let float_coeffs = coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        Self { d, k, coeffs, float_coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `phi_{d,k}(r)` for `r >= 0`, by Horner's rule.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        self.float_coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    /// `p'(r)` on `[0,1]`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.float_coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (l, &c)| acc * r + l as f64 * c)
    }

    /// Exact value of the `j`-th derivative of `p` at `r = 1`.
    pub fn derivative_at_one(&self, j: usize) -> BigRational {
        let mut acc = BigRational::zero();
        for (l, c) in self.coeffs.iter().enumerate().skip(j) {
            let falling: BigInt = ((l - j + 1)..=l).map(BigInt::from).product();
            acc += c * BigRational::from_integer(falling);
        }
        acc
    }

    /// `sum_{l>=1} |l a_l|`, a Lipschitz constant for `phi` in `r`.
    pub fn lipschitz_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, c)| (c * BigRational::from_integer(BigInt::from(l))).abs())
            .fold(BigRational::zero(), |a, b| a + b)
            .to_f64()
            .unwrap_or(f64::INFINITY)
    }
}

fn one_minus_r_pow(ell: usize) -> Vec<BigRational> {
    // (1-r)^ell = sum_l C(ell,l) (-1)^l r^l
    let mut out = Vec::with_capacity(ell + 1);
    let mut binom = BigInt::one();
    for l in 0..=ell {
        if l > 0 {
            binom = binom * BigInt::from(ell - l + 1) / BigInt::from(l);
        }
        let sign = if l % 2 == 0 { binom.clone() } else { -binom.clone() };
        out.push(BigRational::from_integer(sign));
    }
    out
}

fn integrate_operator(p: &[BigRational]) -> Vec<BigRational> {
    // Q(r) = antiderivative of t p(t) = sum_l a_l r^{l+2}/(l+2); result Q(1) - Q(r)
    let mut q = vec![BigRational::zero(); p.len() + 2];
    for (l, a) in p.iter().enumerate() {
        q[l + 2] = a / BigRational::from_integer(BigInt::from(l + 2));
    }
    let q1: BigRational = q.iter().cloned().fold(BigRational::zero(), |s, c| s + c);
    let mut out: Vec<BigRational> = q.into_iter().map(|c| -c).collect();
    out[0] += q1;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn d3_k0_is_square() {
        let p = WendlandPolynomial::new(3, 0).unwrap();
        assert_eq!(p.coeffs, vec![q(1, 1), q(-2, 1), q(1, 1)]);
    }

    #[test]
    fn d1_k1_matches_direct_integration() {
        // (1-r)^3 (3r+1) / 12 expanded: (1 - 6r^2 + 8r^3 - 3r^4) / 12
        let p = WendlandPolynomial::new(1, 1).unwrap();
        assert_eq!(p.coeffs, vec![q(1, 12), q(0, 1), q(-1, 2), q(2, 3), q(-1, 4)]);
    }

    #[test]
    fn degree_formula() {
        for d in 1..8 {
            for k in 0..4 {
                if k == 0 && d < 3 {
                    assert!(WendlandPolynomial::new(d, k).is_err());
                    continue;
                }
                let p = WendlandPolynomial::new(d, k).unwrap();
                assert_eq!(p.degree(), d / 2 + 3 * k + 1, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn smooth_at_one() {
        for d in 1..8 {
            for k in 1..=3 {
                let p = WendlandPolynomial::new(d, k).unwrap();
                for j in 0..=2 * k {
                    assert!(p.derivative_at_one(j).is_zero(), "d={d} k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn compact_support() {
        let p = WendlandPolynomial::new(5, 2).unwrap();
        for r in [1.0, 1.5, 10.0] {
            assert_eq!(p.eval(r), 0.0);
        }
    }

    #[test]
    fn lipschitz_sum_dominates_derivative() {
        for (d, k) in [(3, 0), (1, 1), (3, 2), (5, 3)] {
            let p = WendlandPolynomial::new(d, k).unwrap();
            let c = p.lipschitz_sum();
            let sup = (0..=1_000_000)
                .map(|i| p.derivative(i as f64 * 1e-6).abs())
                .fold(0.0, f64::max);
            assert!(sup <= c + 1e-12, "d={d} k={k} sup={sup} c={c}");
        }
        assert_eq!(WendlandPolynomial::new(3, 0).unwrap().lipschitz_sum(), 4.0);
    }
}
