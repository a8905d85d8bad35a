//! Counting polynomials and log-domain arithmetic.

use std::ops::Mul;

use crate::scalar::Scalar;

/// Polynomial with nonnegative integer coefficients, `coeffs[k]` multiplying `x^k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    coeffs: Vec<u64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<u64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1] }
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0; k + 1];
        coeffs[k] = 1;
        Self { coeffs }
    }

    /// `(1 + x)^m`.
    pub fn binomial_power(m: usize) -> Self {
        let mut coeffs = vec![1u64];
        for _ in 0..m {
            let mut next = vec![0u64; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k] += c;
                next[k + 1] += c;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn value_at_one(&self) -> u64 {
        self.coeffs.iter().sum()
    }

    pub fn add_term(&mut self, k: usize, c: u64) {
        if self.coeffs.len() <= k {
            self.coeffs.resize(k + 1, 0);
        }
        self.coeffs[k] += c;
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        for (k, &c) in other.coeffs.iter().enumerate() {
            self.add_term(k, c);
        }
    }

    /// Horner evaluation in any scalar type.
    pub fn eval<S: Scalar>(&self, x: &S) -> S {
        self.coeffs
            .iter()
            .rev()
            .fold(S::zero(), |acc, &c| acc * x.clone() + S::from_u64_exact(c))
    }

    /// `ln P(x)` for `x > 0`, stable when the value overflows `f64`.
    pub fn ln_eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return (self.coeffs[0] as f64).ln();
        }
        let lx = x.ln();
        log_sum_exp(
            self.coeffs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (c as f64).ln() + k as f64 * lx),
        )
    }

    /// `x P'(x) / P(x)`, the mean of `k` under the measure `∝ c_k x^k`.
    pub fn mean_size(&self, x: f64) -> f64 {
        let lz = self.ln_eval(x);
        let lx = x.ln();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, &c)| c > 0 && *k > 0)
            .map(|(k, &c)| k as f64 * ((c as f64).ln() + k as f64 * lx - lz).exp())
            .sum()
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![0u64; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// `ln Σ exp(x_i)`; `-inf` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln binom(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `binom(n, k)` as an exact integer; panics on overflow.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1u64, |acc, i| {
        acc.checked_mul(n - k + i).expect("binomial overflow") / i
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn binomial_power_and_products() {
        let p = Polynomial::binomial_power(4);
        assert_eq!(p.coeffs(), &[1, 4, 6, 4, 1]);
        let q = &Polynomial::binomial_power(1) * &Polynomial::binomial_power(3);
        assert_eq!(q, p);
        assert_eq!(p.eval(&2.0f64), 81.0);
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(
            p.eval(&half),
            BigRational::new(81.into(), 16.into())
        );
    }

    #[test]
    fn log_domain_matches_direct() {
        let p = Polynomial::new(vec![1, 3, 3]);
        for x in [0.0, 0.1, 1.0, 7.5] {
            assert!((p.ln_eval(x) - p.eval(&x).ln()).abs() < 1e-12);
        }
        // exponent of the largest term dominates; check against the closed form
        let big = Polynomial::binomial_power(60);
        assert!((big.ln_eval(1.0) - 60.0 * 2f64.ln()).abs() < 1e-9);
        let mean = Polynomial::binomial_power(10).mean_size(0.25);
        assert!((mean - 10.0 * 0.25 / 1.25).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(8, 5), 56);
        assert_eq!(binomial(3, 5), 0);
        assert!((ln_binomial(400, 200) - binomial_ln_reference(400, 200)).abs() < 1e-8);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    fn binomial_ln_reference(n: usize, k: usize) -> f64 {
        let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
        lf(n) - lf(k) - lf(n - k)
    }
}
