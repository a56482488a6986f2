use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::factorial::ln_binomial;

/// Largest `n` for which [`hypergeometric_tail`] uses exact arithmetic.
pub const EXACT_LIMIT: u64 = 3000;

/// `C(n, k)` in arbitrary precision; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Which evaluation path a probability came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    LogGamma,
}

/// `Σ_{j=0..=c} C(bad, k−j)·C(good, j) / C(bad+good, k)`: the chance that a
/// uniform `k`-subset holds at least `k−c` of the `bad` elements.
pub fn hypergeometric_tail(bad: u64, good: u64, k: u64, c: u64) -> f64 {
    let method = if bad + good <= EXACT_LIMIT { Method::Exact } else { Method::LogGamma };
    hypergeometric_tail_with(bad, good, k, c, method)
}

pub fn hypergeometric_tail_with(bad: u64, good: u64, k: u64, c: u64, method: Method) -> f64 {
    let n = bad + good;
    if k > n {
        return 0.0;
    }
    let c = c.min(k);
    match method {
        Method::Exact => {
            let mut num = BigUint::zero();
            for j in 0..=c {
                num += binomial(bad, k - j) * binomial(good, j);
            }
            let r = BigRational::new(BigInt::from(num), BigInt::from(binomial(n, k)));
            r.to_f64().unwrap_or(f64::NAN)
        }
        Method::LogGamma => {
            let denom = ln_binomial(n, k);
            (0..=c)
                .filter(|&j| k - j <= bad && j <= good)
                .map(|j| (ln_binomial(bad, k - j) + ln_binomial(good, j) - denom).exp())
                .sum::<f64>()
                .min(1.0)
        }
    }
}

/// `C(a, k) / C(b, k)` as a float.
pub fn binomial_ratio(a: u64, b: u64, k: u64) -> f64 {
    if k > a {
        return 0.0;
    }
    hypergeometric_tail(a, b - a, k, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(30, 3), BigUint::from(4060u32));
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(binomial(7, 0), BigUint::one());
    }

    #[test]
    fn log_gamma_agrees_near_the_switch() {
        for &(bad, good, k, c) in &[(1000u64, 2000u64, 3u64, 0u64), (1000, 2000, 5, 2), (333, 667, 4, 1)] {
            let e = hypergeometric_tail_with(bad, good, k, c, Method::Exact);
            let l = hypergeometric_tail_with(bad, good, k, c, Method::LogGamma);
            assert!(((e - l) / e).abs() < 1e-9, "{e} vs {l}");
        }
    }
}
