use libm::{exp, lgamma, log};

use super::BankError;
use crate::stats::incomplete_beta;

/// Above this many trials the tail comes from the incomplete beta function
/// instead of term-by-term summation.
const SUMMATION_LIMIT: u64 = 10_000;

/// One-sided binomial test of over-representation.
///
/// Returns `P(X >= word_count_in_class)` for
/// `X ~ Binomial(class_token_total, word_count_overall / overall_token_total)`.
pub fn overrepresentation_test(
    word_count_in_class: u64,
    class_token_total: u64,
    word_count_overall: u64,
    overall_token_total: u64,
) -> Result<f64, BankError> {
    if overall_token_total == 0 {
        return Err(BankError::Argument("overall token total is zero".into()));
    }
    if word_count_in_class > class_token_total
        || class_token_total > overall_token_total
        || word_count_in_class > word_count_overall
        || word_count_overall > overall_token_total
    {
        return Err(BankError::Argument(alloc::format!(
            "inconsistent counts ({word_count_in_class}, {class_token_total}, {word_count_overall}, {overall_token_total})"
        )));
    }
    let k = word_count_in_class;
    let n = class_token_total;
    if k == 0 || word_count_overall == overall_token_total {
        return Ok(1.0);
    }
    let rate = word_count_overall as f64 / overall_token_total as f64;
    if n > SUMMATION_LIMIT {
        return Ok(incomplete_beta(rate, k as f64, (n - k + 1) as f64).clamp(0.0, 1.0));
    }
    let ln_rate = log(rate);
    let ln_miss = log(1.0 - rate);
    let ln_n_fact = lgamma(n as f64 + 1.0);
    let ln_term = |j: u64| {
        ln_n_fact - lgamma(j as f64 + 1.0) - lgamma((n - j) as f64 + 1.0)
            + j as f64 * ln_rate
            + (n - j) as f64 * ln_miss
    };
    let mode = (n as f64 + 1.0) * rate;
    let mut acc = ln_term(k);
    for j in (k + 1)..=n {
        let t = ln_term(j);
        acc = log_add(acc, t);
        if (j as f64) > mode && t < acc - 42.0 {
            break;
        }
    }
    Ok(exp(acc).min(1.0))
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(exp(lo - hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct tail summation with exact binomial coefficients.
    fn oracle(k: u64, n: u64, rate: f64) -> f64 {
        let mut total = 0.0;
        let mut coef = 1.0f64;
        for j in 0..=n {
            if j > 0 {
                coef = coef * (n - j + 1) as f64 / j as f64;
            }
            if j >= k {
                total += coef * rate.powi(j as i32) * (1.0 - rate).powi((n - j) as i32);
            }
        }
        total
    }

    #[test]
    fn frozen_examples() {
        assert_eq!(overrepresentation_test(0, 10, 5, 100).unwrap(), 1.0);
        let all = overrepresentation_test(10, 10, 10, 100).unwrap();
        assert!((all - 1e-10).abs() < 1e-22);
        // 1 - (0.9^10 + 10*0.1*0.9^9 + 45*0.01*0.9^8)
        let p = overrepresentation_test(3, 10, 10, 100).unwrap();
        assert!((p - 0.070_190_826_4).abs() < 1e-9, "{p}");
    }

    #[test]
    fn zero_total_is_an_error() {
        assert!(overrepresentation_test(0, 0, 0, 0).is_err());
        assert!(overrepresentation_test(5, 3, 5, 10).is_err());
    }

    #[test]
    fn matches_summation_oracle_on_small_grid() {
        for n in 0..=50u64 {
            for k in 0..=n {
                for (overall, total) in [(1, 50), (7, 60), (30, 100), (55, 100), (99, 100)] {
                    if k > overall || n > total {
                        continue;
                    }
                    let got = overrepresentation_test(k, n, overall, total).unwrap();
                    let want = oracle(k, n, overall as f64 / total as f64);
                    assert!((got - want).abs() < 1e-9, "k={k} n={n} rate={overall}/{total}");
                }
            }
        }
    }

    #[test]
    fn large_n_uses_beta_tail() {
        use statrs::distribution::{Binomial, DiscreteCDF};
        let b = Binomial::new(0.005, 20_000).unwrap();
        for k in [80u64, 100, 130] {
            let p = overrepresentation_test(k, 20_000, 200, 40_000).unwrap();
            assert!((p - (1.0 - b.cdf(k - 1))).abs() < 1e-9, "k={k} p={p}");
        }
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_class_count(n in 1u64..200, overall in 1u64..200, k in 0u64..200) {
            let total = 400;
            let k = k.min(n).min(overall);
            proptest::prop_assume!(k < n && k < overall);
            let a = overrepresentation_test(k, n, overall, total).unwrap();
            let b = overrepresentation_test(k + 1, n, overall, total).unwrap();
            proptest::prop_assert!(b <= a + 1e-15);
        }
    }
}
