//! Binomial confidence intervals and paired tests.

use statrs::function::beta::beta_reg;

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
///
/// With zero errors the interval is `[0, 1 - (alpha/2)^(1/n)]`.
pub fn clopper_pearson(errors: u64, trials: u64, alpha: f64) -> (f64, f64) {
    assert!(errors <= trials, "errors exceed trials");
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (errors as f64, trials as f64);
    let lo = if errors == 0 { 0.0 } else { beta_quantile(k, n - k + 1.0, alpha / 2.0) };
    let hi = if errors == trials {
        1.0
    } else if errors == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / n)
    } else {
        beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * mid.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
fn upper_tail_half(k: u64, n: u64) -> f64 {
    if k == 0 {
        1.0
    } else if k > n {
        0.0
    } else {
        beta_reg(k as f64, (n - k + 1) as f64, 0.5)
    }
}

/// Two-sided exact sign test on discordant pairs.
///
/// `a_only` counts bits that only detector A got wrong, `b_only` those only
/// B got wrong. Under the null both are equally likely.
pub fn sign_test_p(a_only: u64, b_only: u64) -> f64 {
    let n = a_only + b_only;
    if n == 0 {
        return 1.0;
    }
    let k = a_only.max(b_only);
    (2.0 * upper_tail_half(k, n)).min(1.0)
}

/// Whether A makes significantly fewer errors than B on shared bits.
pub fn significantly_fewer(a_only: u64, b_only: u64, alpha: f64) -> bool {
    a_only < b_only && sign_test_p(a_only, b_only) < alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_matches_reference_values() {
        // reference quantiles from an independent beta implementation
        let cases = [
            (5, 100, 0.016431879182052155, 0.11283491110546275),
            (200, 1_000_000, 0.00017324311408061814, 0.0002297185676361289),
            (17, 2340, 0.004237634008968354, 0.011606496200284713),
            (50, 50, 0.9288782635358024, 1.0),
        ];
        for (k, n, lo, hi) in cases {
            let (a, b) = clopper_pearson(k, n, 0.05);
            assert!((a - lo).abs() < 1e-9 * lo.max(1e-3), "{k}/{n}: {a} vs {lo}");
            assert!((b - hi).abs() < 1e-9 * hi.max(1e-3), "{k}/{n}: {b} vs {hi}");
        }
    }

    #[test]
    fn zero_errors() {
        let (lo, hi) = clopper_pearson(0, 100, 0.05);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.03621669264517641).abs() < 1e-12);
        assert_eq!(hi, 1.0 - 0.025f64.powf(0.01));
    }

    #[test]
    fn interval_contains_estimate() {
        for (k, n) in [(1, 3), (3, 7), (999, 1000), (12, 1_000_000)] {
            let (lo, hi) = clopper_pearson(k, n, 0.05);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn sign_test_reference_values() {
        assert!((sign_test_p(30, 20) - 0.20263875106454066).abs() < 1e-12);
        assert!((sign_test_p(40, 60) - 0.056887933640980784).abs() < 1e-12);
        assert!((sign_test_p(7, 3) - 0.34375).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 0), 1.0);
        assert!(significantly_fewer(10, 40, 0.05));
        assert!(!significantly_fewer(40, 10, 0.05));
    }
}
