use super::AnalyticError;

/// `mean^k / k! · e^(−mean)`, evaluated in log space.
pub fn poisson_pmf(mean: f64, k: u64) -> Result<f64, AnalyticError> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(AnalyticError::InvalidParameter {
            name: "mean",
            value: mean,
        });
    }
    Ok(pmf_unchecked(mean, k))
}

pub(crate) fn pmf_unchecked(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log_p = k as f64 * mean.ln() - mean - ln_factorial(k);
    log_p.exp().min(1.0)
}

/// ln(k!). Exact summation for small k, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 64 {
        return (2..=k).map(|n| (n as f64).ln()).sum();
    }
    let n = k as f64;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Upper bound on `P(X ≥ k)` for `X ~ Poisson(mean)` and `k > mean − 1`.
///
/// Successive pmf ratios beyond `k` are at most `mean/(k+1)`, so the tail is
/// dominated by a geometric series.
pub fn upper_tail_bound(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    if kf + 1.0 <= mean {
        return 1.0;
    }
    let bound = pmf_unchecked(mean, k) * (kf + 1.0) / (kf + 1.0 - mean);
    bound.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(0.0, 3).unwrap(), 0.0);
        assert!((poisson_pmf(1.0, 0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(2.0, 2).unwrap() - 0.270_670_566_473_225_4).abs() < 1e-14);
    }

    #[test]
    fn large_k_is_finite_and_sums_to_one() {
        let mean = 850.0;
        let total: f64 = (0..3000).map(|k| poisson_pmf(mean, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(poisson_pmf(3.0, 10_000).unwrap() >= 0.0);
    }

    #[test]
    fn stirling_matches_summation_at_switch() {
        let exact: f64 = (2..=200u64).map(|n| (n as f64).ln()).sum();
        assert!((ln_factorial(200) - exact).abs() < 1e-9);
        let exact64: f64 = (2..=64u64).map(|n| (n as f64).ln()).sum();
        assert!((ln_factorial(64) - exact64).abs() < 1e-11);
    }

    #[test]
    fn tail_bound_dominates_true_tail() {
        for &mean in &[0.5, 4.0, 21.9, 62.8] {
            for k in (mean as u64 + 1)..(mean as u64 + 60) {
                let tail: f64 = (k..k + 2000).map(|n| pmf_unchecked(mean, n)).sum();
                assert!(upper_tail_bound(mean, k) >= tail * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn negative_mean_rejected() {
        assert!(poisson_pmf(-0.1, 1).is_err());
    }
}
