//! Brute-force reference evaluation of the failure sums.
//!
//! Deliberately shares nothing with [`Model`](super::Model) beyond the
//! geometry: per-protocol rates are re-derived here, Poisson weights come
//! from the multiplicative recurrence instead of log space, and truncation
//! is fixed by the caller.

use serde::{Deserialize, Serialize};

use super::{AnalyticParams, ContenderPopulation, ModelConfig, SumStart, SuccessResult};
use crate::ProtocolKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub result: SuccessResult,
    /// Upper bound on the probability mass dropped by truncation.
    pub tail_bound: f64,
}

/// Evaluates the success model by explicit double summation up to
/// `i_max`/`j_max`.
pub fn series_oracle(
    protocol: ProtocolKind,
    params: &AnalyticParams,
    config: &ModelConfig,
    i_max: u64,
    j_max: u64,
) -> OracleResult {
    let geometry = params.geometry().expect("oracle requires valid geometry");
    let (exclusive, overlap, tail_bound) =
        oracle_double_sum(protocol, params, config, i_max, j_max);
    OracleResult {
        result: SuccessResult::combine(&geometry, exclusive, overlap),
        tail_bound,
    }
}

/// Returns `(p_fail_exclusive, p_fail_overlap, tail_bound)`.
pub(crate) fn oracle_double_sum(
    protocol: ProtocolKind,
    params: &AnalyticParams,
    config: &ModelConfig,
    i_max: u64,
    j_max: u64,
) -> (f64, f64, f64) {
    let geometry = params.geometry().expect("oracle requires valid geometry");
    let intra_area = match config.population {
        ContenderPopulation::WholeBss => geometry.area_total,
        ContenderPopulation::ExclusiveArea => geometry.area_exclusive,
    };
    let mu = params.lambda_a * intra_area;
    let nu = (params.lambda_a + params.lambda_b) * geometry.area_overlap;

    let per_sta = 1.0 / (params.a * params.tau);
    let rate = |i: u64| -> f64 {
        let i = i as f64;
        match protocol {
            ProtocolKind::Edca => i * per_sta,
            ProtocolKind::TriggerBased => {
                i * per_sta * (1.0 - params.rho_trigger) + 1.0 / (params.omega * params.tau)
            }
            ProtocolKind::SharingBased => i * per_sta * (1.0 - params.rho_share) + per_sta,
        }
    };
    let overlap_rate = 1.0 / (params.beta * params.tau);
    let window = 2.0 * params.tau;

    let wi = recurrence_weights(mu, i_max);
    let wj = recurrence_weights(nu, j_max);
    let i0 = start_index(config.exclusive_start);
    let j0 = start_index(config.overlap_start);

    let mut exclusive = 0.0;
    for i in i0..=i_max {
        exclusive += wi[i as usize] * (1.0 - (-window * rate(i)).exp());
    }

    let mut overlap = 0.0;
    if geometry.area_overlap > 0.0 {
        for i in i0..=i_max {
            for j in j0..=j_max {
                let collide = 1.0 - (-window * (rate(i) + j as f64 * overlap_rate)).exp();
                overlap += wi[i as usize] * wj[j as usize] * collide;
            }
        }
    }

    let tail_i = 1.0 - wi.iter().sum::<f64>();
    let tail_j = if geometry.area_overlap > 0.0 {
        1.0 - wj.iter().sum::<f64>()
    } else {
        0.0
    };
    let tail = tail_i.max(0.0) + tail_j.max(0.0);
    (exclusive, overlap, tail)
}

fn start_index(start: SumStart) -> u64 {
    match start {
        SumStart::Zero => 0,
        SumStart::One => 1,
    }
}

/// Poisson weights `P(N = 0..=n_max)` by `p_k = p_{k−1}·mean/k`.
///
/// Valid for means below ~700 where `e^(−mean)` is representable.
fn recurrence_weights(mean: f64, n_max: u64) -> Vec<f64> {
    let mut weights = Vec::with_capacity(n_max as usize + 1);
    let mut p = (-mean).exp();
    weights.push(p);
    for k in 1..=n_max {
        p *= mean / k as f64;
        weights.push(p);
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_is_exact() {
        let p = AnalyticParams {
            lambda_a: 0.0,
            lambda_b: 0.0,
            ..Default::default()
        };
        let o = series_oracle(ProtocolKind::Edca, &p, &ModelConfig::default(), 10, 10);
        assert_eq!(o.result.p_success, 1.0);
        assert_eq!(o.tail_bound, 0.0);
    }

    #[test]
    fn tail_bound_is_tiny_at_reference() {
        let o = series_oracle(
            ProtocolKind::Edca,
            &AnalyticParams::default(),
            &ModelConfig::default(),
            400,
            400,
        );
        assert!(o.tail_bound < 1e-12, "{}", o.tail_bound);
    }

    #[test]
    fn short_truncation_reports_large_tail() {
        let o = series_oracle(
            ProtocolKind::Edca,
            &AnalyticParams::default(),
            &ModelConfig::default(),
            10,
            10,
        );
        assert!(o.tail_bound > 0.5);
    }
}
