use serde::{Deserialize, Serialize};

use super::poisson::{pmf_unchecked, upper_tail_bound};
use super::{AnalyticError, AnalyticParams, Geometry};
use crate::ProtocolKind;

/// First index of a contender-count summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumStart {
    Zero,
    One,
}

impl SumStart {
    fn first(self) -> u64 {
        match self {
            SumStart::Zero => 0,
            SumStart::One => 1,
        }
    }
}

/// Which reference-BSS STAs count as intra-BSS contenders of a tagged STA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContenderPopulation {
    /// All reference-BSS STAs, Poisson mean `λ_A·A`.
    WholeBss,
    /// Only STAs in the exclusive area, Poisson mean `λ_A·A_d`.
    ExclusiveArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    /// Adaptive truncated double series.
    Series,
    /// Probability-generating-function closed form.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub exclusive_start: SumStart,
    pub overlap_start: SumStart,
    pub population: ContenderPopulation,
    pub evaluation: Evaluation,
    /// Poisson tail mass at which the series is truncated.
    pub tolerance: f64,
    /// Overrides the `10·mean + 200` term cap.
    pub max_terms: Option<u64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            exclusive_start: SumStart::One,
            overlap_start: SumStart::Zero,
            population: ContenderPopulation::WholeBss,
            evaluation: Evaluation::Series,
            tolerance: 1e-12,
            max_terms: None,
        }
    }
}

/// Failure and success probabilities of a tagged reference-BSS STA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessResult {
    pub p_fail_exclusive: f64,
    pub p_fail_overlap: f64,
    pub p_success: f64,
}

impl SuccessResult {
    pub(crate) fn combine(geometry: &Geometry, p_fail_exclusive: f64, p_fail_overlap: f64) -> Self {
        let p_success = 1.0
            - geometry.exclusive_fraction() * p_fail_exclusive
            - geometry.overlap_fraction() * p_fail_overlap;
        SuccessResult {
            p_fail_exclusive,
            p_fail_overlap,
            p_success: p_success.clamp(0.0, 1.0),
        }
    }
}

/// Aggregate exclusive-area contention rate as an affine function of the
/// contender count: `slope·i + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AffineRate {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineRate {
    pub(crate) fn for_protocol(protocol: ProtocolKind, params: &AnalyticParams) -> Self {
        let per_sta = params.exclusive_rate();
        match protocol {
            ProtocolKind::Edca => AffineRate {
                slope: per_sta,
                intercept: 0.0,
            },
            ProtocolKind::TriggerBased => AffineRate {
                slope: per_sta * (1.0 - params.rho_trigger),
                intercept: params.trigger_rate(),
            },
            ProtocolKind::SharingBased => AffineRate {
                slope: per_sta * (1.0 - params.rho_share),
                intercept: per_sta,
            },
        }
    }

    fn at(self, i: u64) -> f64 {
        self.slope * i as f64 + self.intercept
    }
}

/// Aggregate contention rate of `i` exclusive-area contenders under
/// `protocol`, per second.
pub fn effective_exclusive_rate(protocol: ProtocolKind, i: u64, params: &AnalyticParams) -> f64 {
    AffineRate::for_protocol(protocol, params).at(i)
}

/// Poisson means of the intra-BSS (i) and overlap (j) contender counts.
pub(crate) fn contender_means(
    params: &AnalyticParams,
    geometry: &Geometry,
    population: ContenderPopulation,
) -> (f64, f64) {
    let intra_area = match population {
        ContenderPopulation::WholeBss => geometry.area_total,
        ContenderPopulation::ExclusiveArea => geometry.area_exclusive,
    };
    (
        params.lambda_a * intra_area,
        (params.lambda_a + params.lambda_b) * geometry.area_overlap,
    )
}

/// Evaluator for the channel-access success model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
}

impl Model {
    pub fn new(config: ModelConfig) -> Self {
        Model { config }
    }

    pub fn fail_prob_exclusive(
        &self,
        protocol: ProtocolKind,
        params: &AnalyticParams,
    ) -> Result<f64, AnalyticError> {
        params.validate()?;
        let geometry = params.geometry()?;
        self.exclusive_term(protocol, params, &geometry)
    }

    pub fn fail_prob_overlap(
        &self,
        protocol: ProtocolKind,
        params: &AnalyticParams,
    ) -> Result<f64, AnalyticError> {
        params.validate()?;
        let geometry = params.geometry()?;
        self.overlap_term(protocol, params, &geometry)
    }

    pub fn success_probability(
        &self,
        protocol: ProtocolKind,
        params: &AnalyticParams,
    ) -> Result<SuccessResult, AnalyticError> {
        params.validate()?;
        let geometry = params.geometry()?;
        let exclusive = self.exclusive_term(protocol, params, &geometry)?;
        let overlap = self.overlap_term(protocol, params, &geometry)?;
        Ok(SuccessResult::combine(&geometry, exclusive, overlap))
    }

    fn exclusive_term(
        &self,
        protocol: ProtocolKind,
        params: &AnalyticParams,
        geometry: &Geometry,
    ) -> Result<f64, AnalyticError> {
        let rate = AffineRate::for_protocol(protocol, params);
        let (mu, _) = contender_means(params, geometry, self.config.population);
        let two_tau = 2.0 * params.tau;
        let value = match self.config.evaluation {
            Evaluation::ClosedForm => {
                let start = self.config.exclusive_start;
                let z = (-two_tau * rate.slope).exp();
                let k0 = (-two_tau * rate.intercept).exp();
                at_least(start, mu) - k0 * weighted_pgf(start, mu, z)
            }
            Evaluation::Series => {
                let terms = self.truncation(mu)?;
                let mut sum = 0.0;
                for i in self.config.exclusive_start.first()..=terms {
                    let w = pmf_unchecked(mu, i);
                    if w == 0.0 && i as f64 > mu {
                        break;
                    }
                    sum += w * -(-two_tau * rate.at(i)).exp_m1();
                }
                sum
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }

    fn overlap_term(
        &self,
        protocol: ProtocolKind,
        params: &AnalyticParams,
        geometry: &Geometry,
    ) -> Result<f64, AnalyticError> {
        if geometry.area_overlap <= 0.0 {
            return Ok(0.0);
        }
        let rate = AffineRate::for_protocol(protocol, params);
        let (mu, nu) = contender_means(params, geometry, self.config.population);
        let two_tau = 2.0 * params.tau;
        let obss_rate = params.overlap_rate();
        let value = match self.config.evaluation {
            Evaluation::ClosedForm => {
                let (si, sj) = (self.config.exclusive_start, self.config.overlap_start);
                let zi = (-two_tau * rate.slope).exp();
                let zj = (-two_tau * obss_rate).exp();
                let k0 = (-two_tau * rate.intercept).exp();
                at_least(si, mu) * at_least(sj, nu)
                    - k0 * weighted_pgf(si, mu, zi) * weighted_pgf(sj, nu, zj)
            }
            Evaluation::Series => {
                let i_terms = self.truncation(mu)?;
                let j_terms = self.truncation(nu)?;
                let j_weights: Vec<(f64, f64)> = (self.config.overlap_start.first()..=j_terms)
                    .map(|j| (pmf_unchecked(nu, j), j as f64 * obss_rate))
                    .collect();
                let mut sum = 0.0;
                for i in self.config.exclusive_start.first()..=i_terms {
                    let wi = pmf_unchecked(mu, i);
                    if wi == 0.0 {
                        if i as f64 > mu {
                            break;
                        }
                        continue;
                    }
                    let base = rate.at(i);
                    let inner: f64 = j_weights
                        .iter()
                        .map(|&(wj, extra)| wj * -(-two_tau * (base + extra)).exp_m1())
                        .sum();
                    sum += wi * inner;
                }
                sum
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Last index to sum for a Poisson count of the given mean. The double
    /// sum drops tail mass along both axes, so each gets a quarter of the
    /// tolerance to keep the total truncation error under it.
    fn truncation(&self, mean: f64) -> Result<u64, AnalyticError> {
        let cap = self
            .config
            .max_terms
            .unwrap_or_else(|| (10.0 * mean + 200.0).ceil() as u64);
        let tolerance = self.config.tolerance * 0.25;
        let mut k = (mean.floor() as u64).saturating_add(1);
        loop {
            let tail = upper_tail_bound(mean, k + 1);
            if tail < tolerance {
                return Ok(k);
            }
            if k >= cap {
                return Err(AnalyticError::NoConvergence {
                    tail,
                    tolerance,
                    terms: cap,
                });
            }
            k += 1;
        }
    }
}

/// `P(N ≥ start)` for `N ~ Poisson(mean)`.
fn at_least(start: SumStart, mean: f64) -> f64 {
    match start {
        SumStart::Zero => 1.0,
        SumStart::One => -(-mean).exp_m1(),
    }
}

/// `Σ_{n ≥ start} P(N = n)·zⁿ` for `N ~ Poisson(mean)`.
fn weighted_pgf(start: SumStart, mean: f64, z: f64) -> f64 {
    let full = (-mean * (1.0 - z)).exp();
    match start {
        SumStart::Zero => full,
        SumStart::One => full - (-mean).exp(),
    }
}
