//! Closed-form channel-access success model for a reference BSS next to an
//! overlapping BSS.
//!
//! STAs are Poisson-distributed over the coverage disks. A tagged STA fails
//! when another contender is active inside its 2τ vulnerable window. STAs
//! in the exclusive area only see intra-BSS contenders; STAs in the lens
//! shared with the OBSS additionally see the OBSS population. Trigger-based
//! and sharing-based access change only the aggregate exclusive-area rate.

mod geometry;
mod model;
mod oracle;
mod params;
mod poisson;
mod sweep;

pub use geometry::{lens_overlap_area, Geometry};
pub use model::{
    effective_exclusive_rate, ContenderPopulation, Evaluation, Model, ModelConfig, SuccessResult,
    SumStart,
};
pub use oracle::{series_oracle, OracleResult};
#[cfg(test)]
pub(crate) use oracle::oracle_double_sum;
pub use params::AnalyticParams;
pub use poisson::{ln_factorial, poisson_pmf, upper_tail_bound};
pub use sweep::{
    grid, sweep_distance, sweep_participation, Curve, CurvePoint, CurveTable, CURVE_CSV_HEADER,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("series did not converge: tail bound {tail:e} above tolerance {tolerance:e} after {terms} terms")]
    NoConvergence { tail: f64, tolerance: f64, terms: u64 },
    #[error("sweep grid is empty")]
    EmptyGrid,
}
