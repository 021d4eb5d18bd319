use serde::{Deserialize, Serialize};

use super::geometry::{lens_overlap_area, Geometry};
use super::AnalyticError;

/// Parameters of the two-BSS channel access model.
///
/// Densities are spatial intensities (STAs per square meter); `a`, `beta`
/// and `omega` are inverse activity factors relative to the frame duration
/// `tau`. The participation ratios are fractions of the exclusive-area
/// contention load removed by triggering or sharing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticParams {
    /// Coverage radius of each BSS, meters.
    pub r: f64,
    /// Distance between the two APs, meters.
    pub d: f64,
    /// Intensity of reference-BSS STAs.
    pub lambda_a: f64,
    /// Intensity of OBSS STAs.
    pub lambda_b: f64,
    /// Frame duration, seconds.
    pub tau: f64,
    /// Inverse activity factor of exclusive-area STAs.
    pub a: f64,
    /// Inverse activity factor of overlap-area STAs.
    pub beta: f64,
    /// Inverse trigger-frame frequency factor.
    pub omega: f64,
    /// Fraction of triggered STAs.
    pub rho_trigger: f64,
    /// Fraction of STAs participating in a shared TxOP.
    pub rho_share: f64,
}

impl Default for AnalyticParams {
    /// The reference parameterization: τ = 5 ms, r = 10 m,
    /// λ_A = λ_B = 0.1, a = 500, β = 1, ω = 100, d = 15 m, ratios 0.5.
    fn default() -> Self {
        AnalyticParams {
            r: 10.0,
            d: 15.0,
            lambda_a: 0.1,
            lambda_b: 0.1,
            tau: 0.005,
            a: 500.0,
            beta: 1.0,
            omega: 100.0,
            rho_trigger: 0.5,
            rho_share: 0.5,
        }
    }
}

impl AnalyticParams {
    pub fn with_distance(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    /// Sets both participation ratios to `rho`.
    pub fn with_participation(mut self, rho: f64) -> Self {
        self.rho_trigger = rho;
        self.rho_share = rho;
        self
    }

    /// Parses a TOML table of parameters; omitted keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        fn check(name: &'static str, value: f64, ok: bool) -> Result<(), AnalyticError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(AnalyticError::InvalidParameter { name, value })
            }
        }
        check("r", self.r, self.r > 0.0)?;
        check("d", self.d, self.d >= 0.0)?;
        check("lambda_a", self.lambda_a, self.lambda_a >= 0.0)?;
        check("lambda_b", self.lambda_b, self.lambda_b >= 0.0)?;
        check("tau", self.tau, self.tau > 0.0)?;
        check("a", self.a, self.a > 0.0)?;
        check("beta", self.beta, self.beta > 0.0)?;
        check("omega", self.omega, self.omega > 0.0)?;
        check(
            "rho_trigger",
            self.rho_trigger,
            (0.0..=1.0).contains(&self.rho_trigger),
        )?;
        check("rho_share", self.rho_share, (0.0..=1.0).contains(&self.rho_share))?;
        Ok(())
    }

    /// Per-STA frame rate in the exclusive area, 1/(aτ).
    pub fn exclusive_rate(&self) -> f64 {
        1.0 / (self.a * self.tau)
    }

    /// Per-STA frame rate in the overlap area, 1/(βτ).
    pub fn overlap_rate(&self) -> f64 {
        1.0 / (self.beta * self.tau)
    }

    /// Trigger frame generation rate of the AP, 1/(ωτ).
    pub fn trigger_rate(&self) -> f64 {
        1.0 / (self.omega * self.tau)
    }

    pub fn geometry(&self) -> Result<Geometry, AnalyticError> {
        let area_total = std::f64::consts::PI * self.r * self.r;
        let area_overlap = lens_overlap_area(self.r, self.d)?;
        Ok(Geometry {
            area_total,
            area_overlap,
            area_exclusive: area_total - area_overlap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rates() {
        let p = AnalyticParams::default();
        assert!((p.exclusive_rate() - 0.4).abs() < 1e-12);
        assert!((p.overlap_rate() - 200.0).abs() < 1e-9);
        assert!((p.trigger_rate() - 2.0).abs() < 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = [
            AnalyticParams { r: 0.0, ..Default::default() },
            AnalyticParams { d: -1.0, ..Default::default() },
            AnalyticParams { tau: f64::NAN, ..Default::default() },
            AnalyticParams { rho_share: 1.5, ..Default::default() },
            AnalyticParams { lambda_b: -0.1, ..Default::default() },
            AnalyticParams { omega: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(
                p.validate(),
                Err(AnalyticError::InvalidParameter { .. })
            ));
        }
    }
}
