use serde::{Deserialize, Serialize};

use super::AnalyticError;

/// Coverage areas of the reference BSS, square meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// πr².
    pub area_total: f64,
    /// Lens shared with the OBSS disk.
    pub area_overlap: f64,
    /// `area_total - area_overlap`.
    pub area_exclusive: f64,
}

impl Geometry {
    pub fn overlap_fraction(&self) -> f64 {
        self.area_overlap / self.area_total
    }

    pub fn exclusive_fraction(&self) -> f64 {
        self.area_exclusive / self.area_total
    }
}

/// Intersection area of two disks of radius `r` whose centers are `d` apart.
///
/// Equal-radius lens: `2r²·acos(d/2r) − (d/2)·sqrt(4r² − d²)` on `[0, 2r]`,
/// zero beyond.
pub fn lens_overlap_area(r: f64, d: f64) -> Result<f64, AnalyticError> {
    if !r.is_finite() || r <= 0.0 {
        return Err(AnalyticError::InvalidParameter { name: "r", value: r });
    }
    if !d.is_finite() || d < 0.0 {
        return Err(AnalyticError::InvalidParameter { name: "d", value: d });
    }
    if d >= 2.0 * r {
        return Ok(0.0);
    }
    let full = std::f64::consts::PI * r * r;
    let area = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
    Ok(area.clamp(0.0, full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn endpoints() {
        let full = lens_overlap_area(10.0, 0.0).unwrap();
        assert!((full - 100.0 * std::f64::consts::PI).abs() < 1e-9);
        assert_eq!(lens_overlap_area(10.0, 20.0).unwrap(), 0.0);
        assert_eq!(lens_overlap_area(10.0, 35.0).unwrap(), 0.0);
    }

    #[test]
    fn monte_carlo_cross_check() {
        // Hit-or-miss over the bounding box of the first disk.
        let (r, d) = (10.0, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 2_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let x: f64 = rng.gen_range(-r..r);
            let y: f64 = rng.gen_range(-r..r);
            if x * x + y * y <= r * r && (x - d) * (x - d) + y * y <= r * r {
                hits += 1;
            }
        }
        let estimate = 4.0 * r * r * hits as f64 / n as f64;
        let exact = lens_overlap_area(r, d).unwrap();
        // binomial std error ≈ 0.09 m² at this n
        assert!((estimate - exact).abs() < 0.5, "mc {estimate} vs {exact}");
        assert!((exact - 45.331_175_4).abs() < 1e-6, "{exact}");
    }

    #[test]
    fn strictly_decreasing_inside() {
        let mut prev = lens_overlap_area(10.0, 0.0).unwrap();
        for k in 1..200 {
            let a = lens_overlap_area(10.0, k as f64 * 0.1).unwrap();
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn area_conservation_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let r: f64 = rng.gen_range(0.1..100.0);
            let d: f64 = rng.gen_range(0.0..2.0 * r);
            let ao = lens_overlap_area(r, d).unwrap();
            let total = std::f64::consts::PI * r * r;
            let ad = total - ao;
            assert!(ao >= 0.0 && ao <= total);
            assert!(((ad + ao) - total).abs() <= 1e-12 * total);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(lens_overlap_area(-1.0, 1.0).is_err());
        assert!(lens_overlap_area(1.0, -1.0).is_err());
        assert!(lens_overlap_area(1.0, f64::INFINITY).is_err());
        assert!(lens_overlap_area(f64::NAN, 1.0).is_err());
    }
}
