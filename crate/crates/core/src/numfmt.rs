//! Number formatting shared by the CSV writers.

/// Formats `value` with `digits` significant digits, `%g` style: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed.
pub fn significant(value: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return format!("{value}");
    }
    // Let the scientific formatter do the rounding so the exponent accounts
    // for carries (9.9999999996 -> 1.00000000e1).
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, value)).to_string()
}

/// Nine significant digits, the precision of every curve table.
pub fn sig9(value: f64) -> String {
    significant(value, 9)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(0.5), "0.5");
        assert_eq!(sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(sig9(314.159265358979), "314.159265");
        assert_eq!(sig9(9.9999999996), "10");
        assert_eq!(sig9(1.0e-7), "1e-07");
        assert_eq!(sig9(-2.5e-3), "-0.0025");
        assert_eq!(sig9(123456789012.0), "1.23456789e+11");
        assert_eq!(significant(0.8821345, 3), "0.882");
    }
}
