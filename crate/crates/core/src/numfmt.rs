//! Locale-independent float formatting with a fixed number of significant
//! digits, in the style of C's `%.*g`.

pub fn format_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first in scientific form so the exponent reflects the rounded value.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `format_sig(x, 9)`, the precision used by every CSV and TSV output.
pub fn f9(x: f64) -> String {
    format_sig(x, 9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(f9(0.0), "0");
        assert_eq!(f9(0.85), "0.85");
        assert_eq!(f9(1.0 / 1.7), "0.588235294");
        assert_eq!(f9(-2.985074626865671), "-2.98507463");
        assert_eq!(f9(123456789.4), "123456789");
        assert_eq!(f9(1234567890.0), "1.23456789e+09");
        assert_eq!(f9(0.000012345), "1.2345e-05");
        assert_eq!(f9(0.0001), "0.0001");
        assert_eq!(f9(0.9999999999), "1");
        assert_eq!(format_sig(2.5, 1), "2");
    }
}
