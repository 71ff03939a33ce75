//! Locale-independent float formatting for tabular output.

/// Formats `x` with 9 significant digits, `%.9g` style: fixed notation for
/// decimal exponents in `-4..9`, scientific otherwise, trailing zeros
/// trimmed. `-0` prints as `0`.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp output has an exponent");
    let exp: i32 = exp.parse().expect("LowerExp exponent is an integer");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn examples() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(1.0 / 6.0), "0.166666667");
        assert_eq!(sig9(0.6365141682948128), "0.636514168");
        assert_eq!(sig9(123456789.0), "123456789");
        assert_eq!(sig9(1234567890.0), "1.23456789e9");
        assert_eq!(sig9(9.9999999996), "10");
        assert_eq!(sig9(3.484e-4), "0.0003484");
        assert_eq!(sig9(1.5e-7), "1.5e-7");
        assert_eq!(sig9(3.67e-5), "3.67e-5");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(f64::NAN), "NaN");
    }

    #[test]
    fn keeps_nine_significant_digits() {
        for &x in &[std::f64::consts::PI, 1e-3 / 7.0, 12345.678912345, 0.1 + 0.2] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {}", sig9(x));
        }
    }
}
