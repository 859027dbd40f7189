//! Locale-independent numeric formatting shared by every CSV writer.

/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn seventeen_significant_digits_roundtrip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            0.0,
            std::f64::consts::PI,
        ] {
            let s = num(x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
