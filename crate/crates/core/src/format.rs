//! Number formatting for CSV outputs.

/// Render `x` with six significant digits in plain decimal notation, or in
/// scientific notation outside `[1e-4, 1e15)`. Output is locale-free and
/// identical on every platform.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..15).contains(&exponent) {
        let decimals = (5 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // -0.000000 style results from values that round to zero.
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn examples() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.5079314), "0.507931");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(-123.456789), "-123.457");
        assert_eq!(sig6(0.00012345678), "0.000123457");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
        assert_eq!(sig6(2.5e20), "2.50000e20");
    }
}
