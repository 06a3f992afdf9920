//! Decimal text formatting shared by the on-disk formats.

/// Formats `value` rounded to 9 significant digits, using the shortest
/// decimal string that parses back to the rounded value.
///
/// Magnitudes in `[1e-5, 1e16)` are written positionally, everything else in
/// exponent notation (`1.5e-7`).
pub fn format_sig9(value: f64) -> String {
    let rounded = round_sig9(value);
    let magnitude = rounded.abs();
    if magnitude == 0.0 || (1e-5..1e16).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(value: f64) -> f64 {
    if !value.is_finite() {
        return value;
    }
    // `{:.8e}` is correctly rounded, so the parse is exact for the printed digits.
    format!("{value:.8e}")
        .parse()
        .expect("formatted float must parse")
}

/// Fixed six-decimal rendering used for scores and precisions.
pub fn format_fixed6(value: f64) -> String {
    let s = format!("{value:.6}");
    // Avoid "-0.000000" for tiny negatives so output is sign-stable.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}
