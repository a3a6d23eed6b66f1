//! Locale-independent numeric formatting for exported tables.

/// Formats with 17 significant digits in scientific notation; non-finite
/// values print as `nan`, `inf`, `-inf`.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
