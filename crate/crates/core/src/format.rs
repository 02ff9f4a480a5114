//! Locale-free number formatting shared by the CSV writers.

/// Formats a float with 17 significant digits, which round-trips every
/// finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // collapse -0.0 so symmetric tables print identically
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    format!("{:.16e}", x)
}
