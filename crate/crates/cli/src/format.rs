//! Float formatting for CSV output.

/// At least ten significant digits, more if needed to read back the same
/// `f64`.
pub fn float(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let ten = format!("{v:.9e}");
    if ten.parse::<f64>() == Ok(v) {
        ten
    } else {
        // shortest representation that round-trips
        format!("{v:e}")
    }
}
