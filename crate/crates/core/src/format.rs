//! Fixed-precision decimal rendering shared by the CSV writers and the CLI.

/// Renders `value` in positional notation with `digits` significant digits.
///
/// Non-finite values render as `NaN`, `inf` or `-inf`.
pub fn sig(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    if value == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let digits = digits.max(1);
    // Round first in scientific form so the exponent reflects carries
    // such as 9.99…→10.
    let sci = format!("{:.*e}", digits - 1, value);
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{value:.decimals$}")
}
