//! Human-readable rendering.

/// Six significant digits, fixed notation for moderate magnitudes and
/// scientific otherwise.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mant, exp) = s.split_once('e').expect("scientific format has an exponent");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{exp}")
    }
}

pub fn vector(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| sig6(x)).collect();
    format!("[{}]", parts.join(", "))
}
