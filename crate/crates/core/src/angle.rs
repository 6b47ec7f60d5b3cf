//! Circular angle helpers. All azimuths are in degrees on the ring (-180, 180].

/// Wraps an angle in degrees to (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// Signed shortest rotation from `from` to `to`, in (-180, 180].
pub fn signed_diff_deg(to: f64, from: f64) -> f64 {
    wrap_deg(to - from)
}

/// Absolute circular distance between two azimuths, in [0, 180].
pub fn circ_dist_deg(a: f64, b: f64) -> f64 {
    signed_diff_deg(a, b).abs()
}
