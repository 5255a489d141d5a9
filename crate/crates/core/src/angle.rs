//! Degree-based trigonometry that is exact on multiples of 90°.

/// Reduces to `[0, 360)` and returns `(quadrant, remainder)` when the angle is
/// an exact multiple of 90°.
fn quadrant(deg: f64) -> Option<u8> {
    let r = deg.rem_euclid(360.0);
    if r % 90.0 == 0.0 {
        Some((r / 90.0) as u8 % 4)
    } else {
        None
    }
}

pub fn sin_deg(deg: f64) -> f64 {
    match quadrant(deg) {
        Some(0) | Some(2) => 0.0,
        Some(1) => 1.0,
        Some(3) => -1.0,
        _ => deg.to_radians().sin(),
    }
}

pub fn cos_deg(deg: f64) -> f64 {
    match quadrant(deg) {
        Some(0) => 1.0,
        Some(2) => -1.0,
        Some(1) | Some(3) => 0.0,
        _ => deg.to_radians().cos(),
    }
}
