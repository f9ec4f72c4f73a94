use std::f64::consts::PI;

pub const SYSTOLIC_PHASE: f64 = 0.15;
pub const SYSTOLIC_HALFWIDTH: f64 = 0.15;
pub const DICROTIC_PHASE: f64 = 0.45;
pub const DICROTIC_HALFWIDTH: f64 = 0.12;
pub const DICROTIC_HEIGHT: f64 = 0.25;

fn bump(phase: f64, center: f64, halfwidth: f64) -> f64 {
    let d = (phase - center).abs();
    let d = d.min(1.0 - d);
    if d < halfwidth {
        (PI * d / (2.0 * halfwidth)).cos().powi(2)
    } else {
        0.0
    }
}

/// Normalized pulse shape at cycle phase `phase` (any real; wrapped to [0, 1)).
///
/// A systolic raised-cosine peak of height 1 and a dicrotic bump of height
/// 0.25 at phase 0.45, on compact non-overlapping supports; zero elsewhere.
pub fn pulse_shape(phase: f64) -> f64 {
    let ph = phase.rem_euclid(1.0);
    bump(ph, SYSTOLIC_PHASE, SYSTOLIC_HALFWIDTH) + DICROTIC_HEIGHT * bump(ph, DICROTIC_PHASE, DICROTIC_HALFWIDTH)
}

/// `p(t)` in [0, 1] with period `1 / heart_rate_hz`.
pub fn cardiac_waveform(heart_rate_hz: f64, t: &[f64]) -> Vec<f64> {
    assert!(heart_rate_hz > 0.0, "heart rate must be positive");
    t.iter().map(|&ti| pulse_shape(ti * heart_rate_hz)).collect()
}
