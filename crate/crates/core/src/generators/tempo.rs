use crate::scalar::Scalar;

const SLOWEST_BPM: f64 = 70.0;
const BPM_RANGE: f64 = 90.0;

/// Beats per minute for an energy level: `70 + 90 * energy`, rounded.
pub fn tempo_map<S: Scalar>(energy: S) -> u32 {
    let e = energy.unit().to_f64_lossy();
    (SLOWEST_BPM + BPM_RANGE * e).round() as u32
}
