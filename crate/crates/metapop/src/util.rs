//! Small numeric helpers shared across modules.

/// Compensated (Kahan) summation; aggregation identities are tested at
/// 1e-10 so naive accumulation over a few hundred classes is not enough.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}
