//! Order statistics shared by the selection operators and the analysis layer.

/// Median of `values`, reordering them in place. Even lengths average the two
/// central values. Returns NaN for an empty slice.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

pub fn median(values: &[f64]) -> f64 {
    median_in_place(&mut values.to_vec())
}

/// Median absolute deviation from the median (unscaled).
pub fn median_absolute_deviation(values: &[f64]) -> f64 {
    let mut scratch = values.to_vec();
    let center = median_in_place(&mut scratch);
    for (s, v) in scratch.iter_mut().zip(values) {
        *s = (v - center).abs();
    }
    median_in_place(&mut scratch)
}
