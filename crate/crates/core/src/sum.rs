//! Fixed-order pairwise summation.
//!
//! The split points depend only on the slice length, so the result is the
//! same no matter how the summands were produced.

const LEAF: usize = 16;

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and unbiased sample variance.
///
/// The mean is accumulated as offsets from the first sample, so a constant
/// sample returns that constant exactly with zero variance.
pub(crate) fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let pivot = values[0];
    let offsets: Vec<f64> = values.iter().map(|v| v - pivot).collect();
    let mean_offset = pairwise_sum(&offsets) / n as f64;
    let mean = pivot + mean_offset;
    if n < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = offsets
        .iter()
        .map(|d| {
            let e = d - mean_offset;
            e * e
        })
        .collect();
    (mean, pairwise_sum(&squares) / (n - 1) as f64)
}
