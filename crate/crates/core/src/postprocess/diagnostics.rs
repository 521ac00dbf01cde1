use crate::error::{BccError, Result};

pub const GEWEKE_MIN_LEN: usize = 100;
pub const GEWEKE_FIRST: f64 = 0.1;
pub const GEWEKE_LAST: f64 = 0.5;

/// Segment mean and the batch-means variance of that mean, using
/// `floor(sqrt(n))` non-overlapping batches.
fn mean_and_variance(seg: &[f64]) -> (f64, f64) {
    let n = seg.len();
    let mean = seg.iter().sum::<f64>() / n as f64;
    let batches = ((n as f64).sqrt().floor() as usize).max(2);
    let size = n / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| seg[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var_batch = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, var_batch / batches as f64)
}

/// Geweke's z comparing the first `frac_a` and last `frac_b` of a chain.
pub fn geweke_z(chain: &[f64], frac_a: f64, frac_b: f64) -> Result<f64> {
    if chain.len() < GEWEKE_MIN_LEN {
        return Err(BccError::ChainTooShort { len: chain.len(), min: GEWEKE_MIN_LEN });
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0) {
        return Err(BccError::Invalid(format!("segment fractions ({frac_a}, {frac_b}) must be positive and sum to at most 1")));
    }
    let n = chain.len();
    let na = ((frac_a * n as f64).floor() as usize).max(4);
    let nb = ((frac_b * n as f64).floor() as usize).max(4);
    let (ma, va) = mean_and_variance(&chain[..na]);
    let (mb, vb) = mean_and_variance(&chain[n - nb..]);
    let v = va + vb;
    if !(v > 0.0) || !v.is_finite() {
        return Err(BccError::DegenerateChain("zero variance in a segment".into()));
    }
    Ok((ma - mb) / v.sqrt())
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Most frequent label; ties go to the smallest label and are flagged.
/// Returns (label, frequency, tie).
pub fn mode_label(labels: impl Iterator<Item = usize>, k: usize) -> (usize, f64, bool) {
    let mut counts = vec![0usize; k];
    let mut total = 0usize;
    for l in labels {
        counts[l] += 1;
        total += 1;
    }
    let best = *counts.iter().max().unwrap_or(&0);
    let label = counts.iter().position(|&c| c == best).unwrap_or(0);
    let tie = counts.iter().filter(|&&c| c == best).count() > 1;
    (label, best as f64 / total.max(1) as f64, tie)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geweke_errors() {
        assert!(matches!(geweke_z(&[1.0; 500], 0.1, 0.5), Err(BccError::DegenerateChain(_))));
        assert!(matches!(geweke_z(&[1.0; 50], 0.1, 0.5), Err(BccError::ChainTooShort { .. })));
    }

    #[test]
    fn ramp_is_flagged() {
        let ramp: Vec<f64> = (0..10_000).map(|i| i as f64 / 9_999.0).collect();
        assert!(geweke_z(&ramp, GEWEKE_FIRST, GEWEKE_LAST).unwrap().abs() > 10.0);
    }

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_sorted(&v, 0.025) - 3.475).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.975) - 97.525).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[4.0], 0.3), 4.0);
    }

    #[test]
    fn modes() {
        assert_eq!(mode_label([0, 0, 1].into_iter(), 2), (0, 2.0 / 3.0, false));
        assert_eq!(mode_label([0, 1].into_iter(), 2), (0, 0.5, true));
        assert_eq!(mode_label([2].into_iter(), 3), (2, 1.0, false));
    }
}
