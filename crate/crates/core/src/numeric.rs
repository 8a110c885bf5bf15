//! Deterministic reductions.
//!
//! Every sum that feeds a reported number goes through [`pairwise_sum`], whose
//! tree topology depends only on the slice length. The split is palindromic
//! (odd lengths keep the middle element aside), so summing a reversed slice
//! yields the same bits as summing the original.

const LEAF: usize = 8;

/// Reversal-invariant pairwise sum.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n <= LEAF {
        return leaf_sum(xs);
    }
    let half = n / 2;
    if n.is_multiple_of(2) {
        pairwise_sum(&xs[..half]) + pairwise_sum(&xs[half..])
    } else {
        (pairwise_sum(&xs[..half]) + pairwise_sum(&xs[half + 1..])) + xs[half]
    }
}

// Adds mirrored pairs first, then the pair sums outward-in, so the leaf is
// palindromic as well.
fn leaf_sum(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n / 2 {
        acc += xs[i] + xs[n - 1 - i];
    }
    if n % 2 == 1 {
        acc += xs[n / 2];
    }
    acc
}

/// Pairwise sum of a strided component: `xs[offset], xs[offset + stride], ...`.
pub fn strided_sum(xs: &[f64], offset: usize, stride: usize) -> f64 {
    let column: Vec<f64> = xs.iter().skip(offset).step_by(stride).copied().collect();
    pairwise_sum(&column)
}

/// `log sum_i w_i exp(v_i)` with max-shift. `-inf` entries contribute nothing.
/// Returns `None` when every entry is `-inf`.
pub fn log_sum_exp_weighted(values: &[f64], weights: &[f64]) -> Option<f64> {
    debug_assert_eq!(values.len(), weights.len());
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    if max == f64::INFINITY {
        return Some(f64::INFINITY);
    }
    let terms: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(&v, &w)| if v == f64::NEG_INFINITY { 0.0 } else { w * (v - max).exp() })
        .collect();
    Some(max + pairwise_sum(&terms).ln())
}

/// Sample mean and standard error of the mean (index-ordered pairwise sums).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sums() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn lse_shifts() {
        let v = [1000.0, 1000.0];
        let w = [0.5, 0.5];
        assert!((log_sum_exp_weighted(&v, &w).unwrap() - 1000.0).abs() < 1e-12);
        assert_eq!(log_sum_exp_weighted(&[f64::NEG_INFINITY], &[1.0]), None);
        let v = [f64::NEG_INFINITY, 0.0];
        assert_eq!(log_sum_exp_weighted(&v, &w).unwrap(), 0.5f64.ln());
    }

    #[test]
    fn se_of_constant_is_zero() {
        let (m, se) = mean_and_se(&[2.5; 17]);
        assert_eq!(m, 2.5);
        assert_eq!(se, 0.0);
    }

    proptest! {
        #[test]
        fn reversal_invariant(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum(&rev).to_bits());
        }
    }
}
