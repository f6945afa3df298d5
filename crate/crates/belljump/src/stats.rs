//! Kolmogorov-Smirnov distances for distribution checks.

/// Supremum distance between the empirical CDF of `samples` and a reference
/// CDF. Sorts a copy; NaN samples are a caller bug and panic via the sort.
pub fn ks_distance_to_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty(), "KS distance needs at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance: supremum gap between the two
/// empirical CDFs, evaluated by merging the sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "KS distance needs nonempty samples"
    );
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("NaN sample"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("NaN sample"));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    // Advance past all samples tied at the current value in both arrays
    // before reading the gap, so ties never produce a spurious step.
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{trajectory_rng, uniform_f64};
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_sample_distance_on_exact_grid() {
        // Samples at the 1/8, 3/8, 5/8, 7/8 quantiles of Uniform(0, 1):
        // the gap to the empirical CDF is exactly 1/8 at each point.
        let samples = [0.125, 0.375, 0.625, 0.875];
        let d = ks_distance_to_cdf(&samples, |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(d, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn one_sample_distance_detects_shift() {
        let samples = [0.6, 0.7, 0.8, 0.9];
        let d = ks_distance_to_cdf(&samples, |x| x.clamp(0.0, 1.0));
        assert_abs_diff_eq!(d, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn uniform_samples_pass_uniform_cdf() {
        let mut rng = trajectory_rng(7, 0);
        let samples: Vec<f64> = (0..20_000).map(|_| uniform_f64(&mut rng)).collect();
        let d = ks_distance_to_cdf(&samples, |x| x.clamp(0.0, 1.0));
        // 5% critical value at n = 20000 is about 0.0096.
        assert!(d < 0.012, "KS distance {d} too large for uniform draws");
    }

    #[test]
    fn two_sample_distance_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_abs_diff_eq!(ks_two_sample(&a, &a), 0.0, epsilon = 1e-15);
        let b = [10.0, 11.0];
        assert_abs_diff_eq!(ks_two_sample(&a, &b), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_sample_distance_matches_hand_value() {
        // ECDFs of {1,3} and {2,4} differ by 1/2 on (1,2), (2,3) and (3,4).
        let d = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]);
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_sample_same_law_small_distance() {
        let mut rng = trajectory_rng(11, 0);
        let a: Vec<f64> = (0..10_000).map(|_| uniform_f64(&mut rng)).collect();
        let b: Vec<f64> = (0..10_000).map(|_| uniform_f64(&mut rng)).collect();
        assert!(ks_two_sample(&a, &b) < 0.025);
    }
}
