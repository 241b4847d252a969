use crate::error::{Error, Result};
use crate::num::Real;

/// Left and right L-statistic tail weights of a sample, from the sorted
/// lower and upper halves relative to the middle order statistic.
///
/// The centre is the sample median, the midpoint of the two middle order
/// statistics for even `n`, which makes negating the sample swap the sides
/// exactly. For odd `n` the middle observation contributes half its weight
/// to each side.
pub fn lstat_kurtosis<T: Real>(sample: &[T]) -> Result<(T, T)> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::InsufficientSample { needed: 8, got: n });
    }
    let mut x = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let nf = T::from_usize_lossy(n);
    let two_n = T::lit(2.0) / nf;
    // 1-based weight (4i − 2)/n.
    let w = |i: usize| (T::lit(4.0) * T::from_usize_lossy(i) - T::lit(2.0)) / nf;
    let (mut num_l, mut sum_l, mut num_r, mut sum_r) = (T::zero(), T::zero(), T::zero(), T::zero());
    let half = n / 2;
    let centre;
    if n % 2 == 0 {
        for i in 1..=half {
            num_l = num_l + (w(i) - T::one()) * x[i - 1];
            sum_l = sum_l + x[i - 1];
        }
        for i in half + 1..=n {
            num_r = num_r + (w(i) - T::lit(3.0)) * x[i - 1];
            sum_r = sum_r + x[i - 1];
        }
        centre = (x[half - 1] + x[half]) * T::lit(0.5);
    } else {
        let c = half + 1;
        for i in 1..c {
            num_l = num_l + (w(i) - T::one()) * x[i - 1];
            sum_l = sum_l + x[i - 1];
        }
        for i in c + 1..=n {
            num_r = num_r + (w(i) - T::lit(3.0)) * x[i - 1];
            sum_r = sum_r + x[i - 1];
        }
        let h = T::lit(0.5);
        let xc = x[c - 1];
        num_l = num_l + h * (w(c) - T::one()) * xc;
        sum_l = sum_l + h * xc;
        num_r = num_r + h * (w(c) - T::lit(3.0)) * xc;
        sum_r = sum_r + h * xc;
        centre = xc;
    }
    let left = two_n * num_l / (centre - two_n * sum_l);
    let right = two_n * num_r / (two_n * sum_r - centre);
    Ok((left, right))
}

/// Moment skewness `m3/m2^{3/2}` and kurtosis `m4/m2²` with population
/// (1/n) moments; the kurtosis is not centred, so a normal sample gives ≈ 3.
pub fn sample_skewness_kurtosis<T: Real>(sample: &[T]) -> Result<(T, T)> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::InsufficientSample { needed: 4, got: n });
    }
    let nf = T::from_usize_lossy(n);
    let mean = sample.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &v in sample {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    Ok((m3 / m2.powf(T::lit(1.5)), m4 / (m2 * m2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Direct transcription for even n, kept separate from the main loop.
    fn oracle(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let h = x.len() / 2;
        let mut s = x.to_vec();
        s.sort_by(f64::total_cmp);
        let xi = |i: usize| s[i - 1];
        let num_l: f64 = (1..=h).map(|i| ((4 * i - 2) as f64 / n - 1.0) * xi(i)).sum::<f64>() * 2.0 / n;
        let median = 0.5 * (xi(h) + xi(h + 1));
        let den_l = median - (1..=h).map(xi).sum::<f64>() * 2.0 / n;
        let num_r: f64 = (h + 1..=x.len()).map(|i| ((4 * i - 2) as f64 / n - 3.0) * xi(i)).sum::<f64>() * 2.0 / n;
        let den_r = (h + 1..=x.len()).map(xi).sum::<f64>() * 2.0 / n - median;
        (num_l / den_l, num_r / den_r)
    }

    #[test]
    fn grid_matches_direct_summation() {
        let x: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).rev().collect();
        let (l, r) = lstat_kurtosis(&x).unwrap();
        let (ol, or) = oracle(&x);
        assert!((l - ol).abs() < 1e-12 && (r - or).abs() < 1e-12);
    }

    #[test]
    fn normal_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (l, r) = lstat_kurtosis(&x).unwrap();
        assert!((l - 0.4142).abs() < 0.01 && (r - 0.4142).abs() < 0.01, "{l} {r}");
        let (s, k) = sample_skewness_kurtosis(&x).unwrap();
        assert!(s.abs() < 0.02 && (k - 3.0).abs() < 0.05);
    }

    #[test]
    fn odd_n_reflection_is_exact() {
        let x = [0.3, -1.2, 4.0, 0.9, 2.2, -0.4, 1.5, 0.1, 3.3];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (l, r) = lstat_kurtosis(&x).unwrap();
        let (nl, nr) = lstat_kurtosis(&neg).unwrap();
        assert!((l - nr).abs() < 1e-12 && (r - nl).abs() < 1e-12);
    }

    #[test]
    fn even_n_reflection_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v.exp()).collect();
        let neg: Vec<f64> = x.iter().map(|v: &f64| -v).collect();
        let (l, r) = lstat_kurtosis(&x).unwrap();
        let (nl, nr) = lstat_kurtosis(&neg).unwrap();
        assert!((l - nr).abs() < 1e-12 && (r - nl).abs() < 1e-12);
    }

    #[test]
    fn small_samples_rejected() {
        assert!(lstat_kurtosis(&[1.0; 7]).is_err());
        assert!(sample_skewness_kurtosis(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn f32_agrees() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64 * 0.1 - 2.0).collect();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let (l, r) = lstat_kurtosis(&x).unwrap();
        let (l32, r32) = lstat_kurtosis(&x32).unwrap();
        assert!((l - l32 as f64).abs() < 1e-4 && (r - r32 as f64).abs() < 1e-4);
    }
}
