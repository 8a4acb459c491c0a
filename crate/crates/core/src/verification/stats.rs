//! Small estimators shared by the Monte Carlo and convergence experiments.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `n` at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

pub fn wilson_halfwidth(successes: usize, n: usize) -> f64 {
    let (lo, hi) = wilson_interval(successes, n);
    0.5 * (hi - lo)
}

/// Quantile of an already sorted slice, linear interpolation between order
/// statistics (type 7). Returns NaN on empty input.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        return a;
    }
    a + (pos - lo as f64) * (b - a)
}

/// Sorts a copy (NaN last) and returns the requested quantiles.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    qs.iter().map(|&q| quantile_sorted(&v, q)).collect()
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 200);
        assert!(lo.abs() < 1e-15);
        assert!(hi > 0.0 && hi < 0.02);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn wilson_calibration_with_bernoulli_stub() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let p = 0.2;
        let mut covered = 0;
        for _ in 0..100 {
            let k = (0..200).filter(|_| rng.random::<f64>() < p).count();
            let (lo, hi) = wilson_interval(k, 200);
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 93, "covered {covered}/100");
    }

    fn exact_coverage(n: usize, p: f64) -> f64 {
        let ln_fact: Vec<f64> = (0..=n)
            .scan(0.0, |acc, k| {
                if k > 0 {
                    *acc += (k as f64).ln();
                }
                Some(*acc)
            })
            .collect();
        (0..=n)
            .filter(|&k| {
                let (lo, hi) = wilson_interval(k, n);
                lo <= p && p <= hi
            })
            .map(|k| {
                let ln_pmf = ln_fact[n] - ln_fact[k] - ln_fact[n - k]
                    + k as f64 * p.ln()
                    + (n - k) as f64 * (1.0 - p).ln();
                ln_pmf.exp()
            })
            .sum()
    }

    #[test]
    fn wilson_exact_coverage() {
        for n in [100, 200] {
            for i in 2..99 {
                let p = i as f64 / 100.0;
                let c = exact_coverage(n, p);
                assert!(c >= 0.93, "n={n} p={p}: coverage {c}");
            }
        }
    }

    #[test]
    fn quantile_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        let q = quantiles(&[3.0, f64::INFINITY, 1.0], &[0.05, 0.5, 0.95]);
        assert_eq!(q[1], 3.0);
        assert!(q[0] <= q[1] && q[1] <= q[2]);
        assert!(quantile_sorted(&[], 0.5).is_nan());
    }

    #[test]
    fn mean_and_slope() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.1).collect();
        assert!((pairwise_sum(&xs) - 49950.0).abs() < 1e-9);
    }
}
