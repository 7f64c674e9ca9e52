//! Small statistical helpers: compensated sums, summary statistics, the Hill
//! tail estimator and the two-sample Kolmogorov-Smirnov test.

use crate::rng::StreamRng;
use rand::Rng;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over `sqrt(len)`).
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1) as f64;
    (var / n as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    if v.len() % 2 == 1 {
        v[h]
    } else {
        0.5 * (v[h - 1] + v[h])
    }
}

/// Fraction of the sample used by [`hill_estimate`].
pub const HILL_FRACTION: f64 = 0.05;

/// Hill estimate of the tail exponent from the top `floor(len * fraction)`
/// order statistics: `k / Σ ln(x_(i) / x_(k))` over the `k` largest values,
/// where `x_(k)` is the `(k+1)`-th largest. Non-positive values are ignored.
pub fn hill_estimate(values: &[f64], fraction: f64) -> Option<f64> {
    let mut xs: Vec<f64> = values.iter().copied().filter(|&x| x > 0.0).collect();
    let k = (xs.len() as f64 * fraction).floor() as usize;
    if k < 2 || k >= xs.len() {
        return None;
    }
    xs.sort_by(|a, b| b.total_cmp(a));
    let threshold = xs[k];
    let s = compensated_sum(xs[..k].iter().map(|x| (x / threshold).ln()));
    (s > 0.0).then(|| k as f64 / s)
}

/// How integer-valued data are spread to a continuum before tail estimation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuize {
    /// Values produced by flooring a continuous draw: add `U[0, 1)`.
    Floored,
    /// Counts: add `U[-1/2, 1/2)`.
    Centered,
}

/// Adds mean-preserving uniform jitter to integer data.
pub fn continuize(values: &[usize], mode: Continuize, rng: &mut StreamRng) -> Vec<f64> {
    let offset = match mode {
        Continuize::Floored => 0.0,
        Continuize::Centered => -0.5,
    };
    values
        .iter()
        .map(|&v| v as f64 + offset + rng.gen::<f64>())
        .collect()
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub critical: f64,
    /// True when the samples are consistent at the chosen level.
    pub accepted: bool,
}

/// `c(α)` for α = 0.01 in the large-sample critical value `c(α) sqrt((n+m)/(nm))`.
pub const KS_C_ONE_PERCENT: f64 = 1.627_6;

/// Two-sample KS test at the 1% level.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical = KS_C_ONE_PERCENT * (((n + m) as f64) / ((n * m) as f64)).sqrt();
    KsTest {
        statistic: d,
        critical,
        accepted: d <= critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn summaries() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let se = std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hill_on_exact_pareto() {
        let mut r = rng::stream(3, "hill");
        let xs: Vec<f64> = (0..200_000)
            .map(|_| rng::open_closed01(&mut r).powf(-1.0 / 2.5))
            .collect();
        let h = hill_estimate(&xs, HILL_FRACTION).unwrap();
        assert!((h - 2.5).abs() < 0.08, "{h}");
        assert!(hill_estimate(&[1.0, 2.0], 0.05).is_none());
    }

    #[test]
    fn ks_statistic() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(t.statistic, 0.0);
        assert!(t.accepted);
        let t = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(t.statistic, 1.0);
        let t = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]);
        assert_eq!(t.statistic, 0.5);
    }
}
