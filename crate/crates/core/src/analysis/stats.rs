//! Small statistical helpers shared by the experiments.

use rand::Rng;
use rayon::prelude::*;

use crate::rng::stream;

/// Bootstrap standard error of `statistic` over replica indices. Each
/// resample draws `replicas` indices with replacement from its own stream,
/// so the result does not depend on thread scheduling.
pub fn bootstrap_se<F>(replicas: usize, resamples: usize, seed: u64, statistic: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    if replicas == 0 || resamples < 2 {
        return f64::NAN;
    }
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, &[b as u64]);
            let idx: Vec<usize> = (0..replicas).map(|_| rng.random_range(0..replicas)).collect();
            statistic(&idx)
        })
        .collect();
    sample_sd(&values)
}

pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Whether `next` fails to exceed `prev` by more than `z` combined standard
/// errors.
pub fn nonincreasing_within(prev: (f64, f64), next: (f64, f64), z: f64) -> bool {
    next.0 - prev.0 <= z * (prev.1.powi(2) + next.1.powi(2)).sqrt()
}

/// Whether the intervals `x ± z·se` overlap.
pub fn intervals_overlap(a: (f64, f64), b: (f64, f64), z: f64) -> bool {
    (a.0 - b.0).abs() <= z * (a.1 + b.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (1..5).map(|i| (f64::from(i), 3.0 - 2.0 * f64::from(i))).collect();
        assert!((ols_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(ols_slope(&pts[..1]), None);
    }

    #[test]
    fn bootstrap_of_the_mean() {
        let data: Vec<f64> = (0..400).map(|i| f64::from(i % 2)).collect();
        let se = bootstrap_se(data.len(), 400, 5, |idx| idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        // sd 0.5 / sqrt(400)
        assert!((se - 0.025).abs() < 0.004, "{se}");
        assert_eq!(se, bootstrap_se(data.len(), 400, 5, |idx| idx.iter().map(|&i| data[i]).sum::<f64>() / 400.0));
    }

    #[test]
    fn trend_and_overlap() {
        assert!(nonincreasing_within((1.0, 0.1), (1.2, 0.1), 2.0));
        assert!(!nonincreasing_within((1.0, 0.1), (1.3, 0.1), 2.0));
        assert!(intervals_overlap((1.0, 0.1), (1.4, 0.1), 2.0));
        assert!(!intervals_overlap((1.0, 0.1), (1.5, 0.1), 2.0));
    }
}
