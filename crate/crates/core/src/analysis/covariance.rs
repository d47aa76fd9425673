use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ParticleState;
use crate::wealth::Wealth;

/// A covariance estimate with its jackknife standard error. The error is
/// `None` when too few replicas remain after deleting one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub replicas: usize,
}

/// `f(p) = 1` if `p` is alive with wealth above `threshold`, else `0`.
pub fn indicator_above(threshold: Wealth) -> impl Fn(&ParticleState) -> f64 + Copy {
    move |p| if p.alive && p.wealth > threshold { 1.0 } else { 0.0 }
}

fn jackknife_se(leave_one_out: &[f64]) -> Option<f64> {
    let n = leave_one_out.len() as f64;
    if leave_one_out.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mean = leave_one_out.iter().sum::<f64>() / n;
    let ss: f64 = leave_one_out.iter().map(|c| (c - mean).powi(2)).sum();
    Some(((n - 1.0) / n * ss).sqrt())
}

/// Unbiased sample covariance of `(x_r, y_r)` across replicas.
pub fn pair_covariance(pairs: &[(f64, f64)]) -> Result<CovarianceEstimate> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::Usage(format!("covariance needs at least 2 replicas, got {n}")));
    }
    // shifting by the first pair changes nothing but makes constant data
    // cancel exactly
    let (x0, y0) = pairs[0];
    let shifted: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x - x0, y - y0)).collect();
    let (sx, sy, sxy) = shifted.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(x, y)| (a + x, b + y, c + x * y));
    let cov = |sx: f64, sy: f64, sxy: f64, n: f64| (sxy - sx * sy / n) / (n - 1.0);
    let nf = n as f64;
    let estimate = cov(sx, sy, sxy, nf);
    let stderr = if n >= 3 {
        let loo: Vec<f64> = shifted.iter().map(|&(x, y)| cov(sx - x, sy - y, sxy - x * y, nf - 1.0)).collect();
        jackknife_se(&loo)
    } else {
        None
    };
    Ok(CovarianceEstimate { estimate, stderr, replicas: n })
}

/// Covariance of `f` at two distinct particles of an exchangeable system,
/// using every ordered pair in each replica.
///
/// `values[r][i]` is `f` at particle `i` of replica `r`. With `s_r` the
/// replica mean and `g_r` the mean of `f_i f_j` over `i ≠ j`, the estimator
/// `mean(g) − mean(s)² + var(s) / R` is unbiased for `Cov(f_1, f_2)`.
pub fn exchangeable_covariance(values: &[Vec<f64>]) -> Result<CovarianceEstimate> {
    let r = values.len();
    if r < 2 {
        return Err(Error::Usage(format!("covariance needs at least 2 replicas, got {r}")));
    }
    let n = values[0].len();
    if n < 2 || values.iter().any(|v| v.len() != n) {
        return Err(Error::Usage("every replica needs the same particle count, at least 2".into()));
    }
    let nf = n as f64;
    let per_replica: Vec<(f64, f64)> = values
        .iter()
        .map(|v| {
            let s: f64 = v.iter().sum();
            let q: f64 = v.iter().map(|x| x * x).sum();
            ((s * s - q) / (nf * (nf - 1.0)), s / nf)
        })
        .collect();
    let (sg, ss, sss) = per_replica.iter().fold((0.0, 0.0, 0.0), |(a, b, c), &(g, s)| (a + g, b + s, c + s * s));
    let est = |sg: f64, ss: f64, sss: f64, r: f64| {
        let mean_s = ss / r;
        let var_s = (sss - ss * mean_s) / (r - 1.0);
        sg / r - mean_s * mean_s + var_s / r
    };
    let rf = r as f64;
    let estimate = est(sg, ss, sss, rf);
    let stderr = if r >= 3 {
        let loo: Vec<f64> = per_replica.iter().map(|&(g, s)| est(sg - g, ss - s, sss - s * s, rf - 1.0)).collect();
        jackknife_se(&loo)
    } else {
        None
    };
    Ok(CovarianceEstimate { estimate, stderr, replicas: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn constant_data_is_exactly_zero() {
        let c = pair_covariance(&[(0.1, 0.7); 10]).unwrap();
        assert_eq!(c.estimate, 0.0);
        assert_eq!(c.stderr, Some(0.0));
        let e = exchangeable_covariance(&vec![vec![1.0; 5]; 4]).unwrap();
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn too_few_replicas() {
        assert!(matches!(pair_covariance(&[(1.0, 2.0)]), Err(Error::Usage(_))));
        assert_eq!(pair_covariance(&[(0.0, 0.0), (1.0, 1.0)]).unwrap().stderr, None);
        assert!(exchangeable_covariance(&[vec![1.0, 0.0]]).is_err());
        assert!(exchangeable_covariance(&[vec![1.0], vec![0.0]]).is_err());
    }

    #[test]
    fn small_case_by_hand() {
        // x = (0, 1, 2), y = (0, 2, 1): means 1, 1; cross products sum 1
        let c = pair_covariance(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).unwrap();
        assert!((c.estimate - 0.5).abs() < 1e-15);
        // leave-one-out covariances are -1/2, 1, 1: mean 1/2, jackknife
        // variance (2/3)(1 + 1/4 + 1/4) = 1
        assert!((c.stderr.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_replicas_give_zero_within_three_se() {
        let mut rng = stream(17, &[]);
        let pairs: Vec<(f64, f64)> =
            (0..4000).map(|_| (f64::from(rng.random_bool(0.3) as u8), f64::from(rng.random_bool(0.6) as u8))).collect();
        let c = pair_covariance(&pairs).unwrap();
        assert!(c.estimate.abs() < 3.0 * c.stderr.unwrap(), "{c:?}");
    }

    #[test]
    fn identical_coordinates_give_bernoulli_variance() {
        let p = 0.3;
        let mut rng = stream(18, &[]);
        let pairs: Vec<(f64, f64)> = (0..20000)
            .map(|_| {
                let x = f64::from(rng.random_bool(p) as u8);
                (x, x)
            })
            .collect();
        let c = pair_covariance(&pairs).unwrap();
        assert!((c.estimate - p * (1.0 - p)).abs() < 3.0 * c.stderr.unwrap(), "{c:?}");
    }

    #[test]
    fn exchangeable_estimator_recovers_a_shared_factor() {
        // f_i = 1{U_i < P} with P drawn once per replica from {0.2, 0.6}:
        // Cov(f_1, f_2) = Var(P) = 0.04
        let mut rng = stream(19, &[]);
        let values: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                let p = if rng.random_bool(0.5) { 0.2 } else { 0.6 };
                (0..10).map(|_| f64::from(rng.random_bool(p) as u8)).collect()
            })
            .collect();
        let c = exchangeable_covariance(&values).unwrap();
        assert!((c.estimate - 0.04).abs() < 3.0 * c.stderr.unwrap(), "{c:?}");

        let independent: Vec<Vec<f64>> =
            (0..4000).map(|_| (0..10).map(|_| f64::from(rng.random_bool(0.4) as u8)).collect()).collect();
        let c = exchangeable_covariance(&independent).unwrap();
        assert!(c.estimate.abs() < 3.0 * c.stderr.unwrap(), "{c:?}");
    }

    #[test]
    fn indicator() {
        let f = indicator_above(Wealth::from_ticks(2));
        let mut p = ParticleState::new(0, Wealth::from_ticks(3), 0);
        assert_eq!(f(&p), 1.0);
        p.wealth = Wealth::from_ticks(2);
        assert_eq!(f(&p), 0.0);
        p.wealth = Wealth::from_ticks(5);
        p.alive = false;
        assert_eq!(f(&p), 0.0);
    }
}
