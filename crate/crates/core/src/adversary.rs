//! The databases' MAP predictor of the required file index.
//!
//! Priors are uniform, so the posterior is the normalized likelihood
//! vector. Ties (within a relative 1e-9) are broken by a uniform draw.

use rand::Rng;
use serde::Serialize;

use crate::codebook::{OverallDistribution, Query};
use crate::error::{DirError, Result};

pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub predicted_file: usize,
    pub posterior: Vec<f64>,
    pub was_tie: bool,
}

/// `P(theta = k | Q_n = q)` for `k = 1..=K`.
pub fn posterior(dist: &OverallDistribution, q: &Query) -> Result<Vec<f64>> {
    let likelihoods = dist.likelihoods(q)?;
    let total: f64 = likelihoods.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(DirError::ZeroProbability(q.to_string()));
    }
    Ok(likelihoods.into_iter().map(|l| l / total).collect())
}

/// 1-based files whose posterior is within the tie tolerance of the max.
pub fn maximizers(posterior: &[f64]) -> Vec<usize> {
    let max = posterior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    posterior
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= max - TIE_TOLERANCE * max.abs())
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn predict<R: Rng + ?Sized>(
    dist: &OverallDistribution,
    q: &Query,
    rng: &mut R,
) -> Result<Prediction> {
    let posterior = posterior(dist, q)?;
    let ties = maximizers(&posterior);
    let predicted_file = if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    };
    Ok(Prediction {
        predicted_file,
        posterior,
        was_tie: ties.len() > 1,
    })
}

/// Expected error of the MAP predictor at real-query times, computed
/// exactly from the distribution instead of by sampling:
/// `sum_q sum_theta (1/K) P(q | theta, R=1) P(prediction != theta | q)`.
pub fn analytic_error_probability(dist: &OverallDistribution) -> Result<f64> {
    let k = dist.params().n_files();
    let mut total = 0.0;
    for q in dist.queries() {
        let ties = maximizers(&posterior(dist, &q)?);
        let hit = 1.0 / ties.len() as f64;
        for theta in 1..=k {
            let wrong = if ties.contains(&theta) {
                1.0 - hit
            } else {
                1.0
            };
            total += dist.real_probability(&q, theta)? * wrong / k as f64;
        }
    }
    Ok(total)
}

/// Predictor with the tie set of every query precomputed, for hot loops.
#[derive(Debug, Clone)]
pub struct Adversary {
    n_databases: usize,
    ties: Vec<Vec<usize>>,
}

impl Adversary {
    pub fn new(dist: &OverallDistribution) -> Result<Self> {
        let ties = dist
            .queries()
            .map(|q| posterior(dist, &q).map(|p| maximizers(&p)))
            .collect::<Result<_>>()?;
        Ok(Self {
            n_databases: dist.params().n_databases(),
            ties,
        })
    }

    /// Predicted file for `q`. The query must match the distribution's
    /// `(n, k)`; that is checked when the predictor is first built from it.
    pub fn predict<R: Rng + ?Sized>(&self, q: &Query, rng: &mut R) -> usize {
        let ties = &self.ties[q.index(self.n_databases) as usize];
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.random_range(0..ties.len())]
        }
    }

    pub fn ties(&self, q: &Query) -> &[usize] {
        &self.ties[q.index(self.n_databases) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::overall_distribution;
    use crate::params::SchemeParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn posterior_examples() {
        let p = SchemeParams::new(2, 2, 0.1).unwrap();
        let dist = overall_distribution(&p).unwrap();
        let post = posterior(&dist, &Query::single(2, 1, 1)).unwrap();
        assert!((post[0] - 0.7).abs() < 1e-12 && (post[1] - 0.3).abs() < 1e-12);
        assert!((post[0] / post[1] - p.exp_eps()).abs() < 1e-12);
        let phi = posterior(&dist, &Query::null(2)).unwrap();
        assert!(phi.iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn deceptive_queries_are_deterministic() {
        let p = SchemeParams::new(3, 3, 0.03).unwrap();
        let dist = overall_distribution(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pred = predict(&dist, &Query::single(3, 2, 1), &mut rng).unwrap();
        assert_eq!(pred.predicted_file, 2);
        assert!(!pred.was_tie);
        assert!((pred.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_query_predictions_are_uniform() {
        let p = SchemeParams::new(3, 3, 0.03).unwrap();
        let dist = overall_distribution(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let pred = predict(&dist, &Query::null(3), &mut rng).unwrap();
            assert!(pred.was_tie);
            counts[pred.predicted_file - 1] += 1;
        }
        let sigma = (1.0 / 3.0 * (2.0 / 3.0) / n as f64).sqrt();
        for c in counts {
            assert!(
                (c as f64 / n as f64 - 1.0 / 3.0).abs() < 3.0 * sigma,
                "{counts:?}"
            );
        }
    }

    #[test]
    fn zero_epsilon_ties_everything() {
        let p = SchemeParams::new(2, 3, 0.0).unwrap();
        let dist = overall_distribution(&p).unwrap();
        for q in dist.queries() {
            assert_eq!(maximizers(&posterior(&dist, &q).unwrap()), vec![1, 2, 3]);
        }
    }

    #[test]
    fn analytic_error_matches_closed_form() {
        for (n, k, d) in [
            (2, 2, 0.0),
            (2, 2, 0.1),
            (3, 3, 0.03),
            (2, 3, 0.07),
            (4, 2, 0.1),
        ] {
            let p = SchemeParams::new(n, k, d).unwrap();
            let dist = overall_distribution(&p).unwrap();
            let exact = analytic_error_probability(&dist).unwrap();
            assert!(
                (exact - crate::params::error_probability(&p)).abs() < 1e-10,
                "{n} {k} {d}"
            );
        }
    }

    #[test]
    fn cached_predictor_agrees() {
        let p = SchemeParams::new(3, 2, 0.1).unwrap();
        let dist = overall_distribution(&p).unwrap();
        let adv = Adversary::new(&dist).unwrap();
        for q in dist.queries() {
            assert_eq!(adv.ties(&q), maximizers(&posterior(&dist, &q).unwrap()));
        }
    }
}
