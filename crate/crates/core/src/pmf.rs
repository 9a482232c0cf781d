//! Distribution of the number of dummy queries sent per retrieval.
//!
//! The user must hit `E[1/(M+1)] = alpha` exactly (that is what the
//! databases believe about the real/dummy mix) while keeping `E[M]` as small
//! as possible. The optimum puts all mass on the two integers around
//! `1/alpha - 1`.

use rand::Rng;
use serde::Serialize;

use crate::error::{DirError, Result};
use crate::params::{support_locator, SNAP_TOLERANCE};

/// A finite pmf over the dummy count `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DummyCountPmf {
    support: Vec<(u64, f64)>,
    mean: f64,
    harmonic: f64,
}

impl DummyCountPmf {
    /// Builds a pmf from `(m, prob)` points, dropping zero-mass points and
    /// sorting by `m`. Probabilities must be non-negative and sum to one.
    pub fn from_points(points: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut support: Vec<(u64, f64)> = points.into_iter().filter(|(_, p)| *p != 0.0).collect();
        support.sort_by_key(|(m, _)| *m);
        if support.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(DirError::InvalidArgument(
                "pmf probabilities must be finite and non-negative".into(),
            ));
        }
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(DirError::InvalidArgument(
                "pmf support points must be distinct".into(),
            ));
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DirError::InvalidArgument(format!(
                "pmf probabilities sum to {total}, not 1"
            )));
        }
        let mean = support.iter().map(|&(m, p)| m as f64 * p).sum();
        let harmonic = support.iter().map(|&(m, p)| p / (m as f64 + 1.0)).sum();
        Ok(Self {
            support,
            mean,
            harmonic,
        })
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    /// `E[M]`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E[1/(M+1)]`.
    pub fn harmonic(&self) -> f64 {
        self.harmonic
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        for &(m, p) in &self.support {
            acc += p;
            if draw < acc {
                return m;
            }
        }
        // Cumulative sum fell a few ulps short of 1.
        self.support.last().map_or(0, |(m, _)| *m)
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DirError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Closed-form minimum `E[M] = 2u - u(u+1) alpha`, `u = floor(1/alpha)`.
pub fn lemma_expected_dummies(alpha: f64) -> f64 {
    let u = support_locator(alpha) as f64;
    2.0 * u - u * (u + 1.0) * alpha
}

/// The pmf minimizing `E[M]` subject to `E[1/(M+1)] = alpha`.
///
/// Support is `{u-1, u}` with `p_u = (u+1)(1 - u alpha)` and
/// `p_{u-1} = u((u+1) alpha - 1)`. When `1/alpha` is an integer (within the
/// snap tolerance) both neighbouring supports tie and the single point
/// `1/alpha - 1` is returned.
pub fn optimal_dummy_pmf(alpha: f64) -> Result<DummyCountPmf> {
    validate_alpha(alpha)?;
    let u = support_locator(alpha);
    let inv = 1.0 / alpha;
    if (inv - inv.round()).abs() < SNAP_TOLERANCE {
        return DummyCountPmf::from_points([(u - 1, 1.0)]);
    }
    let uf = u as f64;
    let top = (uf + 1.0) * (1.0 - uf * alpha);
    let below = uf * ((uf + 1.0) * alpha - 1.0);
    DummyCountPmf::from_points([(u - 1, below), (u, top)])
}

/// Smallest `max_support` accepted by [`brute_force_min_mean`].
pub fn minimum_oracle_support(alpha: f64) -> u64 {
    (1.0 / alpha).ceil() as u64 + 2
}

/// Default oracle search width, `2 ceil(1/alpha) + 4`.
pub fn default_oracle_support(alpha: f64) -> u64 {
    2 * (1.0 / alpha).ceil() as u64 + 4
}

/// Exhaustive search over every one- and two-point support in
/// `0..=max_support` for the feasible pmf with minimal mean.
///
/// Two equality constraints over non-negative variables have vertex
/// solutions with at most two non-zero entries, so this covers every
/// candidate optimum without assuming the two points are adjacent.
pub fn brute_force_min_mean(alpha: f64, max_support: u64) -> Result<DummyCountPmf> {
    validate_alpha(alpha)?;
    let required = minimum_oracle_support(alpha);
    if max_support < required {
        return Err(DirError::InsufficientSupport {
            max_support,
            required,
        });
    }

    let mut best: Option<(f64, Vec<(u64, f64)>)> = None;
    let mut consider = |mean: f64, points: Vec<(u64, f64)>| {
        if best.as_ref().is_none_or(|(b, _)| mean < *b) {
            best = Some((mean, points));
        }
    };

    for m in 0..=max_support {
        if (1.0 / (m as f64 + 1.0) - alpha).abs() <= 1e-12 {
            consider(m as f64, vec![(m, 1.0)]);
        }
    }
    for i in 0..=max_support {
        let hi = 1.0 / (i as f64 + 1.0);
        for j in i + 1..=max_support {
            let lo = 1.0 / (j as f64 + 1.0);
            // a*hi + (1-a)*lo = alpha
            let a = (alpha - lo) / (hi - lo);
            let b = 1.0 - a;
            if a < -1e-15 || b < -1e-15 {
                continue;
            }
            let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
            consider(i as f64 * a + j as f64 * b, vec![(i, a), (j, b)]);
        }
    }

    let (_, points) = best.ok_or(DirError::Infeasible { alpha, max_support })?;
    let total: f64 = points.iter().map(|(_, p)| p).sum();
    DummyCountPmf::from_points(points.into_iter().map(|(m, p)| (m, p / total)))
}
