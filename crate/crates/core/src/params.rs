//! Closed-form scheme quantities.
//!
//! Everything here is a pure function of the number of databases `n`, the
//! number of files `k`, and either the deception target `d` or the
//! deception strength `eps`. Internally the scheme is parametrized by
//! `exp_eps = e^eps`, which avoids an `exp(ln(x))` round trip whenever the
//! caller starts from `d`.

use serde::Serialize;

use crate::error::{DirError, Result};
use crate::pmf;

/// `n^k` is rejected above this value.
pub const MAX_POWER: u128 = 1 << 63;

/// Snap distance used when deciding whether `1/alpha` is an integer.
pub const SNAP_TOLERANCE: f64 = 1e-9;

fn validate_dimensions(n: usize, k: usize) -> Result<()> {
    if n < 2 || k < 2 {
        return Err(DirError::InvalidDimensions { n, k });
    }
    Ok(())
}

/// `n^k` computed in 128-bit arithmetic, rejected when it exceeds 2^63.
pub fn checked_power(n: usize, k: usize) -> Result<u64> {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc = acc
            .checked_mul(n as u128)
            .filter(|v| *v <= MAX_POWER)
            .ok_or(DirError::PowerOverflow { n, k })?;
    }
    Ok(acc as u64)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The deception bound `(k-1)(n-1) / (k(n^k-n))` as a reduced fraction.
pub fn deception_capacity_fraction(n: usize, k: usize) -> Result<(u128, u128)> {
    validate_dimensions(n, k)?;
    let nk = checked_power(n, k)? as u128;
    let num = (k as u128 - 1) * (n as u128 - 1);
    let den = k as u128 * (nk - n as u128);
    let g = gcd(num, den);
    Ok((num / g, den / g))
}

/// Supremum of achievable deception, `d_max = (k-1)(n-1) / (k(n^k-n))`.
pub fn deception_capacity(n: usize, k: usize) -> Result<f64> {
    validate_dimensions(n, k)?;
    let nk = checked_power(n, k)? as f64;
    let (n, k) = (n as f64, k as f64);
    Ok((k - 1.0) * (n - 1.0) / (k * (nk - n)))
}

/// The PIR capacity `(1 - 1/n) / (1 - 1/n^k)`, which is the rate at `d = 0`.
pub fn pir_capacity(n: usize, k: usize) -> Result<f64> {
    validate_dimensions(n, k)?;
    let nk = checked_power(n, k)? as f64;
    let n = n as f64;
    Ok((1.0 - 1.0 / n) / (1.0 - 1.0 / nk))
}

fn out_of_range(n: usize, k: usize, d: f64) -> DirError {
    let (bound_num, bound_den) = deception_capacity_fraction(n, k).unwrap_or((0, 1));
    DirError::DeceptionOutOfRange {
        d,
        n,
        k,
        bound_num,
        bound_den,
        d_max: bound_num as f64 / bound_den as f64,
    }
}

fn exp_eps_from_deception(n: usize, k: usize, d: f64) -> Result<f64> {
    let d_max = deception_capacity(n, k)?;
    if !d.is_finite() || !(0.0..d_max).contains(&d) {
        return Err(out_of_range(n, k, d));
    }
    let nk = checked_power(n, k)? as f64;
    let (nf, kf) = (n as f64, k as f64);
    let base = d * kf * nf + (kf - 1.0) * (nf - 1.0);
    let den = base - d * kf * nk;
    if den <= 0.0 {
        // d is below d_max but so close that the denominator rounds away.
        return Err(out_of_range(n, k, d));
    }
    Ok(base / den)
}

fn validate_epsilon(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(DirError::InvalidEpsilon(eps));
    }
    Ok(())
}

/// `eps` needed to reach deception `d`; requires `0 <= d < d_max`.
pub fn epsilon_from_deception(n: usize, k: usize, d: f64) -> Result<f64> {
    Ok(exp_eps_from_deception(n, k, d)?.ln())
}

/// Deception `D = (k-1)(n-1)(e^eps - 1) / (k(n + (n^k-n)e^eps))`.
pub fn deception_from_epsilon(n: usize, k: usize, eps: f64) -> Result<f64> {
    validate_dimensions(n, k)?;
    validate_epsilon(eps)?;
    let nk = checked_power(n, k)? as f64;
    Ok(deception_of(n as f64, k as f64, nk, eps.exp()))
}

/// Probability that a received query is real, as a function of `eps`.
pub fn alpha_from_epsilon(n: usize, k: usize, eps: f64) -> Result<f64> {
    validate_dimensions(n, k)?;
    validate_epsilon(eps)?;
    let nk = checked_power(n, k)? as f64;
    Ok(alpha_of(n as f64, nk, eps.exp()))
}

// Written with 1/e factored out so that very large e^eps stays finite.
fn deception_of(n: f64, k: f64, nk: f64, e: f64) -> f64 {
    (k - 1.0) * (n - 1.0) * (1.0 - 1.0 / e) / (k * (n / e + (nk - n)))
}

fn alpha_of(n: f64, nk: f64, e: f64) -> f64 {
    (n + (nk - n) * e) / ((n - 1.0) * e * e + (nk - n) * e + 1.0)
}

fn base_probability_of(n: f64, nk: f64, e: f64) -> f64 {
    1.0 / (n + (nk - n) * e)
}

fn error_probability_of(n: f64, k: f64, nk: f64, e: f64) -> f64 {
    (k - 1.0) * (1.0 + e * (nk - 1.0)) / (k * (n + (nk - n) * e))
}

/// `u = floor(1/alpha)`, snapped to the nearest integer when `1/alpha` is
/// within [`SNAP_TOLERANCE`] of one.
pub fn support_locator(alpha: f64) -> u64 {
    let inv = 1.0 / alpha;
    let nearest = inv.round();
    if (inv - nearest).abs() < SNAP_TOLERANCE {
        nearest as u64
    } else {
        inv.floor() as u64
    }
}

/// A validated parameter point `(n, k, d)` with every derived quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeParams {
    n_databases: usize,
    n_files: usize,
    n_pow_k: u64,
    deception: f64,
    eps: f64,
    exp_eps: f64,
    p_base: f64,
    alpha: f64,
    u: u64,
}

impl SchemeParams {
    /// Parameters reaching deception `d` with `n` databases and `k` files.
    pub fn new(n_databases: usize, n_files: usize, deception: f64) -> Result<Self> {
        validate_dimensions(n_databases, n_files)?;
        let exp_eps = exp_eps_from_deception(n_databases, n_files, deception)?;
        Self::assemble(n_databases, n_files, exp_eps, Some(deception))
    }

    /// Parameters for a given deception strength `eps` (nats).
    pub fn from_epsilon(n_databases: usize, n_files: usize, eps: f64) -> Result<Self> {
        validate_dimensions(n_databases, n_files)?;
        validate_epsilon(eps)?;
        Self::assemble(n_databases, n_files, eps.exp(), None)
    }

    fn assemble(
        n_databases: usize,
        n_files: usize,
        exp_eps: f64,
        deception: Option<f64>,
    ) -> Result<Self> {
        let n_pow_k = checked_power(n_databases, n_files)?;
        let (n, k, nk) = (n_databases as f64, n_files as f64, n_pow_k as f64);
        let alpha = alpha_of(n, nk, exp_eps);
        Ok(Self {
            n_databases,
            n_files,
            n_pow_k,
            deception: deception.unwrap_or_else(|| deception_of(n, k, nk, exp_eps)),
            eps: exp_eps.ln(),
            exp_eps,
            p_base: base_probability_of(n, nk, exp_eps),
            alpha,
            u: support_locator(alpha),
        })
    }

    pub fn n_databases(&self) -> usize {
        self.n_databases
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    /// Number of distinct queries a single database can receive, `n^k`.
    pub fn n_pow_k(&self) -> u64 {
        self.n_pow_k
    }

    /// Number of segments each file is split into, `n - 1`.
    pub fn n_segments(&self) -> usize {
        self.n_databases - 1
    }

    pub fn deception(&self) -> f64 {
        self.deception
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn exp_eps(&self) -> f64 {
        self.exp_eps
    }

    /// Probability `p` of each of the `n` base rows of a real query table.
    pub fn p_base(&self) -> f64 {
        self.p_base
    }

    /// Probability `p e^eps` of each of the `n^k - n` boosted rows.
    pub fn p_boosted(&self) -> f64 {
        self.p_base * self.exp_eps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn d_max(&self) -> f64 {
        let (n, k, nk) = (
            self.n_databases as f64,
            self.n_files as f64,
            self.n_pow_k as f64,
        );
        (k - 1.0) * (n - 1.0) / (k * (nk - n))
    }

    /// Minimum expected number of dummy queries per retrieval.
    pub fn expected_dummies(&self) -> f64 {
        pmf::lemma_expected_dummies(self.alpha)
    }
}

/// MAP prediction error probability of each database at real-query times.
pub fn error_probability(params: &SchemeParams) -> f64 {
    error_probability_of(
        params.n_databases as f64,
        params.n_files as f64,
        params.n_pow_k as f64,
        params.exp_eps,
    )
}

/// Per-row real download cost in the closed form used for the rate:
/// `(1 + (n^k-n)/(n-1) e^eps) / (1 + (n^(k-1)-1) e^eps)`.
pub fn real_download_cost(params: &SchemeParams) -> f64 {
    let (n, nk, e) = (
        params.n_databases as f64,
        params.n_pow_k as f64,
        params.exp_eps,
    );
    (1.0 + (nk - n) / (n - 1.0) * e) / (1.0 + (nk / n - 1.0) * e)
}

/// Normalized download cost `D_L = n/(n-1) (1 - p + E[M])`.
pub fn download_cost(params: &SchemeParams, expected_m: f64) -> Result<f64> {
    if expected_m.is_nan() || expected_m < 0.0 {
        return Err(DirError::NegativeExpectedDummies(expected_m));
    }
    let n = params.n_databases as f64;
    let cost = n / (n - 1.0) * (1.0 - params.p_base + expected_m);
    debug_assert!({
        let other = real_download_cost(params) + n / (n - 1.0) * expected_m;
        (cost - other).abs() <= 1e-12 * cost.max(1.0)
    });
    Ok(cost)
}

/// Achievable rate at deception `d`, with the optimal dummy-count pmf.
pub fn achievable_rate(n: usize, k: usize, d: f64) -> Result<f64> {
    let params = SchemeParams::new(n, k, d)?;
    Ok(rate_of(&params))
}

/// Rate `1/D_L` for already-built parameters.
pub fn rate_of(params: &SchemeParams) -> f64 {
    let n = params.n_databases as f64;
    1.0 / (real_download_cost(params) + n / (n - 1.0) * params.expected_dummies())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn capacity_examples() {
        assert!(close(deception_capacity(2, 2).unwrap(), 0.25, 1e-15));
        assert!(close(deception_capacity(3, 3).unwrap(), 1.0 / 18.0, 1e-15));
        assert!(close(deception_capacity(2, 3).unwrap(), 1.0 / 9.0, 1e-15));
        assert_eq!(deception_capacity_fraction(2, 2).unwrap(), (1, 4));
        assert_eq!(deception_capacity_fraction(3, 3).unwrap(), (1, 18));
        assert!(matches!(
            deception_capacity(1, 3),
            Err(DirError::InvalidDimensions { .. })
        ));
        assert!(deception_capacity(3, 1).is_err());
    }

    #[test]
    fn power_overflow_is_rejected() {
        assert_eq!(checked_power(2, 63).unwrap(), 1 << 63);
        assert!(matches!(
            checked_power(2, 64),
            Err(DirError::PowerOverflow { .. })
        ));
        assert!(checked_power(10, 19).is_err());
        assert!(SchemeParams::new(2, 70, 0.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_from_deception(2, 2, 0.0).unwrap(), 0.0);
        let e1 = epsilon_from_deception(2, 2, 0.1).unwrap();
        assert!(close(e1, (7.0f64 / 3.0).ln(), 1e-12));
        assert!(close(e1, 0.847298, 1e-6));
        // Two databases, two files: ln((4d+1)/(1-4d)).
        assert!(close(e1, (1.4f64 / 0.6).ln(), 1e-12));

        let e2 = epsilon_from_deception(3, 3, 0.03).unwrap();
        let special = ((9.0f64 * 0.03 + 4.0) / (4.0 * (1.0 - 18.0 * 0.03))).ln();
        assert!(close(e2, special, 1e-12));
        assert!(close(e2, (4.27f64 / 1.84).ln(), 1e-12));
        assert!(close(e2, 0.841848, 1e-6));
    }

    #[test]
    fn deception_range_is_enforced() {
        assert!(epsilon_from_deception(2, 2, 0.25).is_err());
        assert!(epsilon_from_deception(2, 2, -0.01).is_err());
        assert!(epsilon_from_deception(2, 2, f64::NAN).is_err());
        assert!(epsilon_from_deception(2, 2, 0.25 * (1.0 - 1e-9)).is_ok());
        let msg = SchemeParams::new(2, 2, 0.3).unwrap_err().to_string();
        assert!(msg.contains("1/4"), "{msg}");
        assert!(!msg.contains('\n'));
    }

    #[test]
    fn deception_from_epsilon_examples() {
        assert_eq!(deception_from_epsilon(4, 3, 0.0).unwrap(), 0.0);
        let d = deception_from_epsilon(2, 2, (7.0f64 / 3.0).ln()).unwrap();
        assert!(close(d, 0.1, 1e-12));
        let limit = deception_from_epsilon(3, 3, 60.0).unwrap();
        assert!(close(limit, 1.0 / 18.0, 1e-15));
        assert!(limit <= 1.0 / 18.0);
        assert!(deception_from_epsilon(2, 2, -1.0).is_err());
        assert!(deception_from_epsilon(2, 2, f64::INFINITY).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_epsilon(5, 4, 0.0).unwrap(), 1.0);
        let a = alpha_from_epsilon(2, 2, (7.0f64 / 3.0).ln()).unwrap();
        assert!(close(a, 0.6, 1e-12));
        let e: f64 = 2.320652;
        let a = alpha_from_epsilon(3, 3, e.ln()).unwrap();
        let special = 3.0 * (1.0 + 8.0 * e) / (2.0 * e * e + 24.0 * e + 1.0);
        assert!(close(a, special, 1e-12));
        assert!(close(a, 0.870, 5e-4));
        assert!(alpha_from_epsilon(2, 2, -0.5).is_err());
    }

    #[test]
    fn error_probability_examples() {
        let pir = SchemeParams::new(2, 2, 0.0).unwrap();
        assert!(close(error_probability(&pir), 0.5, 1e-12));
        let ex1 = SchemeParams::from_epsilon(2, 2, (7.0f64 / 3.0).ln()).unwrap();
        assert!(close(error_probability(&ex1), 0.6, 1e-12));
        let pir3 = SchemeParams::new(3, 3, 0.0).unwrap();
        assert!(close(error_probability(&pir3), 2.0 / 3.0, 1e-12));
    }

    #[test]
    fn download_cost_examples() {
        let pir = SchemeParams::new(2, 2, 0.0).unwrap();
        assert!(close(download_cost(&pir, 0.0).unwrap(), 1.5, 1e-12));
        let ex1 = SchemeParams::from_epsilon(2, 2, (7.0f64 / 3.0).ln()).unwrap();
        assert!(close(download_cost(&ex1, 0.8).unwrap(), 3.3, 1e-12));
        let pir3 = SchemeParams::new(3, 3, 0.0).unwrap();
        assert!(close(download_cost(&pir3, 0.0).unwrap(), 13.0 / 9.0, 1e-12));
        assert!(download_cost(&pir, -0.1).is_err());
        assert!(download_cost(&pir, f64::NAN).is_err());
    }

    #[test]
    fn rate_examples() {
        assert!(close(achievable_rate(2, 2, 0.0).unwrap(), 2.0 / 3.0, 1e-12));
        assert!(close(
            achievable_rate(3, 3, 0.0).unwrap(),
            9.0 / 13.0,
            1e-12
        ));
        assert!(close(
            achievable_rate(2, 2, 0.1).unwrap(),
            10.0 / 33.0,
            1e-12
        ));
        assert!(achievable_rate(2, 2, 0.25).is_err());
    }

    #[test]
    fn zero_deception_degenerates() {
        for n in 2..=6 {
            for k in 2..=6 {
                let p = SchemeParams::new(n, k, 0.0).unwrap();
                assert_eq!(p.eps(), 0.0);
                assert_eq!(p.alpha(), 1.0);
                assert_eq!(p.u(), 1);
                assert!(close(error_probability(&p), 1.0 - 1.0 / k as f64, 1e-12));
            }
        }
    }

    #[test]
    fn support_locator_snaps() {
        assert_eq!(support_locator(1.0), 1);
        assert_eq!(support_locator(1.0 - 1e-12), 1);
        assert_eq!(support_locator(1.0 / 3.0), 3);
        assert_eq!(support_locator(0.3), 3);
        assert_eq!(support_locator(0.6), 1);
        assert_eq!(support_locator(0.5 - 1e-6), 2);
    }
}
