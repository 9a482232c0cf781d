//! Query codebooks: the real and dummy query tables the user draws from,
//! the per-database query distribution the databases know, and validation
//! of the deceptive/PIR classification of every query.
//!
//! A query to one database is a length-`k` vector of coefficients, one per
//! file: `0` means the file is absent, `r` in `1..n` requests segment `r` of
//! it. The answer is the field sum of all requested segments. Queries are
//! ordered lexicographically on this vector, which is also their index as a
//! base-`n` number.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{DirError, Result};
use crate::params::SchemeParams;

/// Default cap on the number of rows of one real query table.
pub const DEFAULT_ROW_LIMIT: u64 = 1_000_000;

/// Relative tolerance for the ratio checks in [`classify_query`].
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// What a single database receives.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Query {
    coefficients: Vec<u32>,
}

impl Query {
    /// The null query: nothing is requested.
    pub fn null(n_files: usize) -> Self {
        Self {
            coefficients: vec![0; n_files],
        }
    }

    /// Segment `segment` of file `file` alone (both 1-based).
    pub fn single(n_files: usize, file: usize, segment: u32) -> Self {
        let mut q = Self::null(n_files);
        q.coefficients[file - 1] = segment;
        q
    }

    /// Builds a query from raw coefficients, checking every entry is a
    /// valid segment index or zero.
    pub fn from_coefficients(coefficients: Vec<u32>, n_segments: usize) -> Result<Self> {
        if let Some(&bad) = coefficients.iter().find(|&&c| c as usize > n_segments) {
            return Err(DirError::SegmentIndex {
                segment: bad as usize,
                n_segments,
            });
        }
        Ok(Self { coefficients })
    }

    /// Inverse of [`Query::index`].
    pub fn from_index(mut index: u64, n_databases: usize, n_files: usize) -> Self {
        let base = n_databases as u64;
        let mut coefficients = vec![0; n_files];
        for slot in coefficients.iter_mut().rev() {
            *slot = (index % base) as u32;
            index /= base;
        }
        Self { coefficients }
    }

    /// Position of this query in the lexicographic order of all `n^k`.
    pub fn index(&self, n_databases: usize) -> u64 {
        self.coefficients
            .iter()
            .fold(0u64, |acc, &c| acc * n_databases as u64 + c as u64)
    }

    pub fn coefficients(&self) -> &[u32] {
        &self.coefficients
    }

    pub fn n_files(&self) -> usize {
        self.coefficients.len()
    }

    /// Requested segment of `file` (1-based), if any.
    pub fn segment_of(&self, file: usize) -> Option<u32> {
        match self.coefficients.get(file.wrapping_sub(1)) {
            Some(&c) if c != 0 => Some(c),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }

    /// Number of files that contribute a segment.
    pub fn weight(&self) -> usize {
        self.coefficients.iter().filter(|&&c| c != 0).count()
    }

    /// `(file, segment)` when exactly one file is requested.
    pub fn single_segment(&self) -> Option<(usize, u32)> {
        if self.weight() != 1 {
            return None;
        }
        self.coefficients
            .iter()
            .enumerate()
            .find(|(_, &c)| c != 0)
            .map(|(i, &c)| (i + 1, c))
    }

    /// Iterates `(file, segment)` over the requested files.
    pub fn terms(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (i + 1, c))
    }

    fn with_segment(&self, file: usize, segment: u32) -> Self {
        let mut q = self.clone();
        q.coefficients[file - 1] = segment;
        q
    }

    fn check_shape(&self, params: &SchemeParams) -> Result<()> {
        if self.n_files() != params.n_files() {
            return Err(DirError::QueryShape {
                found: self.n_files(),
                expected: params.n_files(),
            });
        }
        if let Some(&bad) = self
            .coefficients
            .iter()
            .find(|&&c| c as usize > params.n_segments())
        {
            return Err(DirError::SegmentIndex {
                segment: bad as usize,
                n_segments: params.n_segments(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    /// `phi` for the null query, otherwise e.g. `W1^1+W2^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            return f.write_str("phi");
        }
        for (i, (file, segment)) in self.terms().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "W{file}^{segment}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbClass {
    /// Probability `p`: no interference.
    Base,
    /// Probability `p e^eps`: at least one interfering segment.
    Boosted,
}

impl fmt::Display for ProbClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbClass::Base => "base",
            ProbClass::Boosted => "boosted",
        })
    }
}

/// Anything that assigns one query to each database.
pub trait QuerySet {
    fn per_database(&self) -> &[Query];
}

/// One row of a real query table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RealQueryRow {
    required_file: usize,
    per_database: Vec<Query>,
    prob_class: ProbClass,
}

impl RealQueryRow {
    /// Assembles a row by hand. No decodability check happens here; that is
    /// [`crate::retrieval::decode`]'s job.
    pub fn new(required_file: usize, per_database: Vec<Query>, prob_class: ProbClass) -> Self {
        Self {
            required_file,
            per_database,
            prob_class,
        }
    }

    pub fn required_file(&self) -> usize {
        self.required_file
    }

    pub fn prob_class(&self) -> ProbClass {
        self.prob_class
    }

    pub fn probability(&self, params: &SchemeParams) -> f64 {
        match self.prob_class {
            ProbClass::Base => params.p_base(),
            ProbClass::Boosted => params.p_boosted(),
        }
    }

    /// The row with database assignments rotated by `by` positions.
    pub fn rotated(&self, by: usize) -> Self {
        let mut per_database = self.per_database.clone();
        let len = per_database.len().max(1);
        per_database.rotate_right(by % len);
        Self {
            per_database,
            ..self.clone()
        }
    }
}

impl QuerySet for RealQueryRow {
    fn per_database(&self) -> &[Query] {
        &self.per_database
    }
}

/// One row of a dummy query table: the same single segment to everyone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DummyQueryRow {
    required_file: usize,
    segment: u32,
    per_database: Vec<Query>,
    prob: f64,
}

impl DummyQueryRow {
    pub fn required_file(&self) -> usize {
        self.required_file
    }

    pub fn segment(&self) -> u32 {
        self.segment
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }
}

impl QuerySet for DummyQueryRow {
    fn per_database(&self) -> &[Query] {
        &self.per_database
    }
}

fn check_file(params: &SchemeParams, file: usize) -> Result<()> {
    if file == 0 || file > params.n_files() {
        return Err(DirError::FileIndex {
            file,
            n_files: params.n_files(),
        });
    }
    Ok(())
}

fn check_rows(params: &SchemeParams, limit: u64) -> Result<()> {
    if params.n_pow_k() > limit {
        return Err(DirError::RowLimit {
            rows: params.n_pow_k(),
            limit,
        });
    }
    Ok(())
}

/// Real query table for `file` with the default row limit.
pub fn build_real_table(params: &SchemeParams, file: usize) -> Result<Vec<RealQueryRow>> {
    build_real_table_with_limit(params, file, DEFAULT_ROW_LIMIT)
}

/// Real query table for `file`: `n^k` rows.
///
/// Rows are grouped by interference pattern (every choice, over the other
/// files, of absent or one segment), patterns in lexicographic order, so
/// the `n` base rows come first. Within a pattern, shift `s` sends the
/// interference alone to database `s + 1` and interference plus segment `r`
/// of the required file to the `r`-th database after it, cyclically.
pub fn build_real_table_with_limit(
    params: &SchemeParams,
    file: usize,
    row_limit: u64,
) -> Result<Vec<RealQueryRow>> {
    check_file(params, file)?;
    check_rows(params, row_limit)?;
    let (n, k) = (params.n_databases(), params.n_files());
    let n_patterns = params.n_pow_k() / n as u64;
    let mut rows = Vec::with_capacity(params.n_pow_k() as usize);
    for pattern_index in 0..n_patterns {
        // Digits for the k-1 other files; the required file stays absent.
        let digits = Query::from_index(pattern_index, n, k - 1);
        let mut coefficients = digits.coefficients;
        coefficients.insert(file - 1, 0);
        let pattern = Query { coefficients };
        let prob_class = if pattern.is_null() {
            ProbClass::Base
        } else {
            ProbClass::Boosted
        };
        for shift in 0..n {
            let mut per_database = vec![Query::null(k); n];
            per_database[shift] = pattern.clone();
            for segment in 1..n {
                per_database[(shift + segment) % n] = pattern.with_segment(file, segment as u32);
            }
            rows.push(RealQueryRow {
                required_file: file,
                per_database,
                prob_class,
            });
        }
    }
    Ok(rows)
}

/// Dummy query table for `file`: row `r` sends segment `r` to every
/// database, each row with probability `1/(n-1)`.
pub fn build_dummy_table(params: &SchemeParams, file: usize) -> Result<Vec<DummyQueryRow>> {
    check_file(params, file)?;
    let (n, k) = (params.n_databases(), params.n_files());
    let prob = 1.0 / params.n_segments() as f64;
    Ok((1..n as u32)
        .map(|segment| DummyQueryRow {
            required_file: file,
            segment,
            per_database: vec![Query::single(k, file, segment); n],
            prob,
        })
        .collect())
}

/// Lazily built, cached query tables for one parameter point.
#[derive(Debug)]
pub struct Codebook {
    params: SchemeParams,
    real: Vec<OnceLock<Arc<[RealQueryRow]>>>,
    dummy: Vec<OnceLock<Arc<[DummyQueryRow]>>>,
}

impl Codebook {
    pub fn new(params: SchemeParams) -> Result<Self> {
        Self::with_row_limit(params, DEFAULT_ROW_LIMIT)
    }

    pub fn with_row_limit(params: SchemeParams, row_limit: u64) -> Result<Self> {
        check_rows(&params, row_limit)?;
        let k = params.n_files();
        Ok(Self {
            params,
            real: (0..k).map(|_| OnceLock::new()).collect(),
            dummy: (0..k).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn real_table(&self, file: usize) -> Result<&[RealQueryRow]> {
        check_file(&self.params, file)?;
        let rows = self.real[file - 1].get_or_init(|| {
            build_real_table_with_limit(&self.params, file, u64::MAX)
                .expect("file and size validated")
                .into()
        });
        Ok(rows)
    }

    pub fn dummy_table(&self, file: usize) -> Result<&[DummyQueryRow]> {
        check_file(&self.params, file)?;
        let rows = self.dummy[file - 1].get_or_init(|| {
            build_dummy_table(&self.params, file)
                .expect("file validated")
                .into()
        });
        Ok(rows)
    }
}

/// `P(Q_n = q | theta = k)` for every query and file, split into the
/// real-time and dummy-time components the user knows, plus the
/// `alpha`-mixture the databases know.
#[derive(Debug, Clone, PartialEq)]
pub struct OverallDistribution {
    params: SchemeParams,
    database: usize,
    /// `real[(k-1) * n^k + index]`
    real: Vec<f64>,
    dummy: Vec<f64>,
}

impl OverallDistribution {
    /// Accumulates the distribution seen by `database` (0-based) from the
    /// codebook's tables.
    pub fn from_codebook(codebook: &Codebook, database: usize) -> Result<Self> {
        let params = *codebook.params();
        let (n, k) = (params.n_databases(), params.n_files());
        if database >= n {
            return Err(DirError::InvalidArgument(format!(
                "database {database} outside 0..{n}"
            )));
        }
        let size = params.n_pow_k() as usize;
        let mut real = vec![0.0; k * size];
        let mut dummy = vec![0.0; k * size];
        for file in 1..=k {
            let offset = (file - 1) * size;
            for row in codebook.real_table(file)? {
                let ix = row.per_database[database].index(n) as usize;
                real[offset + ix] += row.probability(&params);
            }
            for row in codebook.dummy_table(file)? {
                let ix = row.per_database[database].index(n) as usize;
                dummy[offset + ix] += row.prob;
            }
        }
        Ok(Self {
            params,
            database,
            real,
            dummy,
        })
    }

    /// Fills the same table from the closed-form per-query probabilities,
    /// without building any query table.
    pub fn analytic(params: &SchemeParams) -> Result<Self> {
        check_rows(params, DEFAULT_ROW_LIMIT)?;
        let (n, k) = (params.n_databases(), params.n_files());
        let size = params.n_pow_k() as usize;
        let mut real = vec![0.0; k * size];
        let mut dummy = vec![0.0; k * size];
        for file in 1..=k {
            let offset = (file - 1) * size;
            for ix in 0..size {
                let q = Query::from_index(ix as u64, n, k);
                real[offset + ix] = match q.single_segment() {
                    Some((owner, _)) if owner == file => params.p_base(),
                    _ if q.is_null() => params.p_base(),
                    _ => params.p_boosted(),
                };
                dummy[offset + ix] = match q.single_segment() {
                    Some((owner, _)) if owner == file => 1.0 / params.n_segments() as f64,
                    _ => 0.0,
                };
            }
        }
        Ok(Self {
            params: *params,
            database: 0,
            real,
            dummy,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn database(&self) -> usize {
        self.database
    }

    fn slot(&self, q: &Query, file: usize) -> Result<usize> {
        q.check_shape(&self.params)?;
        check_file(&self.params, file)?;
        let size = self.params.n_pow_k() as usize;
        Ok((file - 1) * size + q.index(self.params.n_databases()) as usize)
    }

    /// `P(Q_n = q | theta = file, R = 1)`.
    pub fn real_probability(&self, q: &Query, file: usize) -> Result<f64> {
        Ok(self.real[self.slot(q, file)?])
    }

    /// `P(Q_n = q | theta = file, R = 0)`.
    pub fn dummy_probability(&self, q: &Query, file: usize) -> Result<f64> {
        Ok(self.dummy[self.slot(q, file)?])
    }

    /// `P(Q_n = q | theta = file)`, what the databases know.
    pub fn probability(&self, q: &Query, file: usize) -> Result<f64> {
        let slot = self.slot(q, file)?;
        let alpha = self.params.alpha();
        Ok(alpha * self.real[slot] + (1.0 - alpha) * self.dummy[slot])
    }

    /// Likelihoods of `q` under every file, in file order.
    pub fn likelihoods(&self, q: &Query) -> Result<Vec<f64>> {
        (1..=self.params.n_files())
            .map(|file| self.probability(q, file))
            .collect()
    }

    /// Sum over all queries of `P(q | theta = file)`.
    pub fn total(&self, file: usize) -> Result<f64> {
        check_file(&self.params, file)?;
        let size = self.params.n_pow_k() as usize;
        let alpha = self.params.alpha();
        let range = (file - 1) * size..file * size;
        Ok(self.real[range.clone()]
            .iter()
            .zip(&self.dummy[range])
            .map(|(r, d)| alpha * r + (1.0 - alpha) * d)
            .sum())
    }

    /// Every query a database can receive, in canonical order.
    pub fn queries(&self) -> impl Iterator<Item = Query> + '_ {
        let (n, k) = (self.params.n_databases(), self.params.n_files());
        (0..self.params.n_pow_k()).map(move |ix| Query::from_index(ix, n, k))
    }
}

/// Closed-form `P(Q_n = q | theta = file)` per the three query kinds:
/// single segment of the required file, single segment of another file or
/// any multi-file sum, and the null query.
pub fn closed_form_probability(params: &SchemeParams, q: &Query, file: usize) -> f64 {
    let (alpha, p, n) = (params.alpha(), params.p_base(), params.n_databases() as f64);
    match q.single_segment() {
        Some((owner, _)) if owner == file => alpha * p + (1.0 - alpha) / (n - 1.0),
        _ if q.is_null() => alpha * p,
        _ => alpha * p * params.exp_eps(),
    }
}

/// The overall distribution seen by database 1.
pub fn overall_distribution(params: &SchemeParams) -> Result<OverallDistribution> {
    OverallDistribution::from_codebook(&Codebook::new(*params)?, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QueryClass {
    Deceptive { file: usize, eps: f64 },
    Pir,
}

fn ratio_matches(found: f64, expected: f64) -> bool {
    (found - expected).abs() <= RATIO_TOLERANCE * expected.abs().max(1.0)
}

/// Classifies `q` as deceptive toward one file or as a PIR query.
///
/// Deceptive toward `k` requires `q` to request one segment of `k` only,
/// with real-time likelihood ratio `e^-eps` and posterior ratio `e^eps`
/// against every other file. PIR requires both ratios to be one for every
/// pair. Anything else is a [`DirError::ValidationFailure`].
pub fn classify_query(dist: &OverallDistribution, q: &Query) -> Result<QueryClass> {
    let params = dist.params();
    let k = params.n_files();
    let overall = dist.likelihoods(q)?;
    let real: Vec<f64> = (1..=k)
        .map(|file| dist.real_probability(q, file))
        .collect::<Result<_>>()?;
    if overall.iter().all(|&v| v == 0.0) {
        return Err(DirError::ZeroProbability(q.to_string()));
    }

    let uniform = |v: &[f64]| v.iter().all(|&x| ratio_matches(x / v[0], 1.0));
    if uniform(&overall) && uniform(&real) {
        return Ok(QueryClass::Pir);
    }

    let fail = |ratio, expected, found| DirError::ValidationFailure {
        query: q.to_string(),
        ratio,
        expected,
        found,
    };
    let Some((target, _)) = q.single_segment() else {
        let worst = overall
            .iter()
            .map(|&x| x / overall[0])
            .max_by(|a, b| (a - 1.0).abs().total_cmp(&(b - 1.0).abs()))
            .unwrap_or(1.0);
        return Err(fail("posterior", 1.0, worst));
    };
    let e = params.exp_eps();
    for other in (1..=k).filter(|&l| l != target) {
        let real_ratio = real[target - 1] / real[other - 1];
        if !ratio_matches(real_ratio, 1.0 / e) {
            return Err(fail("real-query probability", 1.0 / e, real_ratio));
        }
        // Uniform priors: posterior ratio equals likelihood ratio.
        let posterior_ratio = overall[target - 1] / overall[other - 1];
        if !ratio_matches(posterior_ratio, e) {
            return Err(fail("posterior", e, posterior_ratio));
        }
    }
    Ok(QueryClass::Deceptive {
        file: target,
        eps: params.eps(),
    })
}

/// The alternate form of the deceptive condition,
/// `(a + (d_l/r_l)(1-a)) / (a + (d_k/r_k)(1-a))`, where `r` and `d` are the
/// real and dummy likelihoods of `q` under files `k` and `l`. Equals
/// `e^(-2 eps)` for every deceptive query.
pub fn alternate_deception_ratio(
    dist: &OverallDistribution,
    q: &Query,
    file: usize,
    other: usize,
) -> Result<f64> {
    let alpha = dist.params().alpha();
    let term = |f| -> Result<f64> {
        Ok(alpha + dist.dummy_probability(q, f)? / dist.real_probability(q, f)? * (1.0 - alpha))
    };
    Ok(term(other)? / term(file)?)
}
