//! File storage over a prime field, database answers, and decoding.

use rand::Rng;

use crate::codebook::{Query, QuerySet, RealQueryRow};
use crate::error::{DirError, Result};

pub const DEFAULT_MODULUS: u32 = 257;

/// Arithmetic modulo a prime `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    modulus: u32,
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(modulus: u32) -> Result<Self> {
        if !is_prime(modulus as u64) {
            return Err(DirError::InvalidModulus(modulus as u64));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.modulus as u64) as u32
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.modulus as u64 - b as u64) % self.modulus as u64) as u32
    }
}

impl Default for PrimeField {
    fn default() -> Self {
        Self {
            modulus: DEFAULT_MODULUS,
        }
    }
}

/// `k` files of `L` symbols each, every file split into `n - 1` contiguous
/// segments of `L/(n-1)` symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileStore {
    file_len: usize,
    n_segments: usize,
    field: PrimeField,
    contents: Vec<Vec<u32>>,
}

impl FileStore {
    pub fn new(contents: Vec<Vec<u32>>, n_segments: usize, field: PrimeField) -> Result<Self> {
        let file_len = contents.first().map_or(0, Vec::len);
        check_layout(file_len, n_segments)?;
        if contents.iter().any(|f| f.len() != file_len) {
            return Err(DirError::InvalidArgument(
                "all files must have the same length".into(),
            ));
        }
        if contents.iter().flatten().any(|&s| s >= field.modulus) {
            return Err(DirError::InvalidArgument(format!(
                "symbols must lie in [0, {})",
                field.modulus
            )));
        }
        Ok(Self {
            file_len,
            n_segments,
            field,
            contents,
        })
    }

    /// Uniformly random contents.
    pub fn random<R: Rng + ?Sized>(
        n_files: usize,
        file_len: usize,
        n_segments: usize,
        field: PrimeField,
        rng: &mut R,
    ) -> Result<Self> {
        check_layout(file_len, n_segments)?;
        let mut store = Self {
            file_len,
            n_segments,
            field,
            contents: vec![vec![0; file_len]; n_files],
        };
        store.regenerate(rng);
        Ok(store)
    }

    /// Replaces every symbol with a fresh uniform draw, keeping the layout.
    pub fn regenerate<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let q = self.field.modulus;
        for symbol in self.contents.iter_mut().flatten() {
            *symbol = rng.random_range(0..q);
        }
    }

    pub fn n_files(&self) -> usize {
        self.contents.len()
    }

    pub fn file_len(&self) -> usize {
        self.file_len
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn segment_len(&self) -> usize {
        self.file_len / self.n_segments
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    /// File `file` (1-based).
    pub fn file(&self, file: usize) -> Result<&[u32]> {
        self.contents
            .get(file.wrapping_sub(1))
            .map(Vec::as_slice)
            .ok_or(DirError::FileIndex {
                file,
                n_files: self.n_files(),
            })
    }

    /// Segment `segment` of file `file` (both 1-based).
    pub fn segment(&self, file: usize, segment: u32) -> Result<&[u32]> {
        let segment = segment as usize;
        if segment == 0 || segment > self.n_segments {
            return Err(DirError::SegmentIndex {
                segment,
                n_segments: self.n_segments,
            });
        }
        let len = self.segment_len();
        Ok(&self.file(file)?[(segment - 1) * len..segment * len])
    }
}

fn check_layout(file_len: usize, n_segments: usize) -> Result<()> {
    if n_segments == 0 || file_len == 0 || !file_len.is_multiple_of(n_segments) {
        return Err(DirError::InvalidFileLength {
            len: file_len,
            segments: n_segments,
        });
    }
    Ok(())
}

/// What one database sends back: empty for the null query, otherwise one
/// segment's worth of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Answer {
    pub symbols: Vec<u32>,
}

impl Answer {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Symbol-wise field sum of every segment the query requests.
pub fn answer(store: &FileStore, q: &Query) -> Result<Answer> {
    if q.n_files() != store.n_files() {
        return Err(DirError::QueryShape {
            found: q.n_files(),
            expected: store.n_files(),
        });
    }
    let mut symbols: Vec<u32> = Vec::new();
    for (file, segment) in q.terms() {
        let part = store.segment(file, segment)?;
        if symbols.is_empty() {
            symbols.extend_from_slice(part);
        } else {
            for (acc, &s) in symbols.iter_mut().zip(part) {
                *acc = store.field.add(*acc, s);
            }
        }
    }
    Ok(Answer { symbols })
}

/// Recovers the required file from the answers to a real query row.
///
/// Exactly one database must have been asked for interference only; every
/// other database must have been asked for that same interference plus a
/// distinct segment of the required file. Subtracting the interference
/// answer from each of them yields the segments.
pub fn decode(
    row: &RealQueryRow,
    answers: &[Answer],
    required: usize,
    field: PrimeField,
) -> Result<Vec<u32>> {
    let queries = row.per_database();
    let impossible = |why: String| DirError::DecodingImpossible(why);
    if answers.len() != queries.len() || queries.len() < 2 {
        return Err(impossible(format!(
            "{} answers for {} databases",
            answers.len(),
            queries.len()
        )));
    }
    let n_segments = queries.len() - 1;

    let mut interference_dbs = queries
        .iter()
        .enumerate()
        .filter(|(_, q)| q.segment_of(required).is_none());
    let (side, interference) = match (interference_dbs.next(), interference_dbs.next()) {
        (Some(found), None) => found,
        (None, _) => return Err(impossible("no interference-only database".into())),
        (Some(_), Some(_)) => {
            return Err(impossible(
                "more than one database omits the required file".into(),
            ))
        }
    };

    let seg_len = answers
        .iter()
        .enumerate()
        .find(|(db, _)| *db != side)
        .map_or(0, |(_, a)| a.len());
    if seg_len == 0 {
        return Err(impossible("empty answer for a segment request".into()));
    }
    let side_answer = &answers[side];
    if !(side_answer.is_empty() && interference.is_null()) && side_answer.len() != seg_len {
        return Err(impossible(
            "interference answer has the wrong length".into(),
        ));
    }

    let mut out = vec![0u32; n_segments * seg_len];
    let mut seen = vec![false; n_segments];
    for (db, (q, a)) in queries.iter().zip(answers).enumerate() {
        if db == side {
            continue;
        }
        let segment = q.segment_of(required).expect("filtered above") as usize;
        let mut rest = q.coefficients().to_vec();
        rest[required - 1] = 0;
        if rest != interference.coefficients() {
            return Err(impossible(format!(
                "database {} carries interference other than {interference}",
                db + 1
            )));
        }
        if segment > n_segments || std::mem::replace(&mut seen[segment - 1], true) {
            return Err(impossible(format!("segment {segment} requested twice")));
        }
        if a.len() != seg_len {
            return Err(impossible(format!(
                "answer {} has the wrong length",
                db + 1
            )));
        }
        let dst = &mut out[(segment - 1) * seg_len..segment * seg_len];
        if side_answer.is_empty() {
            dst.copy_from_slice(&a.symbols);
        } else {
            for ((d, &x), &y) in dst.iter_mut().zip(&a.symbols).zip(&side_answer.symbols) {
                *d = field.sub(x, y);
            }
        }
    }
    Ok(out)
}

/// Total symbols downloaded for one row, given file length `file_len`.
///
/// A base real row costs `L`, a boosted real row and a dummy row cost
/// `n L / (n-1)`.
pub fn download_symbols<Q: QuerySet + ?Sized>(row: &Q, file_len: usize) -> u64 {
    let queries = row.per_database();
    let seg_len = file_len / queries.len().saturating_sub(1).max(1);
    queries.iter().filter(|q| !q.is_null()).count() as u64 * seg_len as u64
}
