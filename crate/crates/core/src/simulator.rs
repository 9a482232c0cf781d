//! Monte Carlo harness: retrievals on a discrete timeline, real and dummy
//! query events, MAP predictions by every database at every event, and
//! empirical error, deception and download cost against the closed forms.
//!
//! Each retrieval picks a required file uniformly, draws a real row and a
//! dummy count `M`, puts the real event on the next free tick and the `M`
//! dummy events on the next free ticks after a gap drawn uniformly from
//! `1..=10`. Ticks are global to a batch, so a later retrieval's real event
//! may come before an earlier retrieval's dummies. File contents are
//! redrawn at every event tick.
//!
//! Trials are split into fixed-size batches. Batch `b` uses a ChaCha8
//! stream `b` seeded from the run seed, so the report does not depend on
//! how many threads run the batches.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::Adversary;
use crate::codebook::{Codebook, DummyQueryRow, OverallDistribution, QuerySet, RealQueryRow};
use crate::error::{DirError, Result};
use crate::params::{self, SchemeParams};
use crate::pmf::{self, DummyCountPmf};
use crate::retrieval::{answer, decode, FileStore, PrimeField};

pub const DEFAULT_BATCH_SIZE: u64 = 1 << 16;

/// Dummy events start this many ticks (at most) after their real event.
pub const MAX_DUMMY_GAP: u64 = 10;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub params: SchemeParams,
    pub n_retrievals: u64,
    pub seed: u64,
    pub field: PrimeField,
    /// Symbols per file; must be a multiple of `n - 1`.
    pub file_len: usize,
    pub batch_size: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl SimulationConfig {
    /// Defaults: field 257, `L = 2(n-1)`.
    pub fn new(params: SchemeParams, n_retrievals: u64, seed: u64) -> Self {
        Self {
            params,
            n_retrievals,
            seed,
            field: PrimeField::default(),
            file_len: 2 * params.n_segments(),
            batch_size: DEFAULT_BATCH_SIZE,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Real,
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventRow<'a> {
    Real(&'a RealQueryRow),
    Dummy(&'a DummyQueryRow),
}

impl EventRow<'_> {
    fn queries(&self) -> &[crate::codebook::Query] {
        match self {
            EventRow::Real(r) => r.per_database(),
            EventRow::Dummy(r) => r.per_database(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalEvent<'a> {
    pub tick: u64,
    /// Index of the retrieval (within its batch) the event belongs to.
    pub retrieval: u64,
    pub required_file: usize,
    pub row: EventRow<'a>,
}

impl RetrievalEvent<'_> {
    pub fn kind(&self) -> EventKind {
        match self.row {
            EventRow::Real(_) => EventKind::Real,
            EventRow::Dummy(_) => EventKind::Dummy,
        }
    }
}

/// Heap entry ordered by tick only; ticks are unique.
struct Scheduled<'a>(RetrievalEvent<'a>);

impl PartialEq for Scheduled<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.0.tick == other.0.tick
    }
}
impl Eq for Scheduled<'_> {}
impl PartialOrd for Scheduled<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.tick.cmp(&other.0.tick)
    }
}

#[derive(Default)]
struct Timeline<'a> {
    pending: BinaryHeap<Reverse<Scheduled<'a>>>,
    occupied: BTreeSet<u64>,
}

impl<'a> Timeline<'a> {
    fn next_free(&self, mut tick: u64) -> u64 {
        while self.occupied.contains(&tick) {
            tick += 1;
        }
        tick
    }

    fn schedule(&mut self, event: RetrievalEvent<'a>) {
        let fresh = self.occupied.insert(event.tick);
        debug_assert!(fresh, "tick {} scheduled twice", event.tick);
        self.pending.push(Reverse(Scheduled(event)));
    }

    /// Pops the earliest event if its tick is below `before`.
    fn pop_before(&mut self, before: u64) -> Option<RetrievalEvent<'a>> {
        if self.pending.peek()?.0 .0.tick >= before {
            return None;
        }
        let Reverse(Scheduled(event)) = self.pending.pop()?;
        self.occupied.remove(&event.tick);
        Some(event)
    }
}

/// Empirical results of one run next to the closed-form values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n_retrievals: u64,
    /// Error rate of database 1's MAP prediction at real events.
    pub empirical_pe: f64,
    pub empirical_deception: f64,
    /// Downloaded symbols per retrieval divided by `L`.
    pub empirical_cost_per_file: f64,
    pub theory_pe: f64,
    pub theory_deception: f64,
    pub theory_cost: f64,
    pub std_error_pe: f64,
    pub rng_seed: u64,
    /// Fraction of dummy-event predictions (all databases) that were right.
    pub dummy_time_accuracy: f64,
    pub n_databases: usize,
    pub n_files: usize,
    pub eps: f64,
    pub alpha: f64,
    pub u: u64,
    pub file_len: usize,
    pub field_modulus: u32,
    /// Real-event error rate of each database.
    pub per_database_pe: Vec<f64>,
    pub empirical_mean_dummies: f64,
    pub std_error_mean_dummies: f64,
    pub theory_mean_dummies: f64,
    /// Sample mean of `1/(M+1)`.
    pub empirical_harmonic: f64,
    pub std_error_harmonic: f64,
    pub dummy_events: u64,
    /// Real events whose decoded file matched the store exactly.
    pub decoded_retrievals: u64,
}

#[derive(Debug, Clone, Default)]
struct BatchStats {
    retrievals: u64,
    errors_per_db: Vec<u64>,
    dummy_events: u64,
    dummy_correct: u64,
    symbols: u64,
    sum_m: u64,
    sum_m_sq: u128,
    sum_harmonic: f64,
    sum_harmonic_sq: f64,
    decoded: u64,
}

impl BatchStats {
    fn merge(&mut self, other: &BatchStats) {
        self.retrievals += other.retrievals;
        if self.errors_per_db.is_empty() {
            self.errors_per_db = vec![0; other.errors_per_db.len()];
        }
        for (a, b) in self.errors_per_db.iter_mut().zip(&other.errors_per_db) {
            *a += b;
        }
        self.dummy_events += other.dummy_events;
        self.dummy_correct += other.dummy_correct;
        self.symbols += other.symbols;
        self.sum_m += other.sum_m;
        self.sum_m_sq += other.sum_m_sq;
        self.sum_harmonic += other.sum_harmonic;
        self.sum_harmonic_sq += other.sum_harmonic_sq;
        self.decoded += other.decoded;
    }
}

/// A configured simulation with its codebook and predictors built.
pub struct Simulator {
    config: SimulationConfig,
    codebook: Codebook,
    pmf: DummyCountPmf,
    /// One predictor per database.
    adversaries: Vec<Adversary>,
}

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        if config.n_retrievals == 0 {
            return Err(DirError::InvalidArgument(
                "n_retrievals must be at least 1".into(),
            ));
        }
        if config.batch_size == 0 {
            return Err(DirError::InvalidArgument(
                "batch_size must be at least 1".into(),
            ));
        }
        let params = config.params;
        let n_segments = params.n_segments();
        if config.file_len == 0 || !config.file_len.is_multiple_of(n_segments) {
            return Err(DirError::InvalidFileLength {
                len: config.file_len,
                segments: n_segments,
            });
        }
        let codebook = Codebook::new(params)?;
        let adversaries = (0..params.n_databases())
            .map(|db| Adversary::new(&OverallDistribution::from_codebook(&codebook, db)?))
            .collect::<Result<_>>()?;
        let pmf = pmf::optimal_dummy_pmf(params.alpha())?;
        Ok(Self {
            config,
            codebook,
            pmf,
            adversaries,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn dummy_pmf(&self) -> &DummyCountPmf {
        &self.pmf
    }

    fn batch_rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(batch);
        rng
    }

    fn sample_real_row<'a, R: Rng>(&'a self, file: usize, rng: &mut R) -> &'a RealQueryRow {
        let params = &self.config.params;
        let rows = self
            .codebook
            .real_table(file)
            .expect("file drawn from 1..=k");
        let n = params.n_databases();
        let base_mass = n as f64 * params.p_base();
        if rng.random::<f64>() < base_mass {
            &rows[rng.random_range(0..n)]
        } else {
            &rows[rng.random_range(n..rows.len())]
        }
    }

    /// Runs `count` retrievals of batch `batch`, calling `observe` on every
    /// event in tick order.
    fn run_batch<'a>(
        &'a self,
        batch: u64,
        count: u64,
        observe: &mut dyn FnMut(&RetrievalEvent<'a>),
    ) -> Result<BatchStats> {
        let params = &self.config.params;
        let (n, k) = (params.n_databases(), params.n_files());
        let mut rng = self.batch_rng(batch);
        let mut store = FileStore::random(
            k,
            self.config.file_len,
            params.n_segments(),
            self.config.field,
            &mut rng,
        )?;
        let mut stats = BatchStats {
            errors_per_db: vec![0; n],
            ..Default::default()
        };
        let mut timeline = Timeline::default();
        let mut clock = 0u64;

        for retrieval in 0..count {
            let file = rng.random_range(1..=k);
            let real_tick = timeline.next_free(clock);
            timeline.schedule(RetrievalEvent {
                tick: real_tick,
                retrieval,
                required_file: file,
                row: EventRow::Real(self.sample_real_row(file, &mut rng)),
            });

            let m = self.pmf.sample(&mut rng);
            stats.sum_m += m;
            stats.sum_m_sq += (m as u128) * (m as u128);
            let h = 1.0 / (m as f64 + 1.0);
            stats.sum_harmonic += h;
            stats.sum_harmonic_sq += h * h;

            let dummies = self.codebook.dummy_table(file)?;
            let mut tick = real_tick + rng.random_range(1..=MAX_DUMMY_GAP);
            for _ in 0..m {
                tick = timeline.next_free(tick);
                timeline.schedule(RetrievalEvent {
                    tick,
                    retrieval,
                    required_file: file,
                    row: EventRow::Dummy(&dummies[rng.random_range(0..dummies.len())]),
                });
                tick += 1;
            }

            clock = real_tick + 1;
            while let Some(event) = timeline.pop_before(clock) {
                self.process(&event, &mut store, &mut rng, &mut stats)?;
                observe(&event);
            }
        }
        while let Some(event) = timeline.pop_before(u64::MAX) {
            self.process(&event, &mut store, &mut rng, &mut stats)?;
            observe(&event);
        }
        stats.retrievals = count;
        Ok(stats)
    }

    fn process<R: Rng>(
        &self,
        event: &RetrievalEvent<'_>,
        store: &mut FileStore,
        rng: &mut R,
        stats: &mut BatchStats,
    ) -> Result<()> {
        store.regenerate(rng);
        let queries = event.row.queries();
        let answers = queries
            .iter()
            .map(|q| answer(store, q))
            .collect::<Result<Vec<_>>>()?;
        stats.symbols += answers.iter().map(|a| a.len() as u64).sum::<u64>();

        let predictions = queries
            .iter()
            .zip(&self.adversaries)
            .map(|(q, adv)| adv.predict(q, rng));
        match event.row {
            EventRow::Real(row) => {
                for (db, predicted) in predictions.enumerate() {
                    if predicted != event.required_file {
                        stats.errors_per_db[db] += 1;
                    }
                }
                let decoded = decode(row, &answers, event.required_file, store.field())?;
                if decoded != store.file(event.required_file)? {
                    return Err(DirError::CorrectnessViolation {
                        tick: event.tick,
                        file: event.required_file,
                    });
                }
                stats.decoded += 1;
            }
            EventRow::Dummy(_) => {
                stats.dummy_events += 1;
                stats.dummy_correct += predictions
                    .filter(|&predicted| predicted == event.required_file)
                    .count() as u64;
            }
        }
        Ok(())
    }

    /// Events of the first `count` retrievals of batch 0, in tick order.
    pub fn trace(&self, count: u64) -> Result<Vec<RetrievalEvent<'_>>> {
        let mut events = Vec::new();
        self.run_batch(0, count, &mut |e| events.push(*e))?;
        Ok(events)
    }

    pub fn run(&self) -> Result<SimulationReport> {
        let total = self.config.n_retrievals;
        let size = self.config.batch_size;
        let n_batches = total.div_ceil(size);
        let work = |batch: u64| {
            let count = size.min(total - batch * size);
            self.run_batch(batch, count, &mut |_| {})
        };
        let results: Vec<Result<BatchStats>> = match self.config.threads {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| DirError::InvalidArgument(format!("thread pool: {e}")))?
                .install(|| (0..n_batches).into_par_iter().map(work).collect()),
            None => (0..n_batches).into_par_iter().map(work).collect(),
        };
        let mut stats = BatchStats::default();
        for batch in results {
            stats.merge(&batch?);
        }
        Ok(self.report(&stats))
    }

    fn report(&self, stats: &BatchStats) -> SimulationReport {
        let params = &self.config.params;
        let n = stats.retrievals as f64;
        let k = params.n_files() as f64;
        let n_db = params.n_databases();
        let per_database_pe: Vec<f64> = stats.errors_per_db.iter().map(|&e| e as f64 / n).collect();
        let empirical_pe = per_database_pe[0];
        let mean_m = stats.sum_m as f64 / n;
        let var_m = (stats.sum_m_sq as f64 / n - mean_m * mean_m).max(0.0);
        let mean_h = stats.sum_harmonic / n;
        let var_h = (stats.sum_harmonic_sq / n - mean_h * mean_h).max(0.0);
        let theory_mean_dummies = params.expected_dummies();
        SimulationReport {
            n_retrievals: stats.retrievals,
            empirical_pe,
            empirical_deception: empirical_pe - (1.0 - 1.0 / k),
            empirical_cost_per_file: stats.symbols as f64 / self.config.file_len as f64 / n,
            theory_pe: params::error_probability(params),
            theory_deception: params.deception(),
            theory_cost: params::download_cost(params, theory_mean_dummies)
                .expect("closed-form E[M] is non-negative"),
            std_error_pe: (empirical_pe * (1.0 - empirical_pe) / n).sqrt(),
            rng_seed: self.config.seed,
            dummy_time_accuracy: if stats.dummy_events == 0 {
                1.0
            } else {
                stats.dummy_correct as f64 / (stats.dummy_events as f64 * n_db as f64)
            },
            n_databases: n_db,
            n_files: params.n_files(),
            eps: params.eps(),
            alpha: params.alpha(),
            u: params.u(),
            file_len: self.config.file_len,
            field_modulus: self.config.field.modulus(),
            per_database_pe,
            empirical_mean_dummies: mean_m,
            std_error_mean_dummies: (var_m / n).sqrt(),
            theory_mean_dummies,
            empirical_harmonic: mean_h,
            std_error_harmonic: (var_h / n).sqrt(),
            dummy_events: stats.dummy_events,
            decoded_retrievals: stats.decoded,
        }
    }
}

/// Runs `n_retrievals` retrievals with default field and file length.
pub fn run_simulation(
    params: &SchemeParams,
    n_retrievals: u64,
    seed: u64,
) -> Result<SimulationReport> {
    Simulator::new(SimulationConfig::new(*params, n_retrievals, seed))?.run()
}

/// One point of a theory sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub d: f64,
    pub eps: f64,
    pub alpha: f64,
    pub u: u64,
    pub expected_m: f64,
    pub download_cost: f64,
    pub rate: f64,
}

/// Closed-form rate, cost and dummy statistics at each deception level.
pub fn sweep_rates(n: usize, k: usize, d_grid: &[f64]) -> Result<Vec<RateRow>> {
    d_grid
        .iter()
        .map(|&d| {
            let p = SchemeParams::new(n, k, d)?;
            let expected_m = p.expected_dummies();
            Ok(RateRow {
                d,
                eps: p.eps(),
                alpha: p.alpha(),
                u: p.u(),
                expected_m,
                download_cost: params::download_cost(&p, expected_m)?,
                rate: params::rate_of(&p),
            })
        })
        .collect()
}
