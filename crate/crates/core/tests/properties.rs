use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dir_lab::adversary::{analytic_error_probability, maximizers, posterior};
use dir_lab::codebook::{
    alternate_deception_ratio, classify_query, closed_form_probability, Codebook,
    OverallDistribution, ProbClass, Query, QueryClass, QuerySet,
};
use dir_lab::params::{self, SchemeParams};
use dir_lab::pmf;
use dir_lab::retrieval::{answer, decode, download_symbols, FileStore, PrimeField};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Small `(n, k)` pairs whose codebook is cheap to enumerate.
fn small_dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=5, 2usize..=5).prop_filter("n^k <= 256", |&(n, k)| n.pow(k as u32) <= 256)
}

fn small_params() -> impl Strategy<Value = SchemeParams> {
    (small_dims(), 0.0f64..0.99).prop_map(|((n, k), frac)| {
        SchemeParams::new(n, k, frac * params::deception_capacity(n, k).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn epsilon_round_trip(n in 2usize..=6, k in 2usize..=6, frac in 0.0f64..0.999) {
        let d = frac * params::deception_capacity(n, k).unwrap();
        let eps = params::epsilon_from_deception(n, k, d).unwrap();
        prop_assert!(eps >= 0.0);
        let back = params::deception_from_epsilon(n, k, eps).unwrap();
        prop_assert!((back - d).abs() <= 1e-12, "d={d} back={back}");
    }

    #[test]
    fn pmf_is_normalized_and_feasible(alpha in 1e-3f64..=1.0) {
        let pmf = pmf::optimal_dummy_pmf(alpha).unwrap();
        let mass: f64 = pmf.support().iter().map(|&(_, w)| w).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!(pmf.support().iter().all(|&(_, w)| w >= 0.0));
        let harmonic: f64 = pmf.support().iter().map(|&(m, w)| w / (m as f64 + 1.0)).sum();
        prop_assert!(close(harmonic, alpha, 1e-12));
        prop_assert!(close(pmf.mean(), pmf::lemma_expected_dummies(alpha), 1e-12));
    }

    #[test]
    fn oracle_matches_closed_form(alpha in 0.01f64..=1.0) {
        let oracle = pmf::brute_force_min_mean(alpha, pmf::default_oracle_support(alpha)).unwrap();
        prop_assert!((oracle.mean() - pmf::lemma_expected_dummies(alpha)).abs() <= 1e-9);
        let mass: f64 = oracle.support().iter().map(|&(_, w)| w).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!((oracle.harmonic() - alpha).abs() <= 1e-12);
    }

    #[test]
    fn two_by_two_specialization(eps in 0.0f64..5.0) {
        let p = SchemeParams::from_epsilon(2, 2, eps).unwrap();
        let e = eps.exp();
        prop_assert!(close(p.p_base(), 1.0 / (2.0 * (1.0 + e)), 1e-12));
        prop_assert!(close(p.alpha(), 2.0 / (1.0 + e), 1e-12));
        prop_assert!(close(params::error_probability(&p), (3.0 * e + 1.0) / (4.0 * (1.0 + e)), 1e-12));
        let cost = (1.0 + 2.0 * e) / (1.0 + e) + 2.0 * p.expected_dummies();
        prop_assert!(close(params::download_cost(&p, p.expected_dummies()).unwrap(), cost, 1e-12));
        let d = params::deception_from_epsilon(2, 2, eps).unwrap();
        if d > 1e-6 {
            prop_assert!(close(((4.0 * d + 1.0) / (1.0 - 4.0 * d)).ln(), eps, 1e-9));
        }
    }

    #[test]
    fn three_by_three_specialization(eps in 0.0f64..5.0) {
        let p = SchemeParams::from_epsilon(3, 3, eps).unwrap();
        let e = eps.exp();
        prop_assert!(close(p.p_base(), 1.0 / (3.0 * (1.0 + 8.0 * e)), 1e-12));
        prop_assert!(close(p.alpha(), 3.0 * (1.0 + 8.0 * e) / (2.0 * e * e + 24.0 * e + 1.0), 1e-12));
        prop_assert!(close(params::error_probability(&p), (52.0 * e + 2.0) / (9.0 * (8.0 * e + 1.0)), 1e-12));
        let d = params::deception_from_epsilon(3, 3, eps).unwrap();
        prop_assert!(close(d, 4.0 * (e - 1.0) / (9.0 * (8.0 * e + 1.0)), 1e-12));
        let cost = (1.0 + 12.0 * e) / (1.0 + 8.0 * e) + 1.5 * p.expected_dummies();
        prop_assert!(close(params::download_cost(&p, p.expected_dummies()).unwrap(), cost, 1e-12));
        if d > 1e-6 {
            prop_assert!(close(((9.0 * d + 4.0) / (4.0 * (1.0 - 18.0 * d))).ln(), eps, 1e-9));
        }
    }

    #[test]
    fn argmax_is_scale_invariant(
        weights in prop::collection::vec(0.0f64..1.0, 2..8),
        scale in 1e-3f64..1e3,
    ) {
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        prop_assert_eq!(maximizers(&weights), maximizers(&scaled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn real_table_shape_and_accounting(p in small_params()) {
        let cb = Codebook::new(p).unwrap();
        let (n, k, nk) = (p.n_databases(), p.n_files(), p.n_pow_k() as usize);
        for file in 1..=k {
            let rows = cb.real_table(file).unwrap();
            prop_assert_eq!(rows.len(), nk);
            let base = rows.iter().filter(|r| r.prob_class() == ProbClass::Base).count();
            prop_assert_eq!(base, n);
            let mass: f64 = rows.iter().map(|r| r.probability(&p)).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);

            let dummies = cb.dummy_table(file).unwrap();
            prop_assert_eq!(dummies.len(), n - 1);
            let mass: f64 = dummies.iter().map(|r| r.prob()).sum();
            prop_assert!((mass - 1.0).abs() <= 1e-12);

            // Cyclic rotation keeps a row inside its table and class.
            for row in rows {
                for by in 1..n {
                    let turned = row.rotated(by);
                    prop_assert!(rows.iter().any(|r| r == &turned));
                }
            }
        }
    }

    #[test]
    fn overall_distribution_is_database_symmetric(p in small_params()) {
        let cb = Codebook::new(p).unwrap();
        let first = OverallDistribution::from_codebook(&cb, 0).unwrap();
        let analytic = OverallDistribution::analytic(&p).unwrap();
        for db in 1..p.n_databases() {
            let other = OverallDistribution::from_codebook(&cb, db).unwrap();
            for q in first.queries() {
                for file in 1..=p.n_files() {
                    let a = first.probability(&q, file).unwrap();
                    prop_assert!(close(a, other.probability(&q, file).unwrap(), 1e-12));
                    prop_assert!(close(a, analytic.probability(&q, file).unwrap(), 1e-12));
                    prop_assert!(close(a, closed_form_probability(&p, &q, file), 1e-12));
                }
            }
        }
        for file in 1..=p.n_files() {
            prop_assert!((first.total(file).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dummy_queries_are_deceptive(p in small_params()) {
        prop_assume!(p.eps() > 1e-6);
        let cb = Codebook::new(p).unwrap();
        let dist = OverallDistribution::from_codebook(&cb, 0).unwrap();
        let e2 = (-2.0 * p.eps()).exp();
        for file in 1..=p.n_files() {
            for row in cb.dummy_table(file).unwrap() {
                for q in row.per_database() {
                    let class = classify_query(&dist, q).unwrap();
                    prop_assert_eq!(class, QueryClass::Deceptive { file, eps: p.eps() });
                    for other in (1..=p.n_files()).filter(|&l| l != file) {
                        let ratio = alternate_deception_ratio(&dist, q, file, other).unwrap();
                        prop_assert!(close(ratio, e2, 1e-9), "ratio {ratio} vs {e2}");
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_error_matches_closed_form(p in small_params()) {
        let dist = OverallDistribution::from_codebook(&Codebook::new(p).unwrap(), 0).unwrap();
        let exact = analytic_error_probability(&dist).unwrap();
        prop_assert!((exact - params::error_probability(&p)).abs() <= 1e-10);
    }

    #[test]
    fn weighted_real_download_matches_closed_form(p in small_params(), blocks in 1usize..4) {
        let cb = Codebook::new(p).unwrap();
        let len = blocks * p.n_segments();
        for file in 1..=p.n_files() {
            let weighted: f64 = cb
                .real_table(file)
                .unwrap()
                .iter()
                .map(|r| r.probability(&p) * download_symbols(r, len) as f64)
                .sum();
            prop_assert!(close(weighted, params::real_download_cost(&p) * len as f64, 1e-12));
            let n = p.n_databases() as f64;
            for row in cb.dummy_table(file).unwrap() {
                prop_assert!(close(download_symbols(row, len) as f64, n / (n - 1.0) * len as f64, 1e-12));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decode_recovers_every_file(
        (n, k) in (2usize..=3, 2usize..=3),
        blocks in 1usize..4,
        seed in any::<u64>(),
    ) {
        let p = SchemeParams::new(n, k, 0.0).unwrap();
        let cb = Codebook::new(p).unwrap();
        let field = PrimeField::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let store = FileStore::random(k, blocks * (n - 1), n - 1, field, &mut rng).unwrap();
        for file in 1..=k {
            for row in cb.real_table(file).unwrap() {
                let answers: Vec<_> = row.per_database().iter().map(|q| answer(&store, q).unwrap()).collect();
                let got = decode(row, &answers, file, field).unwrap();
                prop_assert_eq!(got.as_slice(), store.file(file).unwrap());
            }
        }
    }

    #[test]
    fn answers_are_linear(
        (n, k) in (2usize..=4, 2usize..=4),
        index in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let field = PrimeField::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let store = FileStore::random(k, 2 * (n - 1), n - 1, field, &mut rng).unwrap();
        let q = Query::from_index(index % (n as u64).pow(k as u32), n, k);
        let whole = answer(&store, &q).unwrap();
        let mut sum = vec![0u32; if q.is_null() { 0 } else { store.segment_len() }];
        for (file, segment) in q.terms() {
            let part = answer(&store, &Query::single(k, file, segment)).unwrap();
            for (acc, s) in sum.iter_mut().zip(&part.symbols) {
                *acc = field.add(*acc, *s);
            }
        }
        prop_assert_eq!(whole.symbols, sum);
    }
}

#[test]
fn expected_dummies_continuous_at_boundaries() {
    // Each side of 1/u is linear in alpha with slope -u(u+1) on the left
    // and -(u-1)u on the right. Extrapolating both sides back to the
    // boundary removes the slope, leaving any true jump.
    let delta = 1e-7;
    for u in 1..=20u64 {
        let uf = u as f64;
        let at = 1.0 / uf;
        let right = if u == 1 {
            pmf::lemma_expected_dummies(at)
        } else {
            pmf::lemma_expected_dummies(at + delta) + (uf - 1.0) * uf * delta
        };
        let left = pmf::lemma_expected_dummies(at - delta) - uf * (uf + 1.0) * delta;
        let exact = pmf::lemma_expected_dummies(at);
        assert!(
            (left - right).abs() <= 1e-5,
            "u={u}: left {left} right {right}"
        );
        assert!(
            (left - exact).abs() <= 1e-5,
            "u={u}: left {left} at {exact}"
        );
        assert!((exact - (uf - 1.0)).abs() <= 1e-12);
    }
}

#[test]
fn rate_is_monotone_in_deception() {
    for n in 2..=5usize {
        for k in 2..=5usize {
            let d_max = params::deception_capacity(n, k).unwrap();
            let points: Vec<SchemeParams> = (0..1000)
                .map(|i| SchemeParams::new(n, k, 0.999 * d_max * i as f64 / 1000.0).unwrap())
                .collect();
            for w in points.windows(2) {
                let (a, b) = (params::rate_of(&w[0]), params::rate_of(&w[1]));
                assert!(b <= a, "({n},{k}) rate rises at d={}", w[1].deception());
                if w[0].u() == w[1].u() {
                    assert!(b < a, "({n},{k}) rate flat at d={}", w[1].deception());
                }
            }
        }
    }
}

#[test]
fn posterior_is_uniform_without_deception() {
    for (n, k) in [(2, 2), (2, 4), (3, 3), (4, 2)] {
        let p = SchemeParams::new(n, k, 0.0).unwrap();
        let dist = OverallDistribution::analytic(&p).unwrap();
        for q in dist.queries() {
            let post = posterior(&dist, &q).unwrap();
            assert!(post.iter().all(|&x| close(x, 1.0 / k as f64, 1e-12)));
            assert_eq!(classify_query(&dist, &q).unwrap(), QueryClass::Pir);
        }
    }
}
