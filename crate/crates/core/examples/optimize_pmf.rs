// The cheapest dummy-count distribution for a few values of alpha, next
// to the exhaustive search over every one- and two-point support.
//
// `cargo run --example optimize_pmf`

use dir_lab::pmf;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [1.0, 0.6, 0.5, 0.35, 0.1, 0.0731] {
        let best = pmf::optimal_dummy_pmf(alpha)?;
        let oracle = pmf::brute_force_min_mean(alpha, pmf::default_oracle_support(alpha))?;
        let support: Vec<String> = best
            .support()
            .iter()
            .map(|(m, w)| format!("P(M={m})={w:.4}"))
            .collect();
        println!(
            "alpha={alpha:<7} E[M]={:.6} oracle={:.6} E[1/(M+1)]={:.6}  {}",
            best.mean(),
            oracle.mean(),
            best.harmonic(),
            support.join(", ")
        );
        assert!((best.mean() - oracle.mean()).abs() < 1e-9);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
