// Closed-form rate curve for three files on two, three and four databases.
//
// `cargo run --example theory_sweep`

use dir_lab::params;
use dir_lab::simulator::sweep_rates;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for n in 2..=4 {
        let k = 3;
        let d_max = params::deception_capacity(n, k)?;
        let grid: Vec<f64> = (0..=10).map(|i| 0.95 * d_max * i as f64 / 10.0).collect();
        println!(
            "N={n} K={k} d_max={d_max:.6} PIR capacity={:.6}",
            params::pir_capacity(n, k)?
        );
        println!(
            "{:>10} {:>8} {:>8} {:>3} {:>8} {:>8}",
            "d", "eps", "alpha", "u", "E[M]", "rate"
        );
        for row in sweep_rates(n, k, &grid)? {
            println!(
                "{:>10.6} {:>8.4} {:>8.4} {:>3} {:>8.4} {:>8.5}",
                row.d, row.eps, row.alpha, row.u, row.expected_m, row.rate
            );
        }
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
