// What a database believes after each query it can receive, and how
// often its MAP guess is wrong at real retrieval times.
//
// `cargo run --example map_adversary`

use dir_lab::adversary::{analytic_error_probability, maximizers, posterior};
use dir_lab::codebook::overall_distribution;
use dir_lab::params::{self, SchemeParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = SchemeParams::new(2, 2, 0.1)?;
    let dist = overall_distribution(&params)?;
    for q in dist.queries() {
        let post = posterior(&dist, &q)?;
        let guesses: Vec<String> = maximizers(&post).iter().map(|f| format!("W{f}")).collect();
        println!(
            "{:<10} posterior {:?}  guess {}",
            q.to_string(),
            post.iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<Vec<_>>(),
            guesses.join(" or ")
        );
    }
    let exact = analytic_error_probability(&dist)?;
    println!(
        "error at real times: {exact:.6} (closed form {:.6}, PIR baseline 0.5)",
        params::error_probability(&params)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
