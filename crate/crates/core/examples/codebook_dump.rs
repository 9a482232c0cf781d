// The real and dummy query tables for three databases and three files,
// and how each database classifies the queries it can receive.
//
// `cargo run --example codebook_dump`

use dir_lab::codebook::{classify_query, Codebook, OverallDistribution, QueryClass, QuerySet};
use dir_lab::params::SchemeParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = SchemeParams::new(3, 3, 0.03)?;
    let codebook = Codebook::new(params)?;
    println!(
        "eps={:.6} p={:.6} p'={:.6} alpha={:.6}",
        params.eps(),
        params.p_base(),
        params.p_boosted(),
        params.alpha()
    );

    println!("real queries for W1:");
    for row in codebook.real_table(1)? {
        let cells: Vec<String> = row.per_database().iter().map(|q| q.to_string()).collect();
        println!("  {:<8} {}", row.prob_class(), cells.join(" | "));
    }
    println!("dummy queries for W1:");
    for row in codebook.dummy_table(1)? {
        println!("  {:.3} {}", row.prob(), row.per_database()[0]);
    }

    let dist = OverallDistribution::from_codebook(&codebook, 0)?;
    let (mut deceptive, mut pir) = (0, 0);
    for q in dist.queries() {
        match classify_query(&dist, &q)? {
            QueryClass::Deceptive { file, .. } => {
                deceptive += 1;
                println!("  {q} deceives toward W{file}");
            }
            QueryClass::Pir => pir += 1,
        }
    }
    println!("{deceptive} deceptive queries, {pir} PIR queries");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
