// A seeded Monte Carlo run of the full scheme against the closed forms.
//
// `cargo run --release --example monte_carlo`

use dir_lab::params::{self, SchemeParams};
use dir_lab::simulator::{SimulationConfig, Simulator};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let d = 0.5 * params::deception_capacity(3, 3)?;
    let params = SchemeParams::new(3, 3, d)?;
    let sim = Simulator::new(SimulationConfig::new(params, 50_000, 2024))?;

    println!("first events:");
    for event in sim.trace(4)? {
        println!(
            "  tick {:>3} retrieval {} {:?} for W{}",
            event.tick,
            event.retrieval,
            event.kind(),
            event.required_file
        );
    }

    let r = sim.run()?;
    println!(
        "P_e   {:.5} +- {:.5} (theory {:.5})",
        r.empirical_pe, r.std_error_pe, r.theory_pe
    );
    println!(
        "D     {:.5} (theory {:.5})",
        r.empirical_deception, r.theory_deception
    );
    println!(
        "cost  {:.5} (theory {:.5})",
        r.empirical_cost_per_file, r.theory_cost
    );
    println!(
        "E[M]  {:.5} (theory {:.5})",
        r.empirical_mean_dummies, r.theory_mean_dummies
    );
    println!("per database P_e {:?}", r.per_database_pe);
    println!(
        "dummy-time accuracy {:.4}, {} decoded",
        r.dummy_time_accuracy, r.decoded_retrievals
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
