// One private retrieval end to end: pick a real query row, collect the
// databases' answers over GF(257) and decode the file.
//
// `cargo run --example retrieve_file`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dir_lab::codebook::{Codebook, QuerySet};
use dir_lab::params::SchemeParams;
use dir_lab::retrieval::{answer, decode, download_symbols, FileStore, PrimeField};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = SchemeParams::new(3, 3, 0.03)?;
    let codebook = Codebook::new(params)?;
    let field = PrimeField::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let store = FileStore::random(3, 6, params.n_segments(), field, &mut rng)?;

    let wanted = 2;
    let row = &codebook.real_table(wanted)?[5];
    let answers = row
        .per_database()
        .iter()
        .map(|q| answer(&store, q))
        .collect::<Result<Vec<_>, _>>()?;
    for (db, (q, a)) in row.per_database().iter().zip(&answers).enumerate() {
        println!("DB{} asked {q:<14} answered {:?}", db + 1, a.symbols);
    }
    let file = decode(row, &answers, wanted, field)?;
    println!("decoded W{wanted} = {file:?}");
    println!("stored  W{wanted} = {:?}", store.file(wanted)?);
    println!(
        "downloaded {} symbols for a {}-symbol file",
        download_symbols(row, store.file_len()),
        store.file_len()
    );
    assert_eq!(file, store.file(wanted)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
