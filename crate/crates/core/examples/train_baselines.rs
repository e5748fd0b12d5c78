//! Train the three factorization baselines and compare them on a held-out term.
//!
//! `cargo run --release --example train_baselines`

use gradecast::eval::{format_table, predict_batch};
use gradecast::{generate_synthetic, report, train_baseline, SyntheticConfig, TrainConfig, Variant};

fn main() -> gradecast::Result<()> {
    let (data, _) = generate_synthetic(&SyntheticConfig { n_students: 200, ..SyntheticConfig::default() })?;
    let (train, test) = data.split_by_term(data.last_term())?;
    let cfg = TrainConfig { k: 3, gamma: 0.1, rng_seed: 1, ..TrainConfig::default() };

    let mut rows = Vec::new();
    for variant in [Variant::Mf, Variant::Mf0, Variant::Nmf] {
        let model = train_baseline(&train, variant, &cfg)?;
        if variant == Variant::Mf {
            println!("MF global bias mu = {:.3}", model.mu);
        }
        let batch = predict_batch(&model, &test, &train);
        rows.push((variant.to_string(), report(&batch, data.scale(), false)?));
    }
    print!("{}", format_table(&rows));
    Ok(())
}
