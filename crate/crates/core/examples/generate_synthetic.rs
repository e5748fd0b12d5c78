//! Sample a dataset with planted competence factors and course influence.
//!
//! `cargo run --example generate_synthetic`

use gradecast::{generate_synthetic, SyntheticConfig};

fn main() -> gradecast::Result<()> {
    let cfg = SyntheticConfig {
        n_students: 100,
        m_courses: 12,
        influence_density: 0.2,
        rng_seed: 42,
        ..SyntheticConfig::default()
    };
    let (data, truth) = generate_synthetic(&cfg)?;
    println!("{} records over {} terms", data.len(), data.n_terms());
    println!("mean grade {:.3}", data.mean_grade());

    let support = truth.influence_support();
    println!("{} planted influence pairs, e.g.:", support.len());
    for &(i, j) in support.iter().take(5) {
        println!("  c{i:04} -> c{j:04}  weight {:.3}", truth.a[(i, j)]);
    }

    println!("\nfirst rows of the CSV:");
    for line in data.to_csv().lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
