//! Rank a small hyperparameter grid on a validation term.
//!
//! `cargo run --release --example gridsearch`

use gradecast::experiment::{gridsearch, write_leaderboard, GridSpec};
use gradecast::{generate_synthetic, SyntheticConfig};

const GRID: &str = r#"
method = ["mftci", "mf0"]
k = [3, 10]
gamma = [0.1, 1.0]
outer_max_iters = 50
"#;

fn main() -> gradecast::Result<()> {
    let (data, _) = generate_synthetic(&SyntheticConfig { n_students: 200, ..SyntheticConfig::default() })?;
    let grid = GridSpec::from_toml(GRID)?;
    let rows = gridsearch(&data, data.last_term() - 1, &grid)?;
    for r in &rows {
        println!("{:<6} k={:<3} gamma={:<4} MAE {:.4}  RMSE {:.4}", r.method, r.k, r.gamma, r.mae, r.rmse);
    }
    let mut csv = Vec::new();
    write_leaderboard(&rows, &mut csv)?;
    println!("\nleaderboard header: {}", String::from_utf8_lossy(&csv).lines().next().unwrap_or(""));
    Ok(())
}
