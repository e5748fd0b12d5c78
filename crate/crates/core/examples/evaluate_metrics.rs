//! RMSE, MAE and tick accuracy on a hand-made batch, with a per-tag breakdown.
//!
//! `cargo run --example evaluate_metrics`

use gradecast::eval::{format_table, tick_distance, PredictionRow};
use gradecast::{report, LetterScale, PredictionBatch};

fn row(predicted: f64, actual: f64, tag: &str) -> PredictionRow {
    PredictionRow { tag: Some(tag.into()), ..PredictionRow::anonymous(predicted, actual) }
}

fn main() -> gradecast::Result<()> {
    let scale = LetterScale::default();
    let batch = PredictionBatch::new(vec![
        row(3.9, 4.0, "CS"),
        row(2.8, 3.0, "CS"),
        row(2.1, 3.33, "CS"),
        row(3.0, 3.0, "PSYC"),
        row(1.2, 2.0, "PSYC"),
    ]);

    // 2.8 rounds to B-, one tick below B.
    println!("tick distance 2.8 vs B: {}", tick_distance(&scale, 2.8, 3.0)?);

    let r = report(&batch, &scale, true)?;
    let mut rows = vec![("all".to_string(), r.clone())];
    for (tag, sub) in r.by_tag.clone().unwrap_or_default() {
        rows.push((tag, sub));
    }
    print!("{}", format_table(&rows));
    println!("\nas JSON:\n{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
