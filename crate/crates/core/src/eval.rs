//! RMSE, MAE and percentage-of-tick accuracy over prediction batches.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::RecordSet;
use crate::error::{Error, Result};
use crate::predictor::GradePredictor;
use crate::scale::LetterScale;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub student_id: String,
    pub course_id: String,
    pub predicted: f64,
    pub actual: f64,
    pub cold_start: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl PredictionRow {
    /// A row with placeholder ids, for metric-only use.
    pub fn anonymous(predicted: f64, actual: f64) -> Self {
        PredictionRow {
            student_id: String::new(),
            course_id: String::new(),
            predicted,
            actual,
            cold_start: false,
            tag: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionBatch {
    pub rows: Vec<PredictionRow>,
}

impl PredictionBatch {
    pub fn new(rows: Vec<PredictionRow>) -> Self {
        PredictionBatch { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn without_cold_start(&self) -> PredictionBatch {
        PredictionBatch::new(self.rows.iter().filter(|r| !r.cold_start).cloned().collect())
    }

    pub fn with_tag(&self, tag: &str) -> PredictionBatch {
        PredictionBatch::new(
            self.rows
                .iter()
                .filter(|r| r.tag.as_deref() == Some(tag))
                .cloned()
                .collect(),
        )
    }

    /// Writes `student_id,course_id,predicted,actual,cold_start[,tag]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("student_id,course_id,predicted,actual,cold_start,tag\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.student_id,
                r.course_id,
                r.predicted,
                r.actual,
                r.cold_start,
                r.tag.as_deref().unwrap_or("")
            );
        }
        out
    }
}

/// Scores every record of `targets` with `predictor`, reading each
/// student's earlier grades from `history`.
pub fn predict_batch<P: GradePredictor + ?Sized>(
    predictor: &P,
    targets: &RecordSet,
    history: &RecordSet,
) -> PredictionBatch {
    let rows = targets
        .records()
        .iter()
        .map(|r| {
            let sid = targets.student_id(r.student);
            let cid = targets.course_id(r.course);
            let p = predictor.predict_for(sid, cid, r.term, history);
            PredictionRow {
                student_id: sid.to_string(),
                course_id: cid.to_string(),
                predicted: p.grade,
                actual: r.grade,
                cold_start: p.cold_start,
                tag: r.tag.clone(),
            }
        })
        .collect();
    PredictionBatch::new(rows)
}

fn non_empty(batch: &PredictionBatch) -> Result<()> {
    if batch.is_empty() {
        Err(Error::Empty)
    } else {
        Ok(())
    }
}

pub fn rmse(batch: &PredictionBatch) -> Result<f64> {
    non_empty(batch)?;
    let sq: f64 = batch.rows.iter().map(|r| (r.actual - r.predicted).powi(2)).sum();
    Ok((sq / batch.len() as f64).sqrt())
}

pub fn mae(batch: &PredictionBatch) -> Result<f64> {
    non_empty(batch)?;
    let abs: f64 = batch.rows.iter().map(|r| (r.actual - r.predicted).abs()).sum();
    Ok(abs / batch.len() as f64)
}

/// Ladder distance between the letter nearest to `predicted` and the
/// actual letter.
pub fn tick_distance(scale: &LetterScale, predicted: f64, actual: f64) -> Result<usize> {
    let actual_pos = scale
        .position_of_points(actual)
        .ok_or_else(|| Error::UnknownLetter(format!("{actual} grade points")))?;
    let predicted_pos = scale.nearest_position(predicted)?;
    Ok(predicted_pos.abs_diff(actual_pos))
}

/// Percentages of rows within 0, 1 and 2 ticks.
pub fn tick_accuracy(batch: &PredictionBatch, scale: &LetterScale) -> Result<(f64, f64, f64)> {
    non_empty(batch)?;
    let mut within = [0usize; 3];
    for r in &batch.rows {
        let d = tick_distance(scale, r.predicted, r.actual)?;
        for (limit, count) in within.iter_mut().enumerate() {
            if d <= limit {
                *count += 1;
            }
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / batch.len() as f64;
    Ok((pct(within[0]), pct(within[1]), pct(within[2])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub pct0: f64,
    pub pct1: f64,
    pub pct2: f64,
    pub n_rows: usize,
    pub n_cold_start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by_tag: Option<BTreeMap<String, MetricsReport>>,
}

/// All metrics for a batch; with `group_by_tag`, one sub-report per tag.
pub fn report(batch: &PredictionBatch, scale: &LetterScale, group_by_tag: bool) -> Result<MetricsReport> {
    let (pct0, pct1, pct2) = tick_accuracy(batch, scale)?;
    let by_tag = if group_by_tag {
        let mut groups: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
        for r in &batch.rows {
            let key = r.tag.clone().unwrap_or_default();
            groups.entry(key).or_default().push(r.clone());
        }
        let mut subs = BTreeMap::new();
        for (tag, rows) in groups {
            subs.insert(tag, report(&PredictionBatch::new(rows), scale, false)?);
        }
        Some(subs)
    } else {
        None
    };
    Ok(MetricsReport {
        rmse: rmse(batch)?,
        mae: mae(batch)?,
        pct0,
        pct1,
        pct2,
        n_rows: batch.len(),
        n_cold_start: batch.rows.iter().filter(|r| r.cold_start).count(),
        by_tag,
    })
}

/// Aligned text table, one line per labelled report.
pub fn format_table(rows: &[(String, MetricsReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n",
        "method", "RMSE", "MAE", "Pct0", "Pct1", "Pct2", "rows"
    );
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.3}  {:>7.3}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7}",
            label, r.rmse, r.mae, r.pct0, r.pct1, r.pct2, r.n_rows
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(pairs: &[(f64, f64)]) -> PredictionBatch {
        PredictionBatch::new(pairs.iter().map(|&(p, a)| PredictionRow::anonymous(p, a)).collect())
    }

    #[test]
    fn perfect_predictions() {
        let b = batch(&[(4.0, 4.0), (2.0, 2.0), (0.1, 0.1)]);
        assert_eq!(rmse(&b).unwrap(), 0.0);
        assert_eq!(mae(&b).unwrap(), 0.0);
        assert_eq!(tick_accuracy(&b, &LetterScale::default()).unwrap(), (100.0, 100.0, 100.0));
    }

    #[test]
    fn two_row_formulas() {
        let b = batch(&[(3.0, 4.0), (2.0, 2.0)]);
        assert_eq!(mae(&b).unwrap(), 0.5);
        assert!((rmse(&b).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_row_identity() {
        let b = batch(&[(2.4, 3.0)]);
        assert!((rmse(&b).unwrap() - 0.6).abs() < 1e-12);
        assert!((mae(&b).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_errors() {
        let b = PredictionBatch::default();
        assert!(rmse(&b).is_err());
        assert!(mae(&b).is_err());
        assert!(tick_accuracy(&b, &LetterScale::default()).is_err());
        assert!(report(&b, &LetterScale::default(), false).is_err());
    }

    #[test]
    fn one_tick_off() {
        // 2.80 rounds to B-, one rung below B
        let b = batch(&[(2.80, 3.0)]);
        assert_eq!(tick_accuracy(&b, &LetterScale::default()).unwrap(), (0.0, 100.0, 100.0));
    }

    #[test]
    fn zero_and_three_ticks() {
        // B vs B, and A vs B (A, A-, B+, B is three rungs)
        let b = batch(&[(3.0, 3.0), (4.0, 3.0)]);
        assert_eq!(tick_accuracy(&b, &LetterScale::default()).unwrap(), (50.0, 50.0, 50.0));
    }

    #[test]
    fn off_ladder_actual_rejected() {
        let b = batch(&[(3.0, 3.1)]);
        assert!(matches!(tick_accuracy(&b, &LetterScale::default()), Err(Error::UnknownLetter(_))));
    }

    #[test]
    fn tag_groups_partition_rows() {
        let mut rows = Vec::new();
        for (i, tag) in ["CS", "PSYC", "CS", "PSYC", "CS"].iter().enumerate() {
            let mut r = PredictionRow::anonymous(2.0 + 0.3 * i as f64, 3.0);
            r.tag = Some(tag.to_string());
            rows.push(r);
        }
        let b = PredictionBatch::new(rows);
        let scale = LetterScale::default();
        let rep = report(&b, &scale, true).unwrap();
        let subs = rep.by_tag.as_ref().unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(subs.values().map(|s| s.n_rows).sum::<usize>(), 5);
        let cs = report(&b.with_tag("CS"), &scale, false).unwrap();
        assert_eq!(subs["CS"], cs);
        assert!(report(&b, &scale, false).unwrap().by_tag.is_none());
    }

    #[test]
    fn table_has_one_line_per_method() {
        let rep = report(&batch(&[(3.0, 3.0)]), &LetterScale::default(), false).unwrap();
        let t = format_table(&[("MF".into(), rep.clone()), ("MFTCI".into(), rep)]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.lines().nth(2).unwrap().starts_with("MFTCI"));
    }
}
