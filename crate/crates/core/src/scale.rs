//! Letter-grade ladder and conversions between letters and grade points.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grade points assigned to an F unless a ladder says otherwise.
pub const DEFAULT_FAILING_EPSILON: f64 = 0.1;

/// Upper end of the grade domain.
pub const MAX_GRADE: f64 = 4.0;

const TIE_TOLERANCE: f64 = 1e-12;

/// An ordered, descending ladder of letter grades.
///
/// Adjacent rungs are one "tick" apart. The bottom rung carries
/// `failing_epsilon` points so that a failing grade stays distinguishable from
/// a course that was never taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterScale {
    rungs: Vec<(String, f64)>,
    failing_epsilon: f64,
}

impl Default for LetterScale {
    fn default() -> Self {
        let eps = DEFAULT_FAILING_EPSILON;
        let rungs = [
            ("A", 4.0),
            ("A-", 3.67),
            ("B+", 3.33),
            ("B", 3.0),
            ("B-", 2.67),
            ("C+", 2.33),
            ("C", 2.0),
            ("C-", 1.67),
            ("D", 1.0),
            ("F", eps),
        ];
        LetterScale {
            rungs: rungs.iter().map(|(l, p)| (l.to_string(), *p)).collect(),
            failing_epsilon: eps,
        }
    }
}

impl LetterScale {
    /// Builds a ladder from descending `(label, points)` pairs. The last rung
    /// is the failing grade and its points become `failing_epsilon`.
    pub fn new(rungs: Vec<(String, f64)>) -> Result<Self> {
        if rungs.len() < 2 {
            return Err(Error::InvalidScale("ladder needs at least two rungs".into()));
        }
        for (label, points) in &rungs {
            if label.trim().is_empty() {
                return Err(Error::InvalidScale("empty letter label".into()));
            }
            if !(points.is_finite() && *points > 0.0 && *points <= MAX_GRADE) {
                return Err(Error::InvalidScale(format!(
                    "points for `{label}` must lie in (0, 4], got {points}"
                )));
            }
        }
        for pair in rungs.windows(2) {
            if pair[1].1 >= pair[0].1 {
                return Err(Error::InvalidScale(format!(
                    "ladder must be strictly decreasing (`{}` = {} follows `{}` = {})",
                    pair[1].0, pair[1].1, pair[0].0, pair[0].1
                )));
            }
        }
        for (i, (label, _)) in rungs.iter().enumerate() {
            if rungs[..i].iter().any(|(other, _)| other == label) {
                return Err(Error::InvalidScale(format!("duplicate label `{label}`")));
            }
        }
        let failing_epsilon = rungs.last().map(|r| r.1).unwrap_or(DEFAULT_FAILING_EPSILON);
        Ok(LetterScale {
            rungs,
            failing_epsilon,
        })
    }

    /// Reads a `letter,points` CSV, highest grade first.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rungs = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if row.len() != 2 {
                return Err(Error::Malformed {
                    line,
                    message: format!("expected `letter,points`, got {} fields", row.len()),
                });
            }
            let points: f64 = row[1].parse().map_err(|_| Error::Malformed {
                line,
                message: format!("cannot parse points `{}`", &row[1]),
            })?;
            rungs.push((row[0].to_string(), points));
        }
        LetterScale::new(rungs)
    }

    pub fn failing_epsilon(&self) -> f64 {
        self.failing_epsilon
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rungs.iter().map(|(l, _)| l.as_str())
    }

    /// Label of the rung at `position` (0 is the top grade).
    pub fn label(&self, position: usize) -> &str {
        &self.rungs[position].0
    }

    pub fn points(&self, position: usize) -> f64 {
        self.rungs[position].1
    }

    /// Ladder position of a label.
    pub fn position(&self, letter: &str) -> Result<usize> {
        self.rungs
            .iter()
            .position(|(l, _)| l == letter)
            .ok_or_else(|| Error::UnknownLetter(letter.to_string()))
    }

    /// Ladder position whose points equal `points` (within 1e-9).
    pub fn position_of_points(&self, points: f64) -> Option<usize> {
        self.rungs.iter().position(|(_, p)| (p - points).abs() < 1e-9)
    }

    pub fn letter_to_points(&self, letter: &str) -> Result<f64> {
        self.position(letter).map(|i| self.rungs[i].1)
    }

    /// Position of the rung closest to `points`; ties go to the higher grade.
    pub fn nearest_position(&self, points: f64) -> Result<usize> {
        if !points.is_finite() {
            return Err(Error::NonFinite(points));
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, (_, p)) in self.rungs.iter().enumerate() {
            let d = (points - p).abs();
            // Rungs are scanned from the top, so a tie keeps the earlier (higher) rung.
            if d < best_dist - TIE_TOLERANCE {
                best = i;
                best_dist = d;
            }
        }
        Ok(best)
    }

    pub fn points_to_letter(&self, points: f64) -> Result<&str> {
        self.nearest_position(points).map(|i| self.label(i))
    }

    /// Rounds `points` to the nearest rung value.
    pub fn snap(&self, points: f64) -> Result<f64> {
        self.nearest_position(points).map(|i| self.points(i))
    }

    /// Clamps a raw score into `[failing_epsilon, 4]`.
    pub fn clamp(&self, points: f64) -> f64 {
        points.clamp(self.failing_epsilon, MAX_GRADE)
    }

    /// Writes the ladder in the `letter,points` CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("letter,points\n");
        for (l, p) in &self.rungs {
            out.push_str(&format!("{l},{p}\n"));
        }
        out
    }
}
