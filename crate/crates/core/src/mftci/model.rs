use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{predict_grade, HistoryView, MftciHyper};
use crate::data::RecordSet;
use crate::error::{Error, Result};
use crate::predictor::{GradePredictor, Prediction};
use crate::scale::MAX_GRADE;

pub const FORMAT_VERSION: u32 = 1;

/// Course pairs `(c', c)` where `c'` appeared in some student's influence
/// window of a grade in `c`. Only these entries of `A` are ever updated.
#[derive(Debug, Clone, PartialEq)]
pub struct CoTakenMask {
    m: usize,
    pairs: Vec<(usize, usize)>,
    dense: Vec<bool>,
}

impl CoTakenMask {
    pub fn new(m: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut dense = vec![false; m * m];
        for &(i, j) in &pairs {
            dense[i * m + j] = true;
        }
        CoTakenMask { m, pairs, dense }
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.dense[source * self.m + target]
    }

    /// Pairs in ascending `(source, target)` order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// A fitted influence model.
#[derive(Debug, Clone, PartialEq)]
pub struct MftciModel {
    /// `k x n` student factors, one column per student.
    pub u: DMatrix<f64>,
    /// `k x m` course factors, one column per course.
    pub v: DMatrix<f64>,
    /// `m x m` influence; `a[(c', c)]` is the influence of `c'` on `c`.
    pub a: DMatrix<f64>,
    pub hyper: MftciHyper,
    pub mask: CoTakenMask,
    student_ids: Vec<String>,
    course_ids: Vec<String>,
    student_lookup: HashMap<String, usize>,
    course_lookup: HashMap<String, usize>,
    /// Floor of the prediction clamp.
    pub grade_floor: f64,
    /// Fallback for cold-start dyads.
    pub global_mean: f64,
}

impl MftciModel {
    /// A model with zero factors and an empty mask.
    pub fn zeros(
        hyper: MftciHyper,
        student_ids: Vec<String>,
        course_ids: Vec<String>,
        grade_floor: f64,
        global_mean: f64,
    ) -> Self {
        let (k, n, m) = (hyper.k, student_ids.len(), course_ids.len());
        let student_lookup = index_map(&student_ids);
        let course_lookup = index_map(&course_ids);
        MftciModel {
            u: DMatrix::zeros(k, n),
            v: DMatrix::zeros(k, m),
            a: DMatrix::zeros(m, m),
            hyper,
            mask: CoTakenMask::new(m, Vec::new()),
            student_ids,
            course_ids,
            student_lookup,
            course_lookup,
            grade_floor,
            global_mean,
        }
    }

    pub fn n_students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn n_courses(&self) -> usize {
        self.course_ids.len()
    }

    pub fn student_ids(&self) -> &[String] {
        &self.student_ids
    }

    pub fn course_ids(&self) -> &[String] {
        &self.course_ids
    }

    pub fn student_index(&self, id: &str) -> Option<usize> {
        self.student_lookup.get(id).copied()
    }

    pub fn course_index(&self, id: &str) -> Option<usize> {
        self.course_lookup.get(id).copied()
    }

    pub fn clamp(&self, raw: f64) -> f64 {
        raw.clamp(self.grade_floor, MAX_GRADE)
    }

    pub(crate) fn check_indices(&self, s: usize, c: usize) -> Result<()> {
        if s >= self.n_students() {
            return Err(Error::IndexOutOfRange {
                what: "student",
                index: s,
                size: self.n_students(),
            });
        }
        if c >= self.n_courses() {
            return Err(Error::IndexOutOfRange {
                what: "course",
                index: c,
                size: self.n_courses(),
            });
        }
        Ok(())
    }

    /// Collects the student's grades in terms `term-1` and `term-2` from
    /// `source`, translated to this model's course indices. Courses the model
    /// has never seen are left out.
    pub fn history_from(&self, source: &RecordSet, student_id: &str, term: u32) -> [Vec<(usize, f64)>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        let Some(s) = source.student_index(student_id) else {
            return out;
        };
        for depth in 1..=self.hyper.previous_terms {
            let Some(t) = term.checked_sub(depth as u32) else {
                continue;
            };
            out[depth - 1] = source
                .student_term_records(s, t)
                .iter()
                .filter_map(|r| {
                    self.course_index(source.course_id(r.course))
                        .map(|c| (c, r.grade))
                })
                .collect();
        }
        out
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            method: "mftci".into(),
            hyper: self.hyper.clone(),
            u: rows_of(&self.u),
            v: rows_of(&self.v),
            a_sparse: self
                .mask
                .pairs()
                .iter()
                .map(|&(i, j)| (i, j, self.a[(i, j)]))
                .collect(),
            student_index: self.student_ids.clone(),
            course_index: self.course_ids.clone(),
            grade_floor: self.grade_floor,
            global_mean: self.global_mean,
        };
        serde_json::to_writer_pretty(writer, &file)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        Self::from_file(file)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        Self::from_file(serde_json::from_value(value)?)
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        file.hyper.validate()?;
        let (k, n, m) = (file.hyper.k, file.student_index.len(), file.course_index.len());
        let u = matrix_from_rows(&file.u, k, n, "U")?;
        let v = matrix_from_rows(&file.v, k, m, "V")?;
        let mut a = DMatrix::zeros(m, m);
        let mut pairs = Vec::with_capacity(file.a_sparse.len());
        for &(i, j, w) in &file.a_sparse {
            if i >= m || j >= m {
                return Err(Error::ModelFormat(format!("A entry ({i}, {j}) out of range")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::ModelFormat(format!("A entry ({i}, {j}) = {w} is invalid")));
            }
            a[(i, j)] = w;
            pairs.push((i, j));
        }
        let mut model = MftciModel::zeros(
            file.hyper,
            file.student_index,
            file.course_index,
            file.grade_floor,
            file.global_mean,
        );
        model.u = u;
        model.v = v;
        model.a = a;
        model.mask = CoTakenMask::new(m, pairs);
        Ok(model)
    }
}

impl GradePredictor for MftciModel {
    fn predict_for(&self, student_id: &str, course_id: &str, term: u32, history: &RecordSet) -> Prediction {
        let (Some(s), Some(c)) = (self.student_index(student_id), self.course_index(course_id)) else {
            return Prediction {
                grade: self.global_mean,
                cold_start: true,
            };
        };
        let [last, second] = self.history_from(history, student_id, term);
        let view = HistoryView::new(&last, &second);
        let grade = predict_grade(self, s, c, &view).expect("indices come from the model's own maps");
        Prediction {
            grade,
            cold_start: false,
        }
    }

    fn method_name(&self) -> String {
        match self.hyper.previous_terms {
            1 => "MFTCI_p1".into(),
            _ => "MFTCI".into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    method: String,
    hyper: MftciHyper,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(rename = "A_sparse")]
    a_sparse: Vec<(usize, usize, f64)>,
    student_index: Vec<String>,
    course_index: Vec<String>,
    grade_floor: f64,
    global_mean: f64,
}

pub(crate) fn index_map(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

/// Row-major nested vectors.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ModelFormat(format!(
            "{name} must be {nrows} x {ncols}"
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::ModelFormat(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
