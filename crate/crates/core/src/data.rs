//! Term-stamped grade records, their indices and the sparse grade matrices
//! derived from them.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use crate::error::{Error, Result};
use crate::scale::{LetterScale, MAX_GRADE};

/// One observed grade.
#[derive(Debug, Clone, PartialEq)]
pub struct GradeRecord {
    pub student: usize,
    pub course: usize,
    pub term: u32,
    pub grade: f64,
    /// Ladder position of the letter.
    pub letter: usize,
    pub tag: Option<String>,
}

/// A record before indexing, keyed by raw identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub student_id: String,
    pub course_id: String,
    pub term: u32,
    pub letter: String,
    pub tag: Option<String>,
}

/// Validated records with dense student and course indices.
///
/// Indices follow the lexicographic order of the identifiers, so the same
/// set of records always gets the same indices regardless of input order.
/// Records are kept sorted by `(term, student, course)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    scale: LetterScale,
    student_ids: Vec<String>,
    course_ids: Vec<String>,
    student_lookup: HashMap<String, usize>,
    course_lookup: HashMap<String, usize>,
    records: Vec<GradeRecord>,
    first_term: u32,
    last_term: u32,
}

/// Row-indexed sparse `n x m` grade matrix. Absent entries mean "not taken".
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradeMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
    nnz: usize,
}

impl SparseGradeMatrix {
    fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        SparseGradeMatrix { n_cols, rows, nnz }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Sorted `(course, grade)` entries of one student.
    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    pub fn get(&self, s: usize, c: usize) -> Option<f64> {
        let row = &self.rows[s];
        row.binary_search_by_key(&c, |e| e.0).ok().map(|i| row[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |&(c, g)| (s, c, g)))
    }
}

impl RecordSet {
    /// Indexes and validates raw records.
    pub fn from_raw(scale: LetterScale, raw: Vec<RawRecord>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty);
        }
        let mut student_ids: Vec<String> = raw.iter().map(|r| r.student_id.clone()).collect();
        let mut course_ids: Vec<String> = raw.iter().map(|r| r.course_id.clone()).collect();
        student_ids.sort();
        student_ids.dedup();
        course_ids.sort();
        course_ids.dedup();
        let student_lookup: HashMap<String, usize> = student_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let course_lookup: HashMap<String, usize> = course_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut records = Vec::with_capacity(raw.len());
        for r in raw {
            let letter = scale.position(&r.letter)?;
            records.push(GradeRecord {
                student: student_lookup[&r.student_id],
                course: course_lookup[&r.course_id],
                term: r.term,
                grade: scale.points(letter),
                letter,
                tag: r.tag,
            });
        }
        Self::assemble(scale, student_ids, course_ids, records)
    }

    fn assemble(
        scale: LetterScale,
        student_ids: Vec<String>,
        course_ids: Vec<String>,
        mut records: Vec<GradeRecord>,
    ) -> Result<Self> {
        records.sort_by_key(|r| (r.term, r.student, r.course));
        for pair in records.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if (a.term, a.student, a.course) == (b.term, b.student, b.course) {
                return Err(Error::DuplicateRecord {
                    student: student_ids[a.student].clone(),
                    course: course_ids[a.course].clone(),
                    term: a.term,
                });
            }
        }
        let first_term = records.first().map(|r| r.term).ok_or(Error::Empty)?;
        let last_term = records.last().map(|r| r.term).ok_or(Error::Empty)?;
        let student_lookup = student_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let course_lookup = course_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(RecordSet {
            scale,
            student_ids,
            course_ids,
            student_lookup,
            course_lookup,
            records,
            first_term,
            last_term,
        })
    }

    /// A record set sharing this one's indices and scale.
    fn with_records(&self, records: Vec<GradeRecord>) -> Result<Self> {
        Self::assemble(
            self.scale.clone(),
            self.student_ids.clone(),
            self.course_ids.clone(),
            records,
        )
    }

    pub fn scale(&self) -> &LetterScale {
        &self.scale
    }

    pub fn n_students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn n_courses(&self) -> usize {
        self.course_ids.len()
    }

    /// Number of terms in the contiguous range `first_term..=last_term`.
    pub fn n_terms(&self) -> usize {
        (self.last_term - self.first_term) as usize + 1
    }

    pub fn first_term(&self) -> u32 {
        self.first_term
    }

    pub fn last_term(&self) -> u32 {
        self.last_term
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[GradeRecord] {
        &self.records
    }

    pub fn student_id(&self, s: usize) -> &str {
        &self.student_ids[s]
    }

    pub fn course_id(&self, c: usize) -> &str {
        &self.course_ids[c]
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

    pub fn contains_term(&self, t: u32) -> bool {
        t >= self.first_term && t <= self.last_term
    }

    /// Records of one term (empty when the term has no records).
    pub fn term_records(&self, t: u32) -> &[GradeRecord] {
        let lo = self.records.partition_point(|r| r.term < t);
        let hi = self.records.partition_point(|r| r.term <= t);
        &self.records[lo..hi]
    }

    /// Records of one student in one term, sorted by course.
    pub fn student_term_records(&self, s: usize, t: u32) -> &[GradeRecord] {
        let term = self.term_records(t);
        let lo = term.partition_point(|r| r.student < s);
        let hi = term.partition_point(|r| r.student <= s);
        &term[lo..hi]
    }

    /// Terms that actually hold records, ascending.
    pub fn populated_terms(&self) -> Vec<u32> {
        let mut terms: Vec<u32> = self.records.iter().map(|r| r.term).collect();
        terms.dedup();
        terms
    }

    /// Training history (terms before `test_term`) and the `test_term` records.
    /// Both halves keep this set's indices.
    pub fn split_by_term(&self, test_term: u32) -> Result<(RecordSet, RecordSet)> {
        if !self.contains_term(test_term) || self.term_records(test_term).is_empty() {
            return Err(Error::TermOutOfRange(test_term));
        }
        if test_term == self.first_term {
            return Err(Error::InvalidConfig(format!(
                "test term {test_term} is the earliest term; no training history"
            )));
        }
        let train: Vec<GradeRecord> = self
            .records
            .iter()
            .filter(|r| r.term < test_term)
            .cloned()
            .collect();
        let test = self.term_records(test_term).to_vec();
        Ok((self.with_records(train)?, self.with_records(test)?))
    }

    /// Records whose tag equals `tag`.
    pub fn filter_tag(&self, tag: &str) -> Result<RecordSet> {
        let kept = self
            .records
            .iter()
            .filter(|r| r.tag.as_deref() == Some(tag))
            .cloned()
            .collect();
        self.with_records(kept)
    }

    /// The grade matrix of a single term.
    pub fn term_matrix(&self, t: u32) -> Result<SparseGradeMatrix> {
        if !self.contains_term(t) {
            return Err(Error::TermOutOfRange(t));
        }
        let mut rows = vec![Vec::new(); self.n_students()];
        for r in self.term_records(t) {
            rows[r.student].push((r.course, r.grade));
        }
        Ok(SparseGradeMatrix::from_rows(self.n_courses(), rows))
    }

    /// All grades up to and including term `t`. A course taken more than once
    /// keeps its most recent grade.
    pub fn cumulative_matrix(&self, t: u32) -> Result<SparseGradeMatrix> {
        if !self.contains_term(t) {
            return Err(Error::TermOutOfRange(t));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); self.n_students()];
        for r in self.records.iter().take_while(|r| r.term <= t) {
            rows[r.student].insert(r.course, r.grade);
        }
        let rows = rows.into_iter().map(|m| m.into_iter().collect()).collect();
        Ok(SparseGradeMatrix::from_rows(self.n_courses(), rows))
    }

    /// Mean grade over all records.
    pub fn mean_grade(&self) -> f64 {
        self.records.iter().map(|r| r.grade).sum::<f64>() / self.records.len() as f64
    }

    fn has_tags(&self) -> bool {
        self.records.iter().any(|r| r.tag.is_some())
    }

    /// Writes the CSV input format. Grades are written as letters.
    pub fn to_csv(&self) -> String {
        let tags = self.has_tags();
        let mut out = String::from("student_id,course_id,term,grade");
        if tags {
            out.push_str(",tag");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}",
                self.student_ids[r.student],
                self.course_ids[r.course],
                r.term,
                self.scale.label(r.letter)
            ));
            if tags {
                out.push(',');
                out.push_str(r.tag.as_deref().unwrap_or(""));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the `student_id,course_id,term,grade[,tag]` CSV format.
///
/// `grade` is either a ladder label or a decimal in (0, 4], which is snapped
/// to the nearest letter. Lines starting with `#` are comments.
pub fn parse_records<R: Read>(reader: R, scale: &LetterScale) -> Result<RecordSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let malformed = |line, message: String| Error::Malformed { line, message };
    let (Some(si), Some(ci), Some(ti), Some(gi)) =
        (col("student_id"), col("course_id"), col("term"), col("grade"))
    else {
        return Err(malformed(
            1,
            "header must contain student_id,course_id,term,grade".into(),
        ));
    };
    let tag_col = col("tag");

    let mut raw = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            match row.get(i) {
                Some(v) if !v.is_empty() => Ok(v),
                _ => Err(malformed(line, format!("missing field `{}`", &headers[i]))),
            }
        };
        let student_id = field(si)?.to_string();
        let course_id = field(ci)?.to_string();
        let term: u32 = field(ti)?
            .parse()
            .map_err(|_| malformed(line, format!("term `{}` is not a non-negative integer", &row[ti])))?;
        let grade = field(gi)?;
        let letter = if scale.position(grade).is_ok() {
            grade.to_string()
        } else if let Ok(points) = grade.parse::<f64>() {
            if !(points > 0.0 && points <= MAX_GRADE) {
                return Err(malformed(line, format!("grade {points} outside (0, 4]")));
            }
            scale.points_to_letter(points)?.to_string()
        } else {
            return Err(Error::UnknownLetter(grade.to_string()));
        };
        let tag = tag_col
            .and_then(|i| row.get(i))
            .filter(|t| !t.is_empty())
            .map(str::to_string);
        raw.push(RawRecord {
            student_id,
            course_id,
            term,
            letter,
            tag,
        });
    }
    RecordSet::from_raw(scale.clone(), raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RecordSet> {
        parse_records(text.as_bytes(), &LetterScale::default())
    }

    const HEADER: &str = "student_id,course_id,term,grade\n";

    #[test]
    fn single_record() {
        let rs = parse(&format!("{HEADER}s1,CS112,0,A\n")).unwrap();
        assert_eq!((rs.n_students(), rs.n_courses(), rs.n_terms()), (1, 1, 1));
        assert_eq!(rs.records()[0].grade, 4.0);
    }

    #[test]
    fn duplicate_triple_rejected() {
        let err = parse(&format!("{HEADER}s1,CS112,0,A\ns1,CS112,0,B\n")).unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { term: 0, .. }));
    }

    #[test]
    fn retake_in_other_term_allowed() {
        let rs = parse(&format!("{HEADER}s1,CS112,0,C\ns1,CS112,2,B\n")).unwrap();
        assert_eq!(rs.len(), 2);
    }

    #[test]
    fn unknown_letter_rejected() {
        let err = parse(&format!("{HEADER}s1,CS112,0,Z\n")).unwrap_err();
        assert!(matches!(err, Error::UnknownLetter(ref l) if l == "Z"));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(parse(HEADER), Err(Error::Empty)));
        assert!(matches!(parse(&format!("{HEADER}# only a comment\n")), Err(Error::Empty)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse(&format!("{HEADER}s1,CS112,0,A\ns2,CS112,x,A\n")).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err:?}");
        let err = parse(&format!("{HEADER}s1,CS112,0,A\ns2,CS112\n")).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err:?}");
        let err = parse("a,b,c\n1,2,3\n").unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn decimal_grades_snap_and_tags_pass_through() {
        let rs = parse("student_id,course_id,term,grade,tag\n# c\ns1,CS112,0,2.8,CS\ns1,MATH,0,4.0,\n")
            .unwrap();
        let by_course = |c: &str| {
            let ci = rs.course_index(c).unwrap();
            rs.records().iter().find(|r| r.course == ci).unwrap().clone()
        };
        assert_eq!(by_course("CS112").grade, 2.67);
        assert_eq!(by_course("CS112").tag.as_deref(), Some("CS"));
        assert_eq!(by_course("MATH").tag, None);
        assert!(parse(&format!("{HEADER}s1,CS112,0,4.5\n")).is_err());
    }

    fn five_terms() -> RecordSet {
        let mut text = HEADER.to_string();
        for t in 0..5 {
            text.push_str(&format!("s1,C{t},{t},B\ns2,C{t},{t},A\n"));
        }
        text.push_str("late,C0,4,C\n");
        parse(&text).unwrap()
    }

    #[test]
    fn split_partitions_terms() {
        let rs = five_terms();
        let (train, test) = rs.split_by_term(4).unwrap();
        assert!(train.records().iter().all(|r| r.term < 4));
        assert!(test.records().iter().all(|r| r.term == 4));
        assert_eq!(train.len() + test.len(), rs.len());
        assert_eq!(train.student_ids(), rs.student_ids());

        let late = rs.student_index("late").unwrap();
        assert!(test.records().iter().any(|r| r.student == late));
        let cum = train.cumulative_matrix(3).unwrap();
        assert!(cum.row(late).is_empty());

        assert!(rs.split_by_term(0).is_err());
        assert!(matches!(rs.split_by_term(9), Err(Error::TermOutOfRange(9))));
    }

    #[test]
    fn split_in_middle_drops_later_terms() {
        let rs = five_terms();
        let (train, test) = rs.split_by_term(2).unwrap();
        let later = rs.records().iter().filter(|r| r.term > 2).count();
        assert_eq!(train.len() + test.len() + later, rs.len());
    }

    #[test]
    fn cumulative_latest_grade_wins() {
        let rs = parse(&format!("{HEADER}s1,X,0,C\ns1,Y,0,B\ns1,X,2,B\n")).unwrap();
        let x = rs.course_index("X").unwrap();
        let y = rs.course_index("Y").unwrap();
        assert_eq!(rs.cumulative_matrix(1).unwrap().get(0, y), Some(3.0));
        assert_eq!(rs.cumulative_matrix(1).unwrap().get(0, x), Some(2.0));
        assert_eq!(rs.cumulative_matrix(2).unwrap().get(0, x), Some(3.0));
        assert_eq!(rs.cumulative_matrix(0).unwrap(), rs.term_matrix(0).unwrap());
        assert!(rs.term_matrix(3).is_err());
        let total: usize = (0..=2).map(|t| rs.term_matrix(t).unwrap().nnz()).sum();
        assert!(rs.cumulative_matrix(2).unwrap().nnz() < total);
    }

    #[test]
    fn indices_are_independent_of_input_order() {
        let a = parse(&format!("{HEADER}b,Y,1,A\na,X,0,B\n")).unwrap();
        let b = parse(&format!("{HEADER}a,X,0,B\nb,Y,1,A\n")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.student_index("a"), Some(0));
    }
}
