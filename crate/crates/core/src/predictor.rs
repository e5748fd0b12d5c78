use crate::data::RecordSet;

/// One prediction and whether it came from the cold-start fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub grade: f64,
    pub cold_start: bool,
}

/// Anything that can score a (student, course) dyad for a target term.
///
/// `history` supplies the grades the student earned before `term`; models
/// that ignore temporal context may disregard it.
pub trait GradePredictor {
    fn predict_for(&self, student_id: &str, course_id: &str, term: u32, history: &RecordSet) -> Prediction;

    /// Short method name used in reports.
    fn method_name(&self) -> String;
}
