//! Parse a grade CSV, inspect the term structure and split off a test term.
//!
//! `cargo run --example parse_grades`

use gradecast::{parse_records, LetterScale};

const CSV: &str = "\
student_id,course_id,term,grade,tag
s1,CS112,0,A,CS
s1,MATH113,0,B+,CS
s1,CS211,1,A-,CS
s2,CS112,0,C,CS
s2,CS112,1,B,CS
s2,PSYC100,1,3.4,PSYC
s3,PSYC100,2,F,PSYC
";

fn main() -> gradecast::Result<()> {
    let scale = LetterScale::default();
    let data = parse_records(CSV.as_bytes(), &scale)?;
    println!(
        "{} records, {} students, {} courses, terms {}..={}",
        data.len(),
        data.n_students(),
        data.n_courses(),
        data.first_term(),
        data.last_term()
    );
    // Decimal grades snap to the nearest letter: 3.4 becomes B+.
    for r in data.term_records(1) {
        println!(
            "term 1: {} took {} -> {} ({})",
            data.student_id(r.student),
            data.course_id(r.course),
            scale.label(r.letter),
            r.grade
        );
    }

    let (train, test) = data.split_by_term(2)?;
    println!("split at term 2: {} training records, {} test records", train.len(), test.len());

    // Retakes: the cumulative matrix keeps the most recent grade.
    let cumulative = data.cumulative_matrix(1)?;
    let s2 = data.student_index("s2").unwrap();
    let cs112 = data.course_index("CS112").unwrap();
    println!("s2's latest CS112 grade: {:?}", cumulative.get(s2, cs112));

    let cs = data.filter_tag("CS")?;
    println!("{} records tagged CS", cs.len());

    match parse_records("student_id,course_id,term,grade\ns1,CS112,0,Z\n".as_bytes(), &scale) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
