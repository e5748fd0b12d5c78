//! Extraction and export of the strongest learned course influences.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mftci::MftciModel;

/// `source -> target` with weight `A(source, target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEdge {
    #[serde(rename = "src")]
    pub source: String,
    #[serde(rename = "dst")]
    pub target: String,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// The `k` largest positive entries of `a`, heaviest first. Equal weights
/// keep `(source, target)` index order.
pub fn top_entries(a: &DMatrix<f64>, k: usize) -> Vec<(usize, usize, f64)> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let w = a[(i, j)];
            if w > 0.0 {
                entries.push((i, j, w));
            }
        }
    }
    entries.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    entries.truncate(k);
    entries
}

pub fn top_influences(model: &MftciModel, k: usize) -> Vec<InfluenceEdge> {
    top_entries(&model.a, k)
        .into_iter()
        .map(|(i, j, w)| InfluenceEdge {
            source: model.course_ids()[i].clone(),
            target: model.course_ids()[j].clone(),
            weight: w,
        })
        .collect()
}

/// Keeps only edges whose endpoints both satisfy `keep`.
pub fn restrict_to(model: &MftciModel, k: usize, keep: impl Fn(&str) -> bool) -> Vec<InfluenceEdge> {
    let mut a = model.a.clone();
    for (c, id) in model.course_ids().iter().enumerate() {
        if !keep(id) {
            a.row_mut(c).fill(0.0);
            a.column_mut(c).fill(0.0);
        }
    }
    top_entries(&a, k)
        .into_iter()
        .map(|(i, j, w)| InfluenceEdge {
            source: model.course_ids()[i].clone(),
            target: model.course_ids()[j].clone(),
            weight: w,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Optional display names for course ids.
pub type CourseNames = HashMap<String, String>;

/// Reads a `course_id,display_name` CSV.
pub fn read_course_names<R: Read>(reader: R) -> Result<CourseNames> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names = CourseNames::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::Malformed {
                line: row.position().map(|p| p.line()).unwrap_or(0),
                message: "expected `course_id,display_name`".into(),
            });
        }
        names.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(names)
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct GraphNode {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<GraphNode>,
    edges: Vec<InfluenceEdge>,
}

/// Nodes in order of first appearance along the edge list.
fn nodes_of(edges: &[InfluenceEdge]) -> Vec<&str> {
    let mut seen = Vec::new();
    for e in edges {
        for id in [e.source.as_str(), e.target.as_str()] {
            if !seen.contains(&id) {
                seen.push(id);
            }
        }
    }
    seen
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_graph(edges: &[InfluenceEdge], format: GraphFormat, names: Option<&CourseNames>) -> Result<String> {
    let label = |id: &str| names.and_then(|n| n.get(id)).cloned();
    match format {
        GraphFormat::Dot => {
            let mut out = String::from("digraph influence {\n  rankdir=LR;\n");
            for id in nodes_of(edges) {
                let shown = label(id).unwrap_or_else(|| id.to_string());
                let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", dot_escape(id), dot_escape(&shown));
            }
            for e in edges {
                let _ = writeln!(
                    out,
                    "  \"{}\" -> \"{}\" [label=\"{}\", weight={}];",
                    dot_escape(&e.source),
                    dot_escape(&e.target),
                    format_weight(e.weight),
                    e.weight
                );
            }
            out.push_str("}\n");
            Ok(out)
        }
        GraphFormat::Json => {
            let doc = GraphDoc {
                nodes: nodes_of(edges)
                    .into_iter()
                    .map(|id| GraphNode {
                        id: id.to_string(),
                        label: label(id),
                    })
                    .collect(),
                edges: edges.to_vec(),
            };
            Ok(serde_json::to_string_pretty(&doc)?)
        }
    }
}

/// Parses the edge list back out of a JSON export.
pub fn edges_from_json(text: &str) -> Result<Vec<InfluenceEdge>> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    Ok(doc.edges)
}

/// Shortest decimal rendering, rounded to four places.
fn format_weight(w: f64) -> String {
    let rounded = (w * 1e4).round() / 1e4;
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mftci::MftciHyper;

    fn model_with(a: &[f64]) -> MftciModel {
        let mut model = MftciModel::zeros(
            MftciHyper { k: 1, ..Default::default() },
            vec!["s".into()],
            vec!["c0".into(), "c1".into()],
            0.1,
            3.0,
        );
        model.a = DMatrix::from_row_slice(2, 2, a);
        model
    }

    #[test]
    fn argmax_and_exhaustion() {
        let model = model_with(&[0.0, 0.9, 0.2, 0.0]);
        let top = top_influences(&model, 1);
        assert_eq!(top.len(), 1);
        assert_eq!((top[0].source.as_str(), top[0].target.as_str(), top[0].weight), ("c0", "c1", 0.9));
        assert_eq!(top_influences(&model, 5).len(), 2);
    }

    #[test]
    fn ties_keep_index_order() {
        let model = model_with(&[0.0, 0.5, 0.5, 0.0]);
        let top = top_influences(&model, 2);
        assert_eq!(top[0].source, "c0");
        assert_eq!(top[1].source, "c1");
    }

    #[test]
    fn dot_output() {
        let empty = export_graph(&[], GraphFormat::Dot, None).unwrap();
        assert!(empty.starts_with("digraph"));
        assert!(empty.trim_end().ends_with('}'));
        assert!(!empty.contains("->"));

        let edge = InfluenceEdge {
            source: "c0".into(),
            target: "c1".into(),
            weight: 0.9,
        };
        let dot = export_graph(std::slice::from_ref(&edge), GraphFormat::Dot, None).unwrap();
        assert_eq!(dot.matches("->").count(), 1);
        assert!(dot.contains("label=\"0.9\""));

        let names: CourseNames = [("c0".to_string(), "Intro \"OOP\"".to_string())].into();
        let dot = export_graph(&[edge], GraphFormat::Dot, Some(&names)).unwrap();
        assert!(dot.contains("label=\"Intro \\\"OOP\\\"\""));
    }

    #[test]
    fn json_round_trip() {
        let edges = vec![
            InfluenceEdge { source: "a".into(), target: "b".into(), weight: 0.75 },
            InfluenceEdge { source: "b".into(), target: "c".into(), weight: 0.125 },
        ];
        let text = export_graph(&edges, GraphFormat::Json, None).unwrap();
        assert_eq!(edges_from_json(&text).unwrap(), edges);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 3);
        assert_eq!(v["edges"][0]["src"], "a");
    }

    #[test]
    fn unknown_format() {
        assert!(matches!("svg".parse::<GraphFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!("DOT".parse::<GraphFormat>().unwrap(), GraphFormat::Dot);
    }

    #[test]
    fn names_csv() {
        let names = read_course_names("course_id,display_name\nCS112,Intro Programming\n".as_bytes()).unwrap();
        assert_eq!(names["CS112"], "Intro Programming");
    }
}
