//! Extract the strongest learned influences and export them as DOT and JSON.
//!
//! `cargo run --release --example influence_graph`

use std::collections::HashSet;

use gradecast::influence::{export_graph, top_influences, CourseNames, GraphFormat};
use gradecast::{fit, generate_synthetic, MftciHyper, SyntheticConfig};

fn main() -> gradecast::Result<()> {
    let (data, truth) = generate_synthetic(&SyntheticConfig::default())?;
    let (model, _) = fit(&data, MftciHyper { k: 3, gamma: 1.0, ..MftciHyper::default() })?;

    let planted: HashSet<(String, String)> = truth
        .influence_support()
        .into_iter()
        .map(|(i, j)| (format!("c{i:04}"), format!("c{j:04}")))
        .collect();
    let edges = top_influences(&model, 10);
    for e in &edges {
        let mark = if planted.contains(&(e.source.clone(), e.target.clone())) { "planted" } else { "" };
        println!("{} -> {}  {:.3}  {mark}", e.source, e.target, e.weight);
    }

    let mut names = CourseNames::new();
    names.insert(edges[0].source.clone(), "Intro to Programming".into());
    println!("\n{}", export_graph(&edges[..3], GraphFormat::Dot, Some(&names))?);
    println!("{}", export_graph(&edges[..2], GraphFormat::Json, None)?);
    Ok(())
}
