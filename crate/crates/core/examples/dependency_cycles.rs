//! Build the abstract dependency graph and list its cycles.
//!
//! cargo run --example dependency_cycles [-- file.act]

use dlctx::absdom::resolve_references;
use dlctx::depgraph::{build_dependency_graph, enumerate_cycles};
use dlctx::syntax::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/db_workers_orig.act").into());
    let program = parse(&std::fs::read_to_string(path)?)?;
    let pts = resolve_references(&program)?;
    let graph = build_dependency_graph(&program, &pts)?;

    println!("{} nodes, {} edges", graph.nodes().len(), graph.edges().len());
    for e in graph.edges() {
        println!("  {:?}: {} -[{}]-> {}", e.kind, e.from, e.annotation(), e.to);
    }
    let cycles = enumerate_cycles(&graph);
    println!("{} cycles", cycles.len());
    for c in &cycles {
        println!("  {c}");
    }
    Ok(())
}
