//! Compute the interfering tasks of every cycle, showing the worklist run
//! and checking it against the naive evaluation.
//!
//! cargo run --example interfering_tasks [-- file.act]

use dlctx::absdom::resolve_references;
use dlctx::depgraph::{build_dependency_graph, enumerate_cycles};
use dlctx::interfering::{initial_tasks_naive, initial_tasks_traced};
use dlctx::syntax::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/db_workers_mod.act").into());
    let program = parse(&std::fs::read_to_string(path)?)?;
    let graph = build_dependency_graph(&program, &resolve_references(&program)?)?;

    for (i, cycle) in enumerate_cycles(&graph).iter().enumerate() {
        println!("cycle {}: {cycle}", i + 1);
        let (tasks, trace) = initial_tasks_traced(&program, cycle)?;
        print!("{trace}");
        for t in &tasks {
            println!("  {t}");
        }
        assert_eq!(tasks, initial_tasks_naive(&program, cycle)?);
    }
    Ok(())
}
