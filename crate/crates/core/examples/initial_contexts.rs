//! Generate initial contexts for a set of tasks.
//!
//! cargo run --example initial_contexts [-- Class.method[=min:max] ...]

use dlctx::absdom::AbstractTask;
use dlctx::cli::parse_card;
use dlctx::contexts::generate_contexts;
use dlctx::interfering::TaskCardinality;
use dlctx::syntax::parse;

const FIXTURE: &str = include_str!("../../../corpus/db_workers_mod.act");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse(FIXTURE)?;
    let mut tasks: Vec<TaskCardinality> = Vec::new();
    for arg in std::env::args().skip(1) {
        if arg.contains('=') {
            tasks.push(parse_card(&arg)?);
        } else {
            let task = AbstractTask::parse(&arg).ok_or(format!("expected Class.method, got {arg}"))?;
            tasks.push(TaskCardinality::one(task));
        }
    }
    if tasks.is_empty() {
        for t in ["DB.register", "Worker.work", "DB.makesConnection"] {
            tasks.push(TaskCardinality::one(AbstractTask::parse(t).unwrap()));
        }
    }

    for expand in [false, true] {
        let contexts = generate_contexts(&program, &tasks, expand)?;
        println!("{} contexts (expand wiring: {expand})", contexts.len());
        for c in &contexts {
            println!("  {c}    {}", c.wiring());
        }
    }
    Ok(())
}
