//! Explore one initial context exhaustively and replay the deadlock traces.
//!
//! cargo run --example explore_deadlock

use dlctx::absdom::AbstractTask;
use dlctx::contexts::generate_contexts;
use dlctx::explorer::{explore, replay, ExploreOptions, Machine, SearchOrder};
use dlctx::interfering::TaskCardinality;
use dlctx::syntax::parse;

const FIXTURE: &str = include_str!("../../../corpus/db_workers_mod.act");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse(FIXTURE)?;
    let tasks: Vec<TaskCardinality> = ["DB.register", "Worker.work", "DB.makesConnection"]
        .iter()
        .map(|t| TaskCardinality::one(AbstractTask::parse(t).unwrap()))
        .collect();
    let machine = Machine::new(&program);

    for context in generate_contexts(&program, &tasks, false)? {
        for order in [SearchOrder::Dfs, SearchOrder::Bfs] {
            let opts = ExploreOptions {
                order,
                ..Default::default()
            };
            let report = explore(&program, &context, &opts)?;
            println!("{context} [{order:?}]: {} in {} states", report.verdict, report.states_explored);
            if order == SearchOrder::Bfs {
                continue;
            }
            let init = machine.init_state(&context)?;
            for trace in &report.traces {
                print!("{trace}");
                let end = replay(&machine, &init, &trace.transitions())?;
                assert!(machine.is_deadlock(&end));
            }
        }
    }
    Ok(())
}
