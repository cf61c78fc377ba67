//! Run every stage on a file, the way the `dlctx` binary does, and print
//! the JSON report.
//!
//! cargo run --example full_pipeline [-- file.act]

use dlctx::cli::{run, Config, Format, Stages};
use dlctx::explorer::Limits;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/db_workers_mod.act").into());
    let cfg = Config {
        input: path.into(),
        stages: Stages {
            cycles: true,
            initial_tasks: true,
            contexts: true,
            explore: true,
        },
        format: Format::Json,
        cards: Vec::new(),
        limits: Limits::default(),
        expand_wiring: false,
        partial: false,
        dump_facts: false,
        trace_worklist: false,
        timing: false,
    };
    let report = run(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report.to_json(&cfg))?);
    eprintln!("exit code would be {}", report.exit_code());
    Ok(())
}
