//! Parse a program and print it back with its program points.
//!
//! cargo run --example parse_roundtrip [-- file.act]

use dlctx::syntax::{parse, pretty_print};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/db_workers_mod.act").into());
    let src = std::fs::read_to_string(&path)?;
    let program = match parse(&src) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{path}:{e}");
            std::process::exit(1);
        }
    };
    let printed = pretty_print(&program);
    print!("{printed}");
    // printing is a fixpoint of parsing
    assert_eq!(pretty_print(&parse(&printed)?), printed);
    Ok(())
}
