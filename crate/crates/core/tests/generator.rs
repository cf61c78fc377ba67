mod common;

use dlctx::absdom::resolve_references;
use dlctx::depgraph::{build_dependency_graph, enumerate_cycles};
use dlctx::interfering::{initial_tasks, initial_tasks_naive};

#[test]
fn generated_programs_are_interesting() {
    let (mut with_cycles, mut multi_task, mut with_mods) = (0, 0, 0);
    for seed in 0..100 {
        let p = common::random_program(seed);
        let g = build_dependency_graph(&p, &resolve_references(&p).unwrap()).unwrap();
        let cycles = enumerate_cycles(&g);
        if !cycles.is_empty() {
            with_cycles += 1;
        }
        for c in &cycles {
            let t = initial_tasks(&p, c).unwrap();
            assert_eq!(t, initial_tasks_naive(&p, c).unwrap(), "seed {seed}");
            if t.len() > 1 {
                multi_task += 1;
            }
            if t.len() > c.nodes().iter().filter(|n| !n.is_loc()).count() {
                with_mods += 1;
            }
        }
    }
    println!("cycles in {with_cycles}/100 programs, {multi_task} multi-task sets, {with_mods} with extra tasks");
    assert!(with_cycles >= 20);
}
