mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use dlctx::absdom::{resolve_references, AbstractTask, Facts};
use dlctx::contexts::generate_contexts;
use dlctx::depgraph::{build_dependency_graph, enumerate_cycles, DeadlockCycle, EdgeKind};
use dlctx::explorer::{explore, replay, ExploreOptions, Machine, SearchOrder, Trace, TransitionKind, Verdict};
use dlctx::interfering::{initial_tasks, initial_tasks_naive, initial_tasks_traced, Event, TaskCardinality};
use dlctx::syntax::{parse, Program};

const ORIG: &str = include_str!("../../../corpus/db_workers_orig.act");
const MODIFIED: &str = include_str!("../../../corpus/db_workers_mod.act");

const FIXTURE_CYCLE: &str = "obj@pp:newdb -[pp:register:register]-> Worker.ping -[pp:ping:ping]-> \
                             obj@pp:neww -[pp:work:work]-> DB.getData -[pp:getD:getData]-> obj@pp:newdb";

// Written to the raw handle so the line shows up even when output is
// captured.
fn verdict(n: u32, ok: bool, detail: &str) {
    let _ = writeln!(std::io::stderr(), "criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn cycles_of(p: &Program) -> Vec<DeadlockCycle> {
    enumerate_cycles(&build_dependency_graph(p, &resolve_references(p).unwrap()).unwrap())
}

fn fixture_cycle(p: &Program) -> DeadlockCycle {
    cycles_of(p)
        .into_iter()
        .find(|c| c.to_string() == FIXTURE_CYCLE)
        .expect("fixture cycle")
}

fn tasks(names: &[&str]) -> Vec<TaskCardinality> {
    names.iter().map(|s| TaskCardinality::one(AbstractTask::parse(s).unwrap())).collect()
}

fn ev(task: &str, label: &str, p: &Program) -> Event {
    Event::new(AbstractTask::parse(task).unwrap(), p.find_label(label).unwrap().clone())
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

#[test]
fn criterion_1_cycle_reproduction() {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, src) in [("orig", ORIG), ("mod", MODIFIED)] {
        let start = Instant::now();
        let p = parse(src).unwrap();
        let cycles = cycles_of(&p);
        let elapsed = start.elapsed();
        let hit = cycles.iter().find(|c| c.to_string() == FIXTURE_CYCLE);
        let shape = hit.is_some_and(|c| {
            let gets: Vec<(String, String)> = c
                .edges
                .iter()
                .filter(|e| e.kind == EdgeKind::LocTask)
                .map(|e| (e.pp.to_string(), e.in_task.method_name.clone()))
                .collect();
            c.len() == 4
                && gets
                    == [
                        ("pp:register".to_string(), "register".to_string()),
                        ("pp:work".to_string(), "work".to_string()),
                    ]
        });
        ok &= shape && elapsed < Duration::from_secs(1);
        details.push(format!("{name}: {} cycles, match={shape}, {elapsed:?}", cycles.len()));
    }
    verdict(1, ok, &details.join("; "));
}

#[test]
fn criterion_2_initial_tasks() {
    let p = parse(MODIFIED).unwrap();
    let got = initial_tasks(&p, &fixture_cycle(&p)).unwrap();
    let got: BTreeSet<String> = got.iter().map(|t| t.to_string()).collect();
    let want: BTreeSet<String> = ["DB.register min=1 max=1", "Worker.work min=1 max=1", "DB.makesConnection min=1 max=1"]
        .into_iter()
        .map(String::from)
        .collect();
    verdict(2, got == want, &format!("{got:?}"));
}

#[test]
fn criterion_3_worklist_walkthrough() {
    let p = parse(MODIFIED).unwrap();
    let (_, trace) = initial_tasks_traced(&p, &fixture_cycle(&p)).unwrap();
    let show = |v: &[Event]| sorted(v.iter().map(|e| e.to_string()).collect());

    let want_events = show(&[
        ev("Worker.work", "work", &p),
        ev("Worker.work", "fgetdata", &p),
        ev("DB.register", "register", &p),
        ev("DB.register", "fping", &p),
    ]);
    let want_answers = show(&[ev("DB.register", "register", &p), ev("Worker.work", "work", &p)]);
    let events_ok = show(&trace.init_events) == want_events;
    let answers_ok = show(&trace.init_answers) == want_answers;

    let modifiers: BTreeSet<String> = Facts::new(&p)
        .field_modifiers("DB", "connected")
        .unwrap()
        .iter()
        .map(|(_, pp)| pp.to_string())
        .collect();
    let want_mods: BTreeSet<String> = ["pp:makestrue", "pp:connected1", "pp:connected"]
        .into_iter()
        .map(String::from)
        .collect();
    // the worklist adds exactly these three, once
    let added: Vec<String> = trace
        .steps
        .iter()
        .flat_map(|s| s.added.iter().map(|e| e.pp.to_string()))
        .collect();
    let added_ok = sorted(added.clone()) == want_mods.iter().cloned().collect::<Vec<_>>();

    // the same lists through the command line
    let out = Command::new(env!("CARGO_BIN_EXE_dlctx"))
        .args(["--trace-worklist", "--format", "json", "--no-timing"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/db_workers_mod.act"))
        .output()
        .unwrap();
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cli_list = |key: &str| {
        sorted(
            json["worklist"][0][key]
                .as_array()
                .unwrap()
                .iter()
                .map(|e| format!("({},{})", e["task"].as_str().unwrap(), e["pp"].as_str().unwrap()))
                .collect(),
        )
    };
    let cli_ok = cli_list("init_events") == want_events && cli_list("init_answers") == want_answers;

    verdict(
        3,
        events_ok && answers_ok && modifiers == want_mods && added_ok && cli_ok,
        &format!("events={events_ok} answers={answers_ok} modifiers={modifiers:?} added={added:?} cli={cli_ok}"),
    );
}

#[test]
fn criterion_4_contexts() {
    let p = parse(MODIFIED).unwrap();
    let t = initial_tasks(&p, &fixture_cycle(&p)).unwrap();
    let got: Vec<String> = generate_contexts(&p, &t, false).unwrap().iter().map(|c| c.to_string()).collect();
    let want = [
        "{[register,makesConnection]_db1, [work]_w1}",
        "{[register]_db1, [makesConnection]_db2, [work]_w1}",
    ];
    verdict(4, got == want, &format!("{got:?}"));
}

/// Positions of register's await, the makesConnection start, and register's
/// resumption, in that order.
fn interference_window(t: &Trace) -> Option<(usize, usize, usize)> {
    let register = AbstractTask::new("DB", "register");
    let conn = AbstractTask::new("DB", "makesConnection");
    let suspend = t.steps.iter().position(|s| {
        s.transition.task == register
            && s.transition.kind == TransitionKind::Step
            && s.pp.as_ref().is_some_and(|pp| pp.is("await"))
    })?;
    let resume = suspend
        + t.steps[suspend..]
            .iter()
            .position(|s| s.transition.task == register && s.transition.kind == TransitionKind::ResumeAwait)?;
    let start = (suspend..resume).find(|&i| t.steps[i].transition.task == conn)?;
    let ran = (start..resume).any(|i| t.steps[i].transition.task == conn && t.steps[i].transition.kind == TransitionKind::Step);
    ran.then_some((suspend, start, resume))
}

#[test]
fn criterion_5_interference_semantics() {
    let p = parse(MODIFIED).unwrap();
    let m = Machine::new(&p);
    let opts = ExploreOptions::default();
    let mut details = Vec::new();
    let mut ok = true;

    let without = generate_contexts(&p, &tasks(&["DB.register", "Worker.work"]), false).unwrap();
    for c in &without {
        let start = Instant::now();
        let r = explore(&p, c, &opts).unwrap();
        let elapsed = start.elapsed();
        ok &= r.verdict == Verdict::NoDeadlock && r.states_explored <= 10_000 && elapsed <= Duration::from_secs(5);
        details.push(format!("{c}: {} in {} states, {elapsed:?}", r.verdict, r.states_explored));
    }

    let t = initial_tasks(&p, &fixture_cycle(&p)).unwrap();
    let mut witnessed = false;
    for c in generate_contexts(&p, &t, false).unwrap() {
        let start = Instant::now();
        let r = explore(&p, &c, &opts).unwrap();
        let elapsed = start.elapsed();
        ok &= r.states_explored <= 10_000 && elapsed <= Duration::from_secs(5);
        let init = m.init_state(&c).unwrap();
        for trace in &r.traces {
            let replays = replay(&m, &init, &trace.transitions()).is_ok_and(|s| m.is_deadlock(&s));
            if replays {
                if let Some(w) = interference_window(trace) {
                    witnessed = true;
                    details.push(format!("{c}: window {w:?}"));
                }
            }
        }
        details.push(format!("{c}: {} in {} states, {elapsed:?}", r.verdict, r.states_explored));
    }
    verdict(5, ok && witnessed && !without.is_empty(), &details.join("; "));
}

#[test]
fn criterion_6_original_deadlock() {
    let p = parse(ORIG).unwrap();
    let cs = generate_contexts(&p, &tasks(&["DB.register", "Worker.work"]), false).unwrap();
    let shown: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
    let start = Instant::now();
    let r = explore(&p, &cs[0], &ExploreOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let ok = shown == ["{[register]_db1, [work]_w1}"]
        && r.verdict == Verdict::DeadlockFound
        && elapsed <= Duration::from_secs(5);
    verdict(6, ok, &format!("{shown:?}: {} in {} states, {elapsed:?}", r.verdict, r.states_explored));
}

#[test]
fn criterion_7_oracle_equivalence() {
    let mut programs: Vec<(String, Program)> =
        common::corpus().into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    programs.extend((0..100).map(|s| (format!("seed {s}"), common::random_program(s))));
    let (mut cycles, mut mismatches) = (0, Vec::new());
    for (name, p) in &programs {
        for c in cycles_of(p) {
            cycles += 1;
            if initial_tasks(p, &c).unwrap() != initial_tasks_naive(p, &c).unwrap() {
                mismatches.push(format!("{name}: {c}"));
            }
        }
    }
    verdict(
        7,
        mismatches.is_empty(),
        &format!("{} programs, {cycles} cycles, {} discrepancies {mismatches:?}", programs.len(), mismatches.len()),
    );
}

/// Number of ways to split `k` distinct items into unlabeled groups, by
/// enumerating every labeling and keeping the distinct groupings.
fn brute_partitions(k: usize) -> usize {
    let mut seen: BTreeSet<BTreeSet<BTreeSet<usize>>> = BTreeSet::new();
    for code in 0..k.pow(k as u32) {
        let mut groups = vec![BTreeSet::new(); k];
        let mut c = code;
        for item in 0..k {
            groups[c % k].insert(item);
            c /= k;
        }
        seen.insert(groups.into_iter().filter(|g| !g.is_empty()).collect());
    }
    seen.len()
}

#[test]
fn criterion_8_structural_invariants() {
    let mut programs: Vec<Program> = common::corpus().into_iter().map(|(_, p)| p).collect();
    programs.extend((0..100).map(common::random_program));

    let mut loc_loc = 0;
    let mut over_budget = 0;
    for p in &programs {
        let g = build_dependency_graph(p, &resolve_references(p).unwrap()).unwrap();
        loc_loc += g.edges().iter().filter(|e| e.from.is_loc() && e.to.is_loc()).count();
        let pairs = Facts::new(p).pair_count();
        for c in enumerate_cycles(&g) {
            let (_, trace) = initial_tasks_traced(p, &c).unwrap();
            if trace.steps.len() > pairs {
                over_budget += 1;
            }
        }
    }

    let mut bell_bad = Vec::new();
    for k in 1..=4 {
        let p = common::flat_program(&[k]);
        let t: Vec<TaskCardinality> = (0..k)
            .map(|mi| TaskCardinality::one(AbstractTask::new("K0", format!("m{mi}"))))
            .collect();
        let n = generate_contexts(&p, &t, false).unwrap().len();
        if n != brute_partitions(k) {
            bell_bad.push((k, n));
        }
    }

    let mut disagree = Vec::new();
    let mut explored = 0;
    for (name, p) in common::corpus() {
        let mut all: BTreeSet<AbstractTask> = BTreeSet::new();
        for c in cycles_of(&p) {
            all.extend(initial_tasks(&p, &c).unwrap().into_iter().map(|t| t.task));
        }
        let t: Vec<TaskCardinality> = all.into_iter().map(TaskCardinality::one).collect();
        for c in generate_contexts(&p, &t, false).unwrap() {
            let dfs = explore(&p, &c, &ExploreOptions::default()).unwrap();
            let bfs_opts = ExploreOptions {
                order: SearchOrder::Bfs,
                ..Default::default()
            };
            let bfs = explore(&p, &c, &bfs_opts).unwrap();
            explored += 1;
            if dfs.verdict != bfs.verdict {
                disagree.push(format!("{name} {c}"));
            }
        }
    }

    verdict(
        8,
        loc_loc == 0 && over_budget == 0 && bell_bad.is_empty() && disagree.is_empty() && explored > 0,
        &format!(
            "loc->loc edges={loc_loc}, worklist runs over budget={over_budget}, bell mismatches={bell_bad:?}, \
             dfs/bfs disagreements={disagree:?} over {explored} contexts"
        ),
    );
}
