use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use indexmap::IndexSet;
use serde::Serialize;

use super::machine::{Machine, TraceStep, Transition};
use super::state::{State, Status};
use crate::contexts::InitialContext;
use crate::error::{Error, Result};
use crate::syntax::Program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_states: 100_000,
            max_depth: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum SearchOrder {
    #[default]
    Dfs,
    Bfs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExploreOptions {
    pub limits: Limits,
    pub order: SearchOrder,
    /// Also report stuck cycles of tasks while other tasks keep running.
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    DeadlockFound,
    NoDeadlock,
    BoundHit,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::DeadlockFound => "deadlock found",
            Verdict::NoDeadlock => "no deadlock (exhaustive)",
            Verdict::BoundHit => "bound hit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// Other tasks could still run when the trace ends.
    pub partial: bool,
    /// Tasks left hanging, as `location: task at pp (status)`.
    pub stuck: Vec<String>,
}

impl Trace {
    pub fn transitions(&self) -> Vec<Transition> {
        self.steps.iter().map(|s| s.transition.clone()).collect()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{:>4}  {s}", i + 1)?;
        }
        for s in &self.stuck {
            writeln!(f, "      stuck: {s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplorationReport {
    pub verdict: Verdict,
    pub states_explored: usize,
    pub traces: Vec<Trace>,
}

struct Node {
    parent: Option<(usize, TraceStep)>,
    depth: usize,
}

/// Explore every interleaving from the locations of `c`.
pub fn explore(p: &Program, c: &InitialContext, opts: &ExploreOptions) -> Result<ExplorationReport> {
    let m = Machine::new(p);
    let init = m.init_state(c)?;
    explore_from(&m, init, opts)
}

/// Explore every interleaving of the program's main block.
pub fn explore_main(p: &Program, opts: &ExploreOptions) -> Result<ExplorationReport> {
    let m = Machine::new(p);
    let init = m.init_main_state();
    explore_from(&m, init, opts)
}

pub fn explore_from(m: &Machine<'_>, init: State, opts: &ExploreOptions) -> Result<ExplorationReport> {
    if opts.limits.max_states == 0 || opts.limits.max_depth == 0 {
        return Err(Error::Usage("exploration limits must be positive".into()));
    }
    let mut visited: IndexSet<State> = IndexSet::new();
    let mut nodes: Vec<Node> = Vec::new();
    visited.insert(init);
    nodes.push(Node { parent: None, depth: 0 });
    let mut frontier: VecDeque<usize> = VecDeque::from([0]);
    let mut bound_hit = false;
    let mut traces = Vec::new();
    let mut partial_seen: BTreeSet<Vec<String>> = BTreeSet::new();

    while let Some(idx) = match opts.order {
        SearchOrder::Dfs => frontier.pop_back(),
        SearchOrder::Bfs => frontier.pop_front(),
    } {
        let state = visited[idx].clone();
        let enabled = m.enabled(&state);
        if enabled.is_empty() {
            if state.has_unfinished_work() {
                traces.push(trace_to(m, &visited, &nodes, idx, false));
            }
            continue;
        }
        if opts.partial {
            if let Some(locs) = m.waits_for_cycle(&state) {
                let key: Vec<String> = locs.iter().map(|&l| describe_loc(m, &state, l)).collect();
                if partial_seen.insert(key) {
                    traces.push(trace_to(m, &visited, &nodes, idx, true));
                }
            }
        }
        if nodes[idx].depth >= opts.limits.max_depth {
            bound_hit = true;
            continue;
        }
        for t in &enabled {
            let (next, step) = m.apply(&state, t)?;
            if visited.contains(&next) {
                continue;
            }
            if visited.len() >= opts.limits.max_states {
                bound_hit = true;
                continue;
            }
            let (ni, _) = visited.insert_full(next);
            nodes.push(Node {
                parent: Some((idx, step)),
                depth: nodes[idx].depth + 1,
            });
            frontier.push_back(ni);
        }
    }

    let verdict = if !traces.is_empty() {
        Verdict::DeadlockFound
    } else if bound_hit {
        Verdict::BoundHit
    } else {
        Verdict::NoDeadlock
    };
    Ok(ExplorationReport {
        verdict,
        states_explored: visited.len(),
        traces,
    })
}

fn describe_loc(m: &Machine<'_>, s: &State, li: usize) -> String {
    let l = &s.locs[li];
    let name = s.loc_name(li);
    match &l.status {
        Status::Blocked { frame, .. } => format!("{name}: {} blocked on get", m.task_of(frame)),
        Status::Active(frame) => format!("{name}: {} active", m.task_of(frame)),
        Status::Idle => format!("{name}: idle"),
    }
}

fn stuck(m: &Machine<'_>, s: &State) -> Vec<String> {
    let mut out = Vec::new();
    for (li, l) in s.locs.iter().enumerate() {
        let name = s.loc_name(li);
        if let Status::Blocked { frame, .. } = &l.status {
            out.push(format!("{name}: {} blocked on get", m.task_of(frame)));
        }
        for q in &l.queue {
            let what = match q {
                super::state::Queued::Pending(_) => "pending",
                super::state::Queued::Suspended { .. } => "suspended on await",
            };
            out.push(format!("{name}: {} {what}", m.task_of(q.frame())));
        }
    }
    out
}

fn trace_to(m: &Machine<'_>, visited: &IndexSet<State>, nodes: &[Node], idx: usize, partial: bool) -> Trace {
    let mut steps = Vec::new();
    let mut cur = idx;
    while let Some((parent, step)) = &nodes[cur].parent {
        steps.push(step.clone());
        cur = *parent;
    }
    steps.reverse();
    Trace {
        steps,
        partial,
        stuck: stuck(m, &visited[idx]),
    }
}

/// Fire `transitions` in order from `init`.
pub fn replay(m: &Machine<'_>, init: &State, transitions: &[Transition]) -> Result<State> {
    let mut s = init.clone();
    for t in transitions {
        if !m.enabled(&s).contains(t) {
            return Err(Error::Runtime {
                pp: String::new(),
                message: format!("transition {t:?} is not enabled during replay"),
            });
        }
        s = m.apply(&s, t)?.0;
    }
    Ok(s)
}
