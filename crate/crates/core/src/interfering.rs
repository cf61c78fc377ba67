//! Deadlock-interfering tasks of an abstract cycle.
//!
//! A cycle's own tasks are not always enough to reproduce it: when an
//! instruction of the cycle may run after an `await`, other tasks can
//! interleave at that release point and change the fields the instruction
//! depends on. Those writers, and recursively whatever can interfere with
//! them, must be present in the initial contexts.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::absdom::{AbstractTask, Facts, InstrKind};
use crate::depgraph::{DeadlockCycle, EdgeKind};
use crate::error::{Error, Result};
use crate::syntax::{Program, ProgramPoint};

/// An instruction of a task, pending examination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Event {
    pub task: AbstractTask,
    pub pp: ProgramPoint,
}

impl Event {
    pub fn new(task: AbstractTask, pp: ProgramPoint) -> Self {
        Self { task, pp }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.task, self.pp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TaskCardinality {
    pub task: AbstractTask,
    pub min: u32,
    pub max: u32,
}

impl TaskCardinality {
    pub fn new(task: AbstractTask, min: u32, max: u32) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::Usage(format!(
                "cardinality of {task} must satisfy 1 <= min <= max, got {min}:{max}"
            )));
        }
        Ok(Self { task, min, max })
    }

    pub fn one(task: AbstractTask) -> Self {
        Self { task, min: 1, max: 1 }
    }
}

impl fmt::Display for TaskCardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} min={} max={}", self.task, self.min, self.max)
    }
}

/// One processed event of the worklist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorklistStep {
    pub event: Event,
    pub await_before: bool,
    pub fields: Vec<String>,
    /// Modifiers newly added to both the events and the answers.
    pub added: Vec<Event>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WorklistTrace {
    pub init_events: Vec<Event>,
    pub init_answers: Vec<Event>,
    pub steps: Vec<WorklistStep>,
}

impl fmt::Display for WorklistTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |xs: &[Event]| xs.iter().map(Event::to_string).collect::<Vec<_>>().join(",");
        writeln!(f, "init events=[{}]", list(&self.init_events))?;
        writeln!(f, "init answers=[{}]", list(&self.init_answers))?;
        for (i, s) in self.steps.iter().enumerate() {
            let action = if !s.await_before {
                "skip: no await before".to_string()
            } else if s.fields.is_empty() {
                "skip: no fields accessed".to_string()
            } else {
                format!("fields={{{}}} add=[{}]", s.fields.join(","), list(&s.added))
            };
            writeln!(f, "{:>3} {} {}", i + 1, s.event, action)?;
        }
        Ok(())
    }
}

/// Check that every edge of `c` talks about instructions of `p` of the
/// right kind.
fn validate(facts: &Facts, c: &DeadlockCycle) -> Result<()> {
    let mismatch = |msg: String| Err(Error::CycleMismatch(msg));
    for e in &c.edges {
        let owned = |pp: &ProgramPoint| facts.owner(pp) == Some(&e.in_task);
        if facts.task(&e.in_task).is_none() {
            return mismatch(format!("unknown task {}", e.in_task));
        }
        if e.kind == EdgeKind::TaskLoc {
            continue;
        }
        let Some(call) = &e.call_pp else {
            return mismatch(format!("edge at {} has no call point", e.pp));
        };
        if !owned(&e.pp) || !owned(call) {
            return mismatch(format!("{} or {} is not in {}", e.pp, call, e.in_task));
        }
        let sync_ok = matches!(
            (e.kind, facts.kind(&e.pp)),
            (EdgeKind::LocTask, Some(InstrKind::Get { .. })) | (EdgeKind::TaskTask, Some(InstrKind::Await { .. }))
        );
        if !sync_ok || !matches!(facts.kind(call), Some(InstrKind::Call { .. })) {
            return mismatch(format!("{} does not synchronize on the call at {}", e.pp, call));
        }
    }
    Ok(())
}

fn finish(p: &Program, answers: impl IntoIterator<Item = AbstractTask>) -> Vec<TaskCardinality> {
    let tasks: BTreeSet<AbstractTask> = answers.into_iter().collect();
    let mut out: Vec<TaskCardinality> = tasks.into_iter().map(TaskCardinality::one).collect();
    out.sort_by_key(|tc| tc.task.order_key(p));
    out
}

/// Interfering tasks of `c`, by the pending-events worklist.
pub fn initial_tasks(p: &Program, c: &DeadlockCycle) -> Result<Vec<TaskCardinality>> {
    initial_tasks_traced(p, c).map(|(tasks, _)| tasks)
}

/// Like [`initial_tasks`], also returning every step taken.
pub fn initial_tasks_traced(p: &Program, c: &DeadlockCycle) -> Result<(Vec<TaskCardinality>, WorklistTrace)> {
    let facts = Facts::new(p);
    validate(&facts, c)?;

    let mut events: VecDeque<Event> = VecDeque::new();
    let mut answers: Vec<Event> = Vec::new();
    let mut queued: BTreeSet<Event> = BTreeSet::new();
    let mut push_front = |ev: Event, events: &mut VecDeque<Event>| {
        if queued.insert(ev.clone()) {
            events.push_front(ev);
        }
    };
    for e in &c.edges {
        let call = e.call_pp.clone().unwrap_or_else(|| e.pp.clone());
        match e.kind {
            EdgeKind::LocTask => {
                push_front(Event::new(e.in_task.clone(), e.pp.clone()), &mut events);
                push_front(Event::new(e.in_task.clone(), call), &mut events);
                let ans = Event::new(e.in_task.clone(), e.pp.clone());
                if !answers.contains(&ans) {
                    answers.insert(0, ans);
                }
            }
            EdgeKind::TaskTask => {
                push_front(Event::new(e.in_task.clone(), e.pp.clone()), &mut events);
                push_front(Event::new(e.in_task.clone(), call), &mut events);
            }
            EdgeKind::TaskLoc => {}
        }
    }
    let mut trace = WorklistTrace {
        init_events: events.iter().cloned().collect(),
        init_answers: answers.clone(),
        steps: Vec::new(),
    };

    while let Some(ev) = events.pop_front() {
        let await_before = facts.has_await_before(&ev.task, &ev.pp)?;
        let mut step = WorklistStep {
            event: ev.clone(),
            await_before,
            fields: Vec::new(),
            added: Vec::new(),
        };
        if await_before {
            let fields = facts.accessed_fields(&ev.task, &ev.pp)?;
            for f in &fields {
                for (t, l) in facts.field_modifiers(&ev.task.class_name, f)? {
                    let m = Event::new(t.clone(), l.clone());
                    if !answers.contains(&m) && !step.added.contains(&m) {
                        step.added.push(m);
                    }
                }
            }
            step.fields = fields.into_iter().collect();
            for m in step.added.iter().rev() {
                push_front(m.clone(), &mut events);
            }
            answers.splice(0..0, step.added.iter().cloned());
        }
        trace.steps.push(step);
    }

    Ok((finish(p, answers.into_iter().map(|e| e.task)), trace))
}

/// How the naive evaluation treats await-preceded instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clause3 {
    /// Only gets of the cycle and field modifiers contribute tasks, as in
    /// the worklist.
    #[default]
    Worklist,
    /// Every await-preceded instruction contributes its own task as well.
    Literal,
}

/// Interfering tasks of `c` by Kleene iteration over (task, instruction)
/// pairs. Independent of the worklist; used to cross-check it.
pub fn initial_tasks_naive(p: &Program, c: &DeadlockCycle) -> Result<Vec<TaskCardinality>> {
    initial_tasks_naive_with(p, c, Clause3::Worklist)
}

pub fn initial_tasks_naive_with(p: &Program, c: &DeadlockCycle, mode: Clause3) -> Result<Vec<TaskCardinality>> {
    let facts = Facts::new(p);
    validate(&facts, c)?;

    let mut gets: BTreeSet<(AbstractTask, u32)> = BTreeSet::new();
    let mut reached: BTreeSet<(AbstractTask, ProgramPoint)> = BTreeSet::new();
    for e in &c.edges {
        if e.kind == EdgeKind::TaskLoc {
            continue;
        }
        if e.kind == EdgeKind::LocTask {
            gets.insert((e.in_task.clone(), e.pp.id));
        }
        reached.insert((e.in_task.clone(), e.pp.clone()));
        if let Some(call) = &e.call_pp {
            reached.insert((e.in_task.clone(), call.clone()));
        }
    }

    let mut modifiers: BTreeSet<(AbstractTask, u32)> = BTreeSet::new();
    loop {
        let mut next = reached.clone();
        for (t, i) in &reached {
            if !facts.has_await_before(t, i)? {
                continue;
            }
            for f in facts.accessed_fields(t, i)? {
                for (tm, im) in facts.field_modifiers(&t.class_name, &f)? {
                    modifiers.insert((tm.clone(), im.id));
                    next.insert((tm.clone(), im.clone()));
                }
            }
        }
        if next == reached {
            break;
        }
        reached = next;
    }

    let mut tasks = Vec::new();
    for (t, i) in &reached {
        let key = (t.clone(), i.id);
        let contributes = gets.contains(&key)
            || modifiers.contains(&key)
            || (mode == Clause3::Literal && facts.has_await_before(t, i)?);
        if contributes {
            tasks.push(t.clone());
        }
    }
    Ok(finish(p, tasks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absdom::resolve_references;
    use crate::depgraph::{build_dependency_graph, enumerate_cycles};
    use crate::syntax::parse;

    fn cycles(src: &str) -> (Program, Vec<DeadlockCycle>) {
        let p = parse(src).unwrap();
        let g = build_dependency_graph(&p, &resolve_references(&p).unwrap()).unwrap();
        let c = enumerate_cycles(&g);
        (p, c)
    }

    fn names(ts: &[TaskCardinality]) -> Vec<String> {
        ts.iter().map(|t| t.task.to_string()).collect()
    }

    #[test]
    fn fixture_walkthrough() {
        let (p, cs) = cycles(include_str!("../../../corpus/db_workers_mod.act"));
        let (tasks, trace) = initial_tasks_traced(&p, &cs[0]).unwrap();
        assert_eq!(names(&tasks), ["DB.register", "DB.makesConnection", "Worker.work"]);
        assert!(tasks.iter().all(|t| t.min == 1 && t.max == 1));
        let shown: Vec<String> = trace.init_events.iter().map(Event::to_string).collect();
        assert_eq!(
            shown,
            [
                "(Worker.work,pp:fgetdata)",
                "(Worker.work,pp:work)",
                "(DB.register,pp:fping)",
                "(DB.register,pp:register)"
            ]
        );
        assert_eq!(trace.init_answers.len(), 2);
        assert_eq!(initial_tasks_naive(&p, &cs[0]).unwrap(), tasks);
    }

    #[test]
    fn mutual_get_gives_the_get_tasks() {
        let (p, cs) = cycles(include_str!("../../../corpus/mutual_get.act"));
        assert_eq!(names(&initial_tasks(&p, &cs[0]).unwrap()), ["A.run", "B.run"]);
    }

    #[test]
    fn literal_clause_three_differs_on_await_chain() {
        let (p, cs) = cycles(include_str!("../../../corpus/await_chain.act"));
        let through_q = cs
            .iter()
            .find(|c| c.edges.iter().any(|e| e.pp.is("m_await2")))
            .unwrap();
        assert_eq!(names(&initial_tasks(&p, through_q).unwrap()), ["B.q"]);
        assert_eq!(names(&initial_tasks_naive(&p, through_q).unwrap()), ["B.q"]);
        assert_eq!(
            names(&initial_tasks_naive_with(&p, through_q, Clause3::Literal).unwrap()),
            ["A.m", "B.q"]
        );
    }

    #[test]
    fn foreign_cycle_is_rejected() {
        let (_, cs) = cycles(include_str!("../../../corpus/db_workers_mod.act"));
        let (other, _) = cycles(include_str!("../../../corpus/mutual_get.act"));
        assert!(matches!(initial_tasks(&other, &cs[0]), Err(Error::CycleMismatch(_))));
        assert!(matches!(initial_tasks_naive(&other, &cs[0]), Err(Error::CycleMismatch(_))));
    }

    #[test]
    fn invalid_cardinality() {
        assert!(TaskCardinality::new(AbstractTask::new("A", "m"), 0, 1).is_err());
        assert!(TaskCardinality::new(AbstractTask::new("A", "m"), 2, 1).is_err());
        assert!(TaskCardinality::new(AbstractTask::new("A", "m"), 1, 2).is_ok());
    }
}
