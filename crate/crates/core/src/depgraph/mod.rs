//! Abstract dependency graph over abstract locations and tasks, and its
//! elementary cycles.
//!
//! Edges, for a task `t` running on abstract location `l`:
//!
//! * `l -> m'` ([`EdgeKind::LocTask`]) for a `get` in `t` on a future of a
//!   call to `m'`: the blocking get freezes `l` until `m'` finishes;
//! * `t -> m'` ([`EdgeKind::TaskTask`]) for an `await` on such a future;
//! * `m' -> l'` ([`EdgeKind::TaskLoc`]) for every location `l'` that `m'` is
//!   invoked on: the task must be scheduled there. These edges carry the
//!   entry point of `m'`.

mod cycles;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::absdom::{scopes, AbstractLocation, AbstractTask, PointsTo};
use crate::error::{Error, Result};
use crate::syntax::{walk_stmts, Program, ProgramPoint, StmtKind};

pub use cycles::{elementary_circuits, enumerate_cycles};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepNode {
    Loc(AbstractLocation),
    Task(AbstractTask),
}

impl DepNode {
    pub fn is_loc(&self) -> bool {
        matches!(self, DepNode::Loc(_))
    }

    pub fn as_task(&self) -> Option<&AbstractTask> {
        match self {
            DepNode::Task(t) => Some(t),
            DepNode::Loc(_) => None,
        }
    }
}

impl fmt::Display for DepNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepNode::Loc(l) => l.fmt(f),
            DepNode::Task(t) => t.fmt(f),
        }
    }
}

impl Serialize for DepNode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EdgeKind {
    TaskTask,
    LocTask,
    TaskLoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DepEdge {
    pub from: DepNode,
    pub to: DepNode,
    /// The synchronization instruction (or, for `TaskLoc`, the entry point).
    pub pp: ProgramPoint,
    pub in_task: AbstractTask,
    pub kind: EdgeKind,
    /// The asynchronous call producing the synchronized future; set exactly
    /// for `TaskTask` and `LocTask` edges.
    pub call_pp: Option<ProgramPoint>,
}

impl DepEdge {
    /// `-[pp:tk]->` annotation with the method name of the waiting task.
    pub fn annotation(&self) -> String {
        format!("{}:{}", self.pp, self.in_task.method_name)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DepGraph {
    nodes: Vec<DepNode>,
    edges: Vec<DepEdge>,
    index: HashMap<DepNode, usize>,
    // (from, to) node indices per edge
    ends: Vec<(usize, usize)>,
}

impl DepGraph {
    /// Assemble a graph, checking the edge taxonomy. Node order is the total
    /// order used to pick the first node of each cycle.
    pub fn new(nodes: Vec<DepNode>, edges: Vec<DepEdge>) -> Result<DepGraph> {
        let index: HashMap<DepNode, usize> =
            nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::MalformedGraph("duplicate node".into()));
        }
        let mut ends = Vec::with_capacity(edges.len());
        for e in &edges {
            let consistent = match e.kind {
                EdgeKind::TaskTask => !e.from.is_loc() && !e.to.is_loc() && e.call_pp.is_some(),
                EdgeKind::LocTask => e.from.is_loc() && !e.to.is_loc() && e.call_pp.is_some(),
                EdgeKind::TaskLoc => !e.from.is_loc() && e.to.is_loc(),
            };
            if e.from.is_loc() && e.to.is_loc() {
                return Err(Error::MalformedGraph(format!(
                    "location-location edge {} -> {}",
                    e.from, e.to
                )));
            }
            if !consistent {
                return Err(Error::MalformedGraph(format!(
                    "{:?} edge {} -> {} has inconsistent endpoints",
                    e.kind, e.from, e.to
                )));
            }
            let lookup = |n: &DepNode| {
                index
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::MalformedGraph(format!("edge endpoint {n} is not a node")))
            };
            ends.push((lookup(&e.from)?, lookup(&e.to)?));
        }
        Ok(DepGraph {
            nodes,
            edges,
            index,
            ends,
        })
    }

    pub fn nodes(&self) -> &[DepNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DepEdge] {
        &self.edges
    }

    pub fn node_index(&self, n: &DepNode) -> Option<usize> {
        self.index.get(n).copied()
    }

    /// (from, to) node indices of edge `i`.
    pub fn ends(&self, i: usize) -> (usize, usize) {
        self.ends[i]
    }
}

/// Build the abstract dependency graph of `p`.
pub fn build_dependency_graph(p: &Program, pts: &PointsTo) -> Result<DepGraph> {
    let mut edges: Vec<DepEdge> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |e: DepEdge, edges: &mut Vec<DepEdge>| {
        let key = (e.from.clone(), e.to.clone(), e.pp.id, e.in_task.clone());
        if seen.insert(key) {
            edges.push(e);
        }
    };

    let scopes = scopes(p);
    for sc in scopes.iter().filter(|sc| pts.is_live(&sc.task)) {
        // future -> (call pp, callees)
        let mut calls: HashMap<&str, (ProgramPoint, Vec<AbstractTask>)> = HashMap::new();
        let mut stmts = Vec::new();
        walk_stmts(sc.body, &mut |s| stmts.push(s));
        for s in &stmts {
            if let StmtKind::AsyncCall { fut, method, target, .. } = &s.kind {
                let targets = pts.call_targets(&s.pp);
                if targets.is_empty() {
                    return Err(Error::UnresolvableReference {
                        reference: format!("{target:?}"),
                        pp: s.pp.to_string(),
                    });
                }
                let callees: Vec<AbstractTask> = targets
                    .iter()
                    .map(|o| AbstractTask::new(&o.class_name, method))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if let Some(f) = fut {
                    calls.insert(f, (s.pp.clone(), callees));
                }
            }
        }
        for s in &stmts {
            match &s.kind {
                StmtKind::GetFut { fut, .. } => {
                    let (call_pp, callees) = &calls[fut.as_str()];
                    for loc in pts.runs_on(&sc.task) {
                        for callee in callees {
                            push(
                                DepEdge {
                                    from: DepNode::Loc(loc.clone()),
                                    to: DepNode::Task(callee.clone()),
                                    pp: s.pp.clone(),
                                    in_task: sc.task.clone(),
                                    kind: EdgeKind::LocTask,
                                    call_pp: Some(call_pp.clone()),
                                },
                                &mut edges,
                            );
                        }
                    }
                }
                StmtKind::AwaitFut { fut } => {
                    let (call_pp, callees) = &calls[fut.as_str()];
                    for callee in callees {
                        push(
                            DepEdge {
                                from: DepNode::Task(sc.task.clone()),
                                to: DepNode::Task(callee.clone()),
                                pp: s.pp.clone(),
                                in_task: sc.task.clone(),
                                kind: EdgeKind::TaskTask,
                                call_pp: Some(call_pp.clone()),
                            },
                            &mut edges,
                        );
                    }
                }
                _ => {}
            }
        }
    }
    for task in pts.live().iter().filter(|t| !t.is_main()) {
        let entry = p
            .method(&task.class_name, &task.method_name)
            .expect("live tasks are declared")
            .entry_pp
            .clone();
        for loc in pts.runs_on(task) {
            push(
                DepEdge {
                    from: DepNode::Task(task.clone()),
                    to: DepNode::Loc(loc.clone()),
                    pp: entry.clone(),
                    in_task: task.clone(),
                    kind: EdgeKind::TaskLoc,
                    call_pp: None,
                },
                &mut edges,
            );
        }
    }

    let mut locs: Vec<AbstractLocation> = pts.locations().cloned().collect();
    locs.sort();
    let mut tasks: Vec<AbstractTask> = pts.live().iter().cloned().collect();
    tasks.sort_by_key(|t| t.order_key(p));
    let nodes: Vec<DepNode> = locs
        .into_iter()
        .map(DepNode::Loc)
        .chain(tasks.into_iter().map(DepNode::Task))
        .collect();
    edges.sort_by_key(|e| {
        let rank = |n: &DepNode| nodes.iter().position(|m| m == n);
        (rank(&e.from), rank(&e.to), e.pp.id)
    });
    DepGraph::new(nodes, edges)
}

/// An elementary cycle, as the sequence of its edges starting from the
/// least node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DeadlockCycle {
    pub edges: Vec<DepEdge>,
    /// Indices of `edges` in the graph they came from.
    pub edge_ids: Vec<usize>,
}

impl DeadlockCycle {
    pub fn nodes(&self) -> Vec<&DepNode> {
        self.edges.iter().map(|e| &e.from).collect()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

impl fmt::Display for DeadlockCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(first) = self.edges.first() else {
            return Ok(());
        };
        write!(f, "{}", first.from)?;
        for e in &self.edges {
            write!(f, " -[{}]-> {}", e.annotation(), e.to)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absdom::resolve_references;
    use crate::syntax::parse;

    fn graph(src: &str) -> (Program, DepGraph) {
        let p = parse(src).unwrap();
        let pts = resolve_references(&p).unwrap();
        let g = build_dependency_graph(&p, &pts).unwrap();
        (p, g)
    }

    #[test]
    fn fixture_edges() {
        let (_, g) = graph(include_str!("../../../../corpus/db_workers_mod.act"));
        let shown: Vec<String> = g
            .edges()
            .iter()
            .map(|e| format!("{} -[{}]-> {}", e.from, e.annotation(), e.to))
            .collect();
        for want in [
            "obj@pp:newdb -[pp:register:register]-> Worker.ping",
            "Worker.ping -[pp:ping:ping]-> obj@pp:neww",
            "obj@pp:neww -[pp:work:work]-> DB.getData",
            "DB.getData -[pp:getD:getData]-> obj@pp:newdb",
            "DB.register -[pp:await:register]-> DB.getData",
        ] {
            assert!(shown.contains(&want.to_string()), "missing {want} in {shown:#?}");
        }
        assert!(g.edges().iter().all(|e| !(e.from.is_loc() && e.to.is_loc())));
    }

    #[test]
    fn no_sync_means_only_invocation_edges() {
        let (_, g) = graph(
            "class A { Unit m() { Fut f = this ! n(); } Unit n() { } }
             main { A a = new A(); Fut f = a ! m(); }",
        );
        assert!(!g.edges().is_empty());
        assert!(g.edges().iter().all(|e| e.kind == EdgeKind::TaskLoc));
    }

    #[test]
    fn sync_edges_sit_on_sync_instructions() {
        let (p, g) = graph(include_str!("../../../../corpus/db_workers_orig.act"));
        for e in g.edges() {
            let stmt = p.all_stmts().into_iter().find(|s| s.pp == e.pp).unwrap();
            match e.kind {
                EdgeKind::LocTask => assert!(matches!(stmt.kind, StmtKind::GetFut { .. })),
                EdgeKind::TaskTask => assert!(matches!(stmt.kind, StmtKind::AwaitFut { .. })),
                EdgeKind::TaskLoc => {}
            }
        }
    }

    #[test]
    fn fixture_has_the_get_get_cycle() {
        for src in [
            include_str!("../../../../corpus/db_workers_orig.act"),
            include_str!("../../../../corpus/db_workers_mod.act"),
        ] {
            let (_, g) = graph(src);
            let cycles: Vec<String> = enumerate_cycles(&g).iter().map(|c| c.to_string()).collect();
            assert_eq!(
                cycles,
                ["obj@pp:newdb -[pp:register:register]-> Worker.ping -[pp:ping:ping]-> obj@pp:neww \
                  -[pp:work:work]-> DB.getData -[pp:getD:getData]-> obj@pp:newdb"]
            );
        }
    }

    #[test]
    fn mutual_get() {
        let (_, g) = graph(include_str!("../../../../corpus/mutual_get.act"));
        let cycles = enumerate_cycles(&g);
        assert_eq!(cycles.len(), 1);
        let kinds: Vec<EdgeKind> = cycles[0].edges.iter().map(|e| e.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == EdgeKind::LocTask).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == EdgeKind::TaskLoc).count(), 2);
        assert_eq!(cycles[0].nodes().len(), 4);
    }

    #[test]
    fn rejects_location_location_edges() {
        let a = DepNode::Loc(AbstractLocation::main());
        let b = DepNode::Loc(AbstractLocation::created_at(ProgramPoint::new(1), "B"));
        let e = DepEdge {
            from: a.clone(),
            to: b.clone(),
            pp: ProgramPoint::new(0),
            in_task: AbstractTask::main(),
            kind: EdgeKind::TaskLoc,
            call_pp: None,
        };
        assert!(matches!(DepGraph::new(vec![a, b], vec![e]), Err(Error::MalformedGraph(_))));
    }
}
