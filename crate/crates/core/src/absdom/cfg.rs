use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::syntax::{ProgramPoint, Stmt, StmtKind};

/// Statement-level control-flow graph of one task body. `if` and `while`
/// nodes stand for their condition; `return` has no successor.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub entry: ProgramPoint,
    /// Nodes reachable from `entry`, in source order.
    pub nodes: Vec<ProgramPoint>,
    pub edges: BTreeSet<(u32, u32)>,
    succ: BTreeMap<u32, Vec<u32>>,
    pred: BTreeMap<u32, Vec<u32>>,
}

impl Cfg {
    /// `None` for an empty body.
    pub fn build(body: &[Stmt]) -> Option<Cfg> {
        let mut succ: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut points = BTreeMap::new();
        let entry = link(body, None, &mut succ, &mut points)?;

        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::from([entry]);
        while let Some(n) = queue.pop_front() {
            if reachable.insert(n) {
                queue.extend(succ.get(&n).into_iter().flatten().copied());
            }
        }
        succ.retain(|n, _| reachable.contains(n));

        let mut edges = BTreeSet::new();
        let mut pred: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (&from, tos) in &succ {
            for &to in tos {
                if edges.insert((from, to)) {
                    pred.entry(to).or_default().push(from);
                }
            }
        }
        Some(Cfg {
            entry: points[&entry].clone(),
            nodes: reachable.iter().map(|id| points[id].clone()).collect(),
            edges,
            succ,
            pred,
        })
    }

    pub fn successors(&self, id: u32) -> &[u32] {
        self.succ.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn predecessors(&self, id: u32) -> &[u32] {
        self.pred.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.succ.contains_key(&id)
    }
}

// Wires `block` so that its last statement falls through to `next`; returns
// the block's first node, or `next` for an empty block.
fn link(
    block: &[Stmt],
    next: Option<u32>,
    succ: &mut BTreeMap<u32, Vec<u32>>,
    points: &mut BTreeMap<u32, ProgramPoint>,
) -> Option<u32> {
    let mut follow = next;
    for s in block.iter().rev() {
        let id = s.pp.id;
        points.insert(id, s.pp.clone());
        let targets: Vec<u32> = match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let t = link(then_block, follow, succ, points);
                let e = link(else_block, follow, succ, points);
                let mut v: Vec<u32> = t.into_iter().chain(e).collect();
                v.dedup();
                v
            }
            StmtKind::While { body, .. } => {
                let b = link(body, Some(id), succ, points).unwrap_or(id);
                std::iter::once(b).chain(follow).collect()
            }
            StmtKind::Return { .. } => Vec::new(),
            _ => follow.into_iter().collect(),
        };
        succ.insert(id, targets);
        follow = Some(id);
    }
    follow
}
