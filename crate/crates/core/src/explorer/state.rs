use std::collections::{BTreeMap, HashMap};

use crate::contexts::LocationInstance;
use crate::syntax::{Ident, Literal, ProgramPoint};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Unit,
    /// Index into [`State::locs`].
    Ref(usize),
    /// Index into [`State::futures`].
    Fut(usize),
}

impl From<&Literal> for Value {
    fn from(l: &Literal) -> Self {
        match l {
            Literal::Int(i) => Value::Int(*i),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Unit => Value::Unit,
        }
    }
}

/// A task's activation: which body, where in it, and its locals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame {
    /// (class, method) indices; `None` for the main block.
    pub method: Option<(usize, usize)>,
    pub pc: usize,
    pub locals: BTreeMap<Ident, Value>,
    /// Future this task resolves, if anybody can observe it.
    pub result: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Queued {
    Pending(Frame),
    /// Suspended at the `await` at `frame.pc`.
    Suspended { frame: Frame, fut: usize },
}

impl Queued {
    pub fn frame(&self) -> &Frame {
        match self {
            Queued::Pending(f) | Queued::Suspended { frame: f, .. } => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Idle,
    Active(Frame),
    /// Frozen on the `get` at `frame.pc`.
    Blocked { frame: Frame, fut: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Main,
    Context(LocationInstance),
    Created(ProgramPoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loc {
    pub origin: Origin,
    /// `None` for the location running main.
    pub class: Option<usize>,
    pub fields: Vec<Value>,
    pub status: Status,
    /// Unordered: any entry may be picked when the location is idle.
    pub queue: Vec<Queued>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct State {
    pub locs: Vec<Loc>,
    /// `None` while unresolved.
    pub futures: Vec<Option<Value>>,
}

impl State {
    pub fn loc_name(&self, i: usize) -> String {
        match &self.locs[i].origin {
            Origin::Main => "main".into(),
            Origin::Context(inst) => inst.to_string(),
            Origin::Created(pp) => format!("obj{i}@{pp}"),
        }
    }

    /// Whether some task has not finished.
    pub fn has_unfinished_work(&self) -> bool {
        self.locs
            .iter()
            .any(|l| l.status != Status::Idle || !l.queue.is_empty())
    }

    /// Sort queues and renumber futures by first occurrence, dropping the
    /// ones nobody refers to.
    pub fn canonicalize(mut self) -> State {
        for l in &mut self.locs {
            l.queue.sort_by_cached_key(erased);
        }
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut order: Vec<usize> = Vec::new();
        let mut see = |f: &mut usize| {
            let next = map.len();
            let n = *map.entry(*f).or_insert_with(|| {
                order.push(*f);
                next
            });
            *f = n;
        };
        for l in &mut self.locs {
            for v in &mut l.fields {
                visit_value(v, &mut see);
            }
            match &mut l.status {
                Status::Idle => {}
                Status::Active(frame) => visit_frame(frame, &mut see),
                Status::Blocked { frame, fut } => {
                    visit_frame(frame, &mut see);
                    see(fut);
                }
            }
            for q in &mut l.queue {
                match q {
                    Queued::Pending(frame) => visit_frame(frame, &mut see),
                    Queued::Suspended { frame, fut } => {
                        visit_frame(frame, &mut see);
                        see(fut);
                    }
                }
            }
        }
        self.futures = order.iter().map(|&old| self.futures[old].clone()).collect();
        self
    }
}

fn visit_value(v: &mut Value, see: &mut impl FnMut(&mut usize)) {
    if let Value::Fut(f) = v {
        see(f);
    }
}

fn visit_frame(frame: &mut Frame, see: &mut impl FnMut(&mut usize)) {
    for v in frame.locals.values_mut() {
        visit_value(v, see);
    }
    if let Some(r) = &mut frame.result {
        see(r);
    }
}

// Queue entry with future identities blanked, so sorting does not depend
// on the numbering that sorting is about to fix.
fn erased(q: &Queued) -> Queued {
    let blank = |frame: &Frame| Frame {
        locals: frame
            .locals
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    Value::Fut(_) => Value::Fut(0),
                    other => other.clone(),
                };
                (k.clone(), v)
            })
            .collect(),
        result: frame.result.map(|_| 0),
        ..frame.clone()
    };
    match q {
        Queued::Pending(f) => Queued::Pending(blank(f)),
        Queued::Suspended { frame, .. } => Queued::Suspended {
            frame: blank(frame),
            fut: 0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(result: Option<usize>) -> Frame {
        Frame {
            method: Some((0, 0)),
            pc: 0,
            locals: BTreeMap::new(),
            result,
        }
    }

    #[test]
    fn futures_are_renumbered_and_collected() {
        let s = State {
            locs: vec![Loc {
                origin: Origin::Main,
                class: None,
                fields: vec![],
                status: Status::Blocked {
                    frame: frame(None),
                    fut: 2,
                },
                queue: vec![Queued::Pending(frame(Some(0)))],
            }],
            futures: vec![None, Some(Value::Unit), None],
        };
        let c = s.canonicalize();
        assert_eq!(c.futures, vec![None, None]);
        assert!(matches!(c.locs[0].status, Status::Blocked { fut: 0, .. }));
        assert_eq!(c.locs[0].queue[0].frame().result, Some(1));
    }

    #[test]
    fn queue_order_does_not_matter() {
        let mk = |a: usize, b: usize| State {
            locs: vec![Loc {
                origin: Origin::Main,
                class: None,
                fields: vec![],
                status: Status::Idle,
                queue: vec![
                    Queued::Pending(Frame {
                        method: Some((0, a)),
                        ..frame(None)
                    }),
                    Queued::Pending(Frame {
                        method: Some((0, b)),
                        ..frame(None)
                    }),
                ],
            }],
            futures: vec![],
        };
        assert_eq!(mk(0, 1).canonicalize(), mk(1, 0).canonicalize());
    }
}
