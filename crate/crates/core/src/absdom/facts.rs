use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{scopes, AbstractTask, Cfg};
use crate::error::{Error, Result};
use crate::syntax::{walk_stmts, Ident, Program, ProgramPoint, StmtKind};

/// What an instruction is, as far as interference is concerned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    Call { fut: Option<Ident>, method: Ident },
    Await { fut: Ident },
    Get { fut: Ident },
    Other,
}

#[derive(Debug, Clone)]
pub struct TaskFacts {
    pub cfg: Cfg,
    accessed: BTreeMap<u32, BTreeSet<Ident>>,
    await_before: BTreeMap<u32, bool>,
    /// Number of times some node's accessed-field set grew before the
    /// dataflow stabilized.
    pub growth_steps: usize,
}

/// Per-instruction facts for every task of a program.
#[derive(Debug, Clone)]
pub struct Facts {
    tasks: BTreeMap<AbstractTask, TaskFacts>,
    owner: BTreeMap<u32, AbstractTask>,
    points: BTreeMap<u32, ProgramPoint>,
    kinds: BTreeMap<u32, InstrKind>,
    modifiers: BTreeMap<(Ident, Ident), Vec<(AbstractTask, ProgramPoint)>>,
}

impl Facts {
    pub fn new(p: &Program) -> Facts {
        let mut facts = Facts {
            tasks: BTreeMap::new(),
            owner: BTreeMap::new(),
            points: BTreeMap::new(),
            kinds: BTreeMap::new(),
            modifiers: BTreeMap::new(),
        };
        for c in &p.classes {
            for f in &c.fields {
                facts.modifiers.insert((c.name.clone(), f.name.clone()), Vec::new());
            }
        }
        for scope in scopes(p) {
            walk_stmts(scope.body, &mut |s| {
                facts.owner.insert(s.pp.id, scope.task.clone());
                facts.points.insert(s.pp.id, s.pp.clone());
                let kind = match &s.kind {
                    StmtKind::AsyncCall { fut, method, .. } => InstrKind::Call {
                        fut: fut.clone(),
                        method: method.clone(),
                    },
                    StmtKind::AwaitFut { fut } => InstrKind::Await { fut: fut.clone() },
                    StmtKind::GetFut { fut, .. } => InstrKind::Get { fut: fut.clone() },
                    _ => InstrKind::Other,
                };
                facts.kinds.insert(s.pp.id, kind);
                if let (Some(field), Some(c)) = (s.written_field(), scope.class) {
                    facts
                        .modifiers
                        .get_mut(&(c.name.clone(), field.to_string()))
                        .expect("checked field")
                        .push((scope.task.clone(), s.pp.clone()));
                }
            });
            if let Some(cfg) = Cfg::build(scope.body) {
                let tf = TaskFacts::compute(cfg, scope.body);
                facts.tasks.insert(scope.task, tf);
            }
        }
        facts
    }

    pub fn tasks(&self) -> impl Iterator<Item = (&AbstractTask, &TaskFacts)> {
        self.tasks.iter()
    }

    pub fn task(&self, task: &AbstractTask) -> Option<&TaskFacts> {
        self.tasks.get(task)
    }

    /// The task an instruction belongs to.
    pub fn owner(&self, pp: &ProgramPoint) -> Option<&AbstractTask> {
        self.owner.get(&pp.id)
    }

    pub fn point(&self, id: u32) -> Option<&ProgramPoint> {
        self.points.get(&id)
    }

    pub fn kind(&self, pp: &ProgramPoint) -> Option<&InstrKind> {
        self.kinds.get(&pp.id)
    }

    /// Number of (task, instruction) pairs in the program.
    pub fn pair_count(&self) -> usize {
        self.owner.len()
    }

    fn check_member(&self, task: &AbstractTask, pp: &ProgramPoint) -> Result<&TaskFacts> {
        match (self.owner.get(&pp.id), self.tasks.get(task)) {
            (Some(t), Some(tf)) if t == task => Ok(tf),
            _ => Err(Error::PointNotInTask {
                task: task.to_string(),
                pp: pp.to_string(),
            }),
        }
    }

    /// Fields read or written on some path from the task entry to `pp`,
    /// `pp` included.
    pub fn accessed_fields(&self, task: &AbstractTask, pp: &ProgramPoint) -> Result<BTreeSet<Ident>> {
        let tf = self.check_member(task, pp)?;
        Ok(tf.accessed.get(&pp.id).cloned().unwrap_or_default())
    }

    /// Whether some path from the task entry reaches `pp` through an
    /// `await` strictly before it.
    pub fn has_await_before(&self, task: &AbstractTask, pp: &ProgramPoint) -> Result<bool> {
        let tf = self.check_member(task, pp)?;
        Ok(tf.await_before.get(&pp.id).copied().unwrap_or(false))
    }

    /// Instructions writing `class.field`, with the task holding each.
    pub fn field_modifiers(&self, class: &str, field: &str) -> Result<&[(AbstractTask, ProgramPoint)]> {
        self.modifiers
            .get(&(class.to_string(), field.to_string()))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownField {
                class: class.into(),
                field: field.into(),
            })
    }
}

impl TaskFacts {
    fn compute(cfg: Cfg, body: &[crate::syntax::Stmt]) -> TaskFacts {
        let mut gen: BTreeMap<u32, Vec<Ident>> = BTreeMap::new();
        let mut is_await: BTreeMap<u32, bool> = BTreeMap::new();
        walk_stmts(body, &mut |s| {
            gen.insert(
                s.pp.id,
                s.accessed_fields().into_iter().map(String::from).collect(),
            );
            is_await.insert(s.pp.id, s.is_await());
        });

        // Forward may-analysis: out(n) = gen(n) ∪ ⋃ out(pred).
        let mut out: BTreeMap<u32, BTreeSet<Ident>> = BTreeMap::new();
        let mut growth_steps = 0;
        let mut work: VecDeque<u32> = cfg.nodes.iter().map(|pp| pp.id).collect();
        while let Some(n) = work.pop_front() {
            let mut set: BTreeSet<Ident> = gen[&n].iter().cloned().collect();
            for p in cfg.predecessors(n) {
                if let Some(o) = out.get(p) {
                    set.extend(o.iter().cloned());
                }
            }
            let old = out.entry(n).or_default();
            if set.len() > old.len() {
                *old = set;
                growth_steps += 1;
                let next: Vec<u32> = cfg.successors(n).iter().copied().filter(|s| !work.contains(s)).collect();
                work.extend(next);
            }
        }

        // await_in(n) = ⋁ (await_in(pred) ∨ pred is an await).
        let mut await_in: BTreeMap<u32, bool> = cfg.nodes.iter().map(|pp| (pp.id, false)).collect();
        let mut work: VecDeque<u32> = cfg.nodes.iter().map(|pp| pp.id).collect();
        while let Some(n) = work.pop_front() {
            let v = cfg
                .predecessors(n)
                .iter()
                .any(|p| await_in[p] || is_await[p]);
            if v && !await_in[&n] {
                await_in.insert(n, true);
                let next: Vec<u32> = cfg.successors(n).iter().copied().filter(|s| !work.contains(s)).collect();
                work.extend(next);
            }
        }

        TaskFacts {
            cfg,
            accessed: out,
            await_before: await_in,
            growth_steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    const FIXTURE: &str = include_str!("../../../../corpus/db_workers_mod.act");

    fn setup() -> (Program, Facts) {
        let p = parse(FIXTURE).unwrap();
        let f = Facts::new(&p);
        (p, f)
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn accessed_fields_on_fixture() {
        let (p, f) = setup();
        let reg = AbstractTask::new("DB", "register");
        let work = AbstractTask::new("Worker", "work");
        let pp = |l| p.find_label(l).unwrap().clone();
        assert_eq!(f.accessed_fields(&reg, &pp("register")).unwrap(), set(&["connected"]));
        assert_eq!(f.accessed_fields(&reg, &pp("connected1")).unwrap(), set(&["connected"]));
        assert_eq!(f.accessed_fields(&work, &pp("fgetdata")).unwrap(), set(&["db"]));
        assert_eq!(f.accessed_fields(&reg, &pp("reginit")).unwrap(), set(&["connected"]));
        assert!(f.accessed_fields(&work, &pp("register")).is_err());
    }

    #[test]
    fn await_before_on_fixture() {
        let (p, f) = setup();
        let pp = |l| p.find_label(l).unwrap().clone();
        let reg = AbstractTask::new("DB", "register");
        assert!(f.has_await_before(&reg, &pp("register")).unwrap());
        assert!(f.has_await_before(&reg, &pp("connected")).unwrap());
        assert!(!f.has_await_before(&reg, &pp("await")).unwrap());
        assert!(!f.has_await_before(&reg, &pp("connected1")).unwrap());
        assert!(!f
            .has_await_before(&AbstractTask::new("Worker", "work"), &pp("work"))
            .unwrap());
        assert!(!f
            .has_await_before(&AbstractTask::new("DB", "makesConnection"), &pp("makestrue"))
            .unwrap());
    }

    #[test]
    fn modifiers_of_connected() {
        let (_, f) = setup();
        let mut labels: Vec<_> = f
            .field_modifiers("DB", "connected")
            .unwrap()
            .iter()
            .map(|(t, pp)| format!("{t}@{pp}"))
            .collect();
        labels.sort();
        assert_eq!(
            labels,
            [
                "DB.makesConnection@pp:makestrue",
                "DB.register@pp:connected",
                "DB.register@pp:connected1"
            ]
        );
        assert!(f.field_modifiers("DB", "data").unwrap().is_empty());
        assert!(f.field_modifiers("DB", "nope").is_err());
    }

    #[test]
    fn single_write_in_loop_body() {
        let p = parse("class A { Int n = 0; Unit m() { while (n < 3) { n = n + 1; @pp:w } } } main { }").unwrap();
        let f = Facts::new(&p);
        let mods = f.field_modifiers("A", "n").unwrap();
        assert_eq!(mods.len(), 1);
        assert!(mods[0].1.is("w"));
    }

    #[test]
    fn await_in_loop_reaches_loop_head() {
        let p = parse(
            "class A { Int n = 0; Unit m() {
                while (n < 3) { n = n + 1; @pp:w Fut f = this ! m(); await f?; } @pp:head
            } } main { }",
        )
        .unwrap();
        let f = Facts::new(&p);
        let t = AbstractTask::new("A", "m");
        assert!(f.has_await_before(&t, p.find_label("head").unwrap()).unwrap());
        assert!(f.has_await_before(&t, p.find_label("w").unwrap()).unwrap());
    }
}
