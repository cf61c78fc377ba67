use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{scopes, AbstractLocation, AbstractTask, Scope};
use crate::error::{Error, Result};
use crate::syntax::{walk_stmts, Expr, Ident, Place, Program, ProgramPoint, StmtKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefKey {
    Var { scope: AbstractTask, name: Ident },
    Field { class: Ident, name: Ident },
    Return(AbstractTask),
}

type LocSet = BTreeSet<AbstractLocation>;

/// Flow- and context-insensitive creation-site points-to sets.
#[derive(Debug, Clone, Default)]
pub struct PointsTo {
    sets: BTreeMap<RefKey, LocSet>,
    sites: BTreeMap<Ident, LocSet>,
    live: BTreeSet<AbstractTask>,
    runs_on: BTreeMap<AbstractTask, LocSet>,
    call_targets: BTreeMap<u32, LocSet>,
}

impl PointsTo {
    pub fn get(&self, key: &RefKey) -> &LocSet {
        static EMPTY: LocSet = BTreeSet::new();
        self.sets.get(key).unwrap_or(&EMPTY)
    }

    pub fn var(&self, scope: &AbstractTask, name: &str) -> &LocSet {
        self.get(&RefKey::Var {
            scope: scope.clone(),
            name: name.into(),
        })
    }

    pub fn field(&self, class: &str, name: &str) -> &LocSet {
        self.get(&RefKey::Field {
            class: class.into(),
            name: name.into(),
        })
    }

    /// Creation sites of `class`: what `this` may denote inside it.
    pub fn this_of(&self, class: &str) -> &LocSet {
        static EMPTY: LocSet = BTreeSet::new();
        self.sites.get(class).unwrap_or(&EMPTY)
    }

    /// All abstract locations, main first.
    pub fn locations(&self) -> impl Iterator<Item = &AbstractLocation> {
        self.sites.values().flatten()
    }

    /// Tasks reachable from main through asynchronous calls (main included).
    pub fn live(&self) -> &BTreeSet<AbstractTask> {
        &self.live
    }

    pub fn is_live(&self, task: &AbstractTask) -> bool {
        self.live.contains(task)
    }

    /// Locations a task may be invoked on; `{obj@main}` for main.
    pub fn runs_on(&self, task: &AbstractTask) -> &LocSet {
        static EMPTY: LocSet = BTreeSet::new();
        self.runs_on.get(task).unwrap_or(&EMPTY)
    }

    /// Locations the receiver of the call at `pp` may denote.
    pub fn call_targets(&self, pp: &ProgramPoint) -> &LocSet {
        static EMPTY: LocSet = BTreeSet::new();
        self.call_targets.get(&pp.id).unwrap_or(&EMPTY)
    }

    fn eval(&self, scope: &Scope<'_>, e: &Expr) -> LocSet {
        match e {
            Expr::Var(v) => self.var(&scope.task, v).clone(),
            Expr::Field(f) => match scope.class {
                Some(c) => self.field(&c.name, f).clone(),
                None => LocSet::new(),
            },
            Expr::This => match scope.class {
                Some(c) => self.this_of(&c.name).clone(),
                None => LocSet::new(),
            },
            _ => LocSet::new(),
        }
    }

    fn add(&mut self, key: RefKey, locs: &LocSet) -> bool {
        if locs.is_empty() {
            return false;
        }
        let set = self.sets.entry(key).or_default();
        let before = set.len();
        set.extend(locs.iter().cloned());
        set.len() > before
    }

    fn place_key(scope: &Scope<'_>, place: &Place) -> Option<RefKey> {
        match place {
            Place::Local(v) => Some(RefKey::Var {
                scope: scope.task.clone(),
                name: v.clone(),
            }),
            Place::Field(f) => scope.class.map(|c| RefKey::Field {
                class: c.name.clone(),
                name: f.clone(),
            }),
        }
    }
}

/// Propagate creation sites through assignments, constructor arguments,
/// call arguments and returned values until nothing changes. Only code
/// reachable from main contributes.
pub fn resolve_references(p: &Program) -> Result<PointsTo> {
    let mut pts = PointsTo::default();
    let main = AbstractTask::main();
    pts.sites.insert(main.class_name.clone(), [AbstractLocation::main()].into());
    for s in p.all_stmts() {
        if let StmtKind::NewLocation { class, .. } = &s.kind {
            pts.sites
                .entry(class.clone())
                .or_default()
                .insert(AbstractLocation::created_at(s.pp.clone(), class));
        }
    }
    pts.live.insert(main.clone());
    pts.runs_on.insert(main, [AbstractLocation::main()].into());

    let scopes = scopes(p);
    // fut variable -> method invoked by its defining call, per scope
    let mut fut_callee: HashMap<(AbstractTask, Ident), (u32, Ident)> = HashMap::new();
    for sc in &scopes {
        walk_stmts(sc.body, &mut |s| {
            if let StmtKind::AsyncCall {
                fut: Some(f),
                method,
                ..
            } = &s.kind
            {
                fut_callee.insert((sc.task.clone(), f.clone()), (s.pp.id, method.clone()));
            }
        });
    }

    loop {
        let mut changed = false;
        let live: Vec<&Scope<'_>> = scopes.iter().filter(|sc| pts.live.contains(&sc.task)).collect();
        for sc in live {
            let mut stmts = Vec::new();
            walk_stmts(sc.body, &mut |s| stmts.push(s));
            for s in stmts {
                match &s.kind {
                    StmtKind::LocalAssign { var, expr, .. } => {
                        let v = pts.eval(sc, expr);
                        let key = RefKey::Var {
                            scope: sc.task.clone(),
                            name: var.clone(),
                        };
                        changed |= pts.add(key, &v);
                    }
                    StmtKind::FieldAssign { field, expr } => {
                        let v = pts.eval(sc, expr);
                        if let Some(key) = PointsTo::place_key(sc, &Place::Field(field.clone())) {
                            changed |= pts.add(key, &v);
                        }
                    }
                    StmtKind::NewLocation {
                        dest, class, args, ..
                    } => {
                        let loc: LocSet = [AbstractLocation::created_at(s.pp.clone(), class)].into();
                        if let Some(key) = PointsTo::place_key(sc, dest) {
                            changed |= pts.add(key, &loc);
                        }
                        let decl = p.class(class).expect("checked class");
                        for (param, arg) in decl.ctor_params.iter().zip(args) {
                            let v = pts.eval(sc, arg);
                            let key = RefKey::Field {
                                class: class.clone(),
                                name: param.name.clone(),
                            };
                            changed |= pts.add(key, &v);
                        }
                    }
                    StmtKind::AsyncCall {
                        target,
                        method,
                        args,
                        ..
                    } => {
                        let targets: LocSet = pts
                            .eval(sc, target)
                            .into_iter()
                            .filter(|o| p.method(&o.class_name, method).is_some())
                            .collect();
                        let entry = pts.call_targets.entry(s.pp.id).or_default();
                        let before = entry.len();
                        entry.extend(targets.iter().cloned());
                        changed |= entry.len() > before;
                        for o in &targets {
                            let task = AbstractTask::new(&o.class_name, method);
                            changed |= pts.live.insert(task.clone());
                            changed |= pts
                                .runs_on
                                .entry(task.clone())
                                .or_default()
                                .insert(o.clone());
                            let m = p.method(&o.class_name, method).expect("filtered");
                            for (param, arg) in m.params.iter().zip(args) {
                                let v = pts.eval(sc, arg);
                                let key = RefKey::Var {
                                    scope: task.clone(),
                                    name: param.name.clone(),
                                };
                                changed |= pts.add(key, &v);
                            }
                        }
                    }
                    StmtKind::GetFut {
                        fut, dest: Some(d), ..
                    } => {
                        let (call_pp, method) = &fut_callee[&(sc.task.clone(), fut.clone())];
                        let callees: Vec<AbstractTask> = pts
                            .call_targets
                            .get(call_pp)
                            .into_iter()
                            .flatten()
                            .map(|o| AbstractTask::new(&o.class_name, method))
                            .collect();
                        if let Some(key) = PointsTo::place_key(sc, d) {
                            for callee in callees {
                                let v = pts.get(&RefKey::Return(callee)).clone();
                                changed |= pts.add(key.clone(), &v);
                            }
                        }
                    }
                    StmtKind::Return { expr } => {
                        let v = pts.eval(sc, expr);
                        changed |= pts.add(RefKey::Return(sc.task.clone()), &v);
                    }
                    _ => {}
                }
            }
        }
        if !changed {
            break;
        }
    }

    for sc in scopes.iter().filter(|sc| pts.live.contains(&sc.task)) {
        let mut err = None;
        walk_stmts(sc.body, &mut |s| {
            if let StmtKind::AsyncCall { target, .. } = &s.kind {
                if err.is_none() && pts.call_targets(&s.pp).is_empty() {
                    err = Some(Error::UnresolvableReference {
                        reference: describe(target),
                        pp: s.pp.to_string(),
                    });
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(pts)
}

fn describe(e: &Expr) -> String {
    match e {
        Expr::Var(v) | Expr::Field(v) => v.clone(),
        Expr::This => "this".into(),
        other => format!("{other:?}"),
    }
}
