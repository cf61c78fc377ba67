use std::collections::BTreeMap;

use serde::Serialize;

use super::compile::{settle, Code, Op, OpKind};
use super::state::{Frame, Loc, Origin, Queued, State, Status, Value};
use crate::absdom::AbstractTask;
use crate::contexts::{InitialContext, LocationInstance};
use crate::depgraph::elementary_circuits;
use crate::error::{Error, Result};
use crate::syntax::{BinOp, Expr, Literal, Place, Program, ProgramPoint, Type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TransitionKind {
    StartTask,
    ResumeAwait,
    Step,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Transition {
    pub loc: usize,
    pub kind: TransitionKind,
    /// Queue entry picked by `StartTask` and `ResumeAwait`.
    pub slot: usize,
    pub task: AbstractTask,
}

/// What a transition did, for traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub transition: Transition,
    pub location: String,
    pub pp: Option<ProgramPoint>,
    pub action: String,
}

impl std::fmt::Display for TraceStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pp = self.pp.as_ref().map_or("-".to_string(), ToString::to_string);
        write!(f, "{} / {} / {} / {}", self.location, self.transition.task, pp, self.action)
    }
}

/// Operational semantics for one program.
pub struct Machine<'p> {
    p: &'p Program,
    code: Code<'p>,
}

impl<'p> Machine<'p> {
    pub fn new(p: &'p Program) -> Self {
        Self { p, code: Code::new(p) }
    }

    pub fn program(&self) -> &'p Program {
        self.p
    }

    pub fn task_of(&self, frame: &Frame) -> AbstractTask {
        match frame.method {
            None => AbstractTask::main(),
            Some((ci, mi)) => {
                let c = &self.p.classes[ci];
                AbstractTask::new(&c.name, &c.methods[mi].name)
            }
        }
    }

    fn ops(&self, frame: &Frame) -> &[Op<'p>] {
        self.code.body(frame.method)
    }

    /// Locations of `c` with their fields initialized and their tasks
    /// pending.
    pub fn init_state(&self, c: &InitialContext) -> Result<State> {
        let index: BTreeMap<&LocationInstance, usize> =
            c.locations.iter().enumerate().map(|(i, l)| (&l.instance, i)).collect();
        let wired = |inst: Option<&LocationInstance>, what: String| -> Result<Value> {
            inst.and_then(|i| index.get(i))
                .map(|&i| Value::Ref(i))
                .ok_or_else(|| Error::InvalidContext(format!("{what} is not wired")))
        };
        let mut s = State::default();
        for pl in &c.locations {
            let ci = self
                .p
                .class_index(&pl.instance.class_name)
                .ok_or_else(|| Error::InvalidContext(format!("unknown class {}", pl.instance.class_name)))?;
            let class = &self.p.classes[ci];
            let mut fields = Vec::new();
            for f in &class.fields {
                let v = match (&f.init, &f.ty) {
                    (Some(lit), _) => Value::from(lit),
                    (None, Type::Class(_)) => wired(pl.fields.get(&f.name), format!("{}.{}", pl.instance, f.name))?,
                    (None, ty) => default_value(ty)?,
                };
                fields.push(v);
            }
            let mut queue = Vec::new();
            for t in &pl.tasks {
                let mi = class
                    .method_index(&t.task.method_name)
                    .ok_or_else(|| Error::UnknownTask(t.task.to_string()))?;
                let mut locals = BTreeMap::new();
                for param in &class.methods[mi].params {
                    let v = match &param.ty {
                        Type::Class(_) => wired(t.args.get(&param.name), format!("{}({})", t.task, param.name))?,
                        ty => default_value(ty)?,
                    };
                    locals.insert(param.name.clone(), v);
                }
                queue.push(Queued::Pending(Frame {
                    method: Some((ci, mi)),
                    pc: 0,
                    locals,
                    result: None,
                }));
            }
            s.locs.push(Loc {
                origin: Origin::Context(pl.instance.clone()),
                class: Some(ci),
                fields,
                status: Status::Idle,
                queue,
            });
        }
        Ok(s.canonicalize())
    }

    /// A single location about to run the main block.
    pub fn init_main_state(&self) -> State {
        State {
            locs: vec![Loc {
                origin: Origin::Main,
                class: None,
                fields: Vec::new(),
                status: Status::Idle,
                queue: vec![Queued::Pending(Frame {
                    method: None,
                    pc: 0,
                    locals: BTreeMap::new(),
                    result: None,
                })],
            }],
            futures: Vec::new(),
        }
    }

    pub fn enabled(&self, s: &State) -> Vec<Transition> {
        let mut out = Vec::new();
        for (li, l) in s.locs.iter().enumerate() {
            match &l.status {
                Status::Blocked { .. } => {}
                Status::Active(frame) => out.push(Transition {
                    loc: li,
                    kind: TransitionKind::Step,
                    slot: 0,
                    task: self.task_of(frame),
                }),
                Status::Idle => {
                    for (qi, q) in l.queue.iter().enumerate() {
                        // identical entries lead to identical successors
                        if qi > 0 && l.queue[qi - 1] == *q {
                            continue;
                        }
                        let kind = match q {
                            Queued::Pending(_) => TransitionKind::StartTask,
                            Queued::Suspended { fut, .. } if s.futures[*fut].is_some() => TransitionKind::ResumeAwait,
                            Queued::Suspended { .. } => continue,
                        };
                        out.push(Transition {
                            loc: li,
                            kind,
                            slot: qi,
                            task: self.task_of(q.frame()),
                        });
                    }
                }
            }
        }
        out
    }

    /// No transition is enabled but some task has not finished.
    pub fn is_deadlock(&self, s: &State) -> bool {
        self.enabled(s).is_empty() && s.has_unfinished_work()
    }

    /// Fire `t` and return the canonical successor.
    pub fn apply(&self, s: &State, t: &Transition) -> Result<(State, TraceStep)> {
        let mut s = s.clone();
        let location = s.loc_name(t.loc);
        let (pp, action) = match t.kind {
            TransitionKind::StartTask | TransitionKind::ResumeAwait => {
                let q = s.locs[t.loc].queue.remove(t.slot);
                let (frame, pp, action) = match q {
                    Queued::Pending(mut frame) => {
                        frame.pc = settle(self.ops(&frame), 0);
                        let pp = self.ops(&frame).get(frame.pc).map(|op| op.pp.clone());
                        (frame, pp, "start".to_string())
                    }
                    Queued::Suspended { mut frame, .. } => {
                        let pp = self.ops(&frame)[frame.pc].pp.clone();
                        frame.pc = settle(self.ops(&frame), frame.pc + 1);
                        (frame, Some(pp), "resume".to_string())
                    }
                };
                s.locs[t.loc].status = Status::Active(frame);
                self.finish_if_done(&mut s, t.loc);
                (pp, action)
            }
            TransitionKind::Step => {
                let (pp, action) = self.step(&mut s, t.loc)?;
                (Some(pp), action)
            }
        };
        self.cascade(&mut s)?;
        let step = TraceStep {
            transition: t.clone(),
            location,
            pp,
            action,
        };
        Ok((s.canonicalize(), step))
    }

    fn finish_if_done(&self, s: &mut State, li: usize) {
        if let Status::Active(frame) = &s.locs[li].status {
            if frame.pc >= self.ops(frame).len() {
                let frame = frame.clone();
                self.complete(s, li, &frame, Value::Unit);
            }
        }
    }

    fn complete(&self, s: &mut State, li: usize, frame: &Frame, v: Value) {
        if let Some(f) = frame.result {
            s.futures[f] = Some(v);
        }
        s.locs[li].status = Status::Idle;
    }

    // Locations frozen on a get whose future has resolved take the value
    // and carry on; finishing may release further gets.
    fn cascade(&self, s: &mut State) -> Result<()> {
        loop {
            let ready = s.locs.iter().position(
                |l| matches!(&l.status, Status::Blocked { fut, .. } if s.futures[*fut].is_some()),
            );
            let Some(li) = ready else { return Ok(()) };
            let Status::Blocked { mut frame, fut } = std::mem::replace(&mut s.locs[li].status, Status::Idle) else {
                unreachable!()
            };
            let v = s.futures[fut].clone().expect("resolved");
            let op = &self.ops(&frame)[frame.pc];
            if let OpKind::Get { dest: Some(d), .. } = &op.kind {
                self.store(s, li, &mut frame, d, v)?;
            }
            frame.pc = settle(self.ops(&frame), frame.pc + 1);
            s.locs[li].status = Status::Active(frame);
            self.finish_if_done(s, li);
        }
    }

    fn store(&self, s: &mut State, li: usize, frame: &mut Frame, place: &Place, v: Value) -> Result<()> {
        match place {
            Place::Local(x) => {
                frame.locals.insert(x.clone(), v);
            }
            Place::Field(f) => {
                let fi = self.field_index(s, li, f)?;
                s.locs[li].fields[fi] = v;
            }
        }
        Ok(())
    }

    fn field_index(&self, s: &State, li: usize, f: &str) -> Result<usize> {
        s.locs[li]
            .class
            .and_then(|ci| self.p.classes[ci].field_index(f))
            .ok_or_else(|| Error::Runtime {
                pp: String::new(),
                message: format!("no field {f} on {}", s.loc_name(li)),
            })
    }

    fn eval(&self, s: &State, li: usize, frame: &Frame, e: &Expr, pp: &ProgramPoint) -> Result<Value> {
        let err = |message: String| Error::Runtime {
            pp: pp.to_string(),
            message,
        };
        Ok(match e {
            Expr::Lit(l) => Value::from(l),
            Expr::Var(x) => frame
                .locals
                .get(x)
                .cloned()
                .ok_or_else(|| err(format!("unbound local {x}")))?,
            Expr::Field(f) => s.locs[li].fields[self.field_index(s, li, f).map_err(|_| err(format!("no field {f}")))?].clone(),
            Expr::This => Value::Ref(li),
            Expr::Not(inner) => match self.eval(s, li, frame, inner, pp)? {
                Value::Bool(b) => Value::Bool(!b),
                other => return Err(err(format!("`!` applied to {other:?}"))),
            },
            Expr::Binary(op, l, r) => {
                let a = self.eval(s, li, frame, l, pp)?;
                let b = self.eval(s, li, frame, r, pp)?;
                match (op, a, b) {
                    (BinOp::Add, Value::Int(x), Value::Int(y)) => Value::Int(x.wrapping_add(y)),
                    (BinOp::Sub, Value::Int(x), Value::Int(y)) => Value::Int(x.wrapping_sub(y)),
                    (BinOp::Lt, Value::Int(x), Value::Int(y)) => Value::Bool(x < y),
                    (BinOp::And, Value::Bool(x), Value::Bool(y)) => Value::Bool(x && y),
                    (BinOp::Eq, x, y) => Value::Bool(x == y),
                    (op, x, y) => return Err(err(format!("bad operands {x:?} {} {y:?}", op.symbol()))),
                }
            }
        })
    }

    // Execute the active task's current statement.
    fn step(&self, s: &mut State, li: usize) -> Result<(ProgramPoint, String)> {
        let Status::Active(mut frame) = std::mem::replace(&mut s.locs[li].status, Status::Idle) else {
            unreachable!("step on a location without an active task")
        };
        let ops = self.ops(&frame);
        let op = &ops[frame.pc];
        let pp = op.pp.clone();
        let mut next = frame.pc + 1;
        let action = match &op.kind {
            OpKind::SetLocal(x, e) => {
                let v = self.eval(s, li, &frame, e, &pp)?;
                let action = format!("{x} = {}", show(&v));
                frame.locals.insert((*x).clone(), v);
                action
            }
            OpKind::SetField(f, e) => {
                let v = self.eval(s, li, &frame, e, &pp)?;
                let fi = self.field_index(s, li, f)?;
                s.locs[li].fields[fi] = v.clone();
                format!("{f} = {}", show(&v))
            }
            OpKind::New { dest, class, args } => {
                let ci = self.p.class_index(class).expect("checked class");
                let decl = &self.p.classes[ci];
                let mut argv = Vec::new();
                for a in *args {
                    argv.push(self.eval(s, li, &frame, a, &pp)?);
                }
                let mut argv = argv.into_iter();
                let mut fields = Vec::new();
                for f in &decl.fields {
                    fields.push(match &f.init {
                        Some(lit) => Value::from(lit),
                        None => argv.next().expect("checked arity"),
                    });
                }
                let new_li = s.locs.len();
                s.locs.push(Loc {
                    origin: Origin::Created(pp.clone()),
                    class: Some(ci),
                    fields,
                    status: Status::Idle,
                    queue: Vec::new(),
                });
                self.store(s, li, &mut frame, dest, Value::Ref(new_li))?;
                format!("new {class} = {}", s.loc_name(new_li))
            }
            OpKind::Call {
                fut,
                target,
                method,
                args,
            } => {
                let Value::Ref(ti) = self.eval(s, li, &frame, target, &pp)? else {
                    return Err(Error::Runtime {
                        pp: pp.to_string(),
                        message: "call on a non-location".into(),
                    });
                };
                let ci = s.locs[ti].class.expect("calls target objects");
                let mi = self.p.classes[ci].method_index(method).ok_or_else(|| Error::Runtime {
                    pp: pp.to_string(),
                    message: format!("{} has no method {method}", s.loc_name(ti)),
                })?;
                let m = &self.p.classes[ci].methods[mi];
                let mut locals = BTreeMap::new();
                for (param, a) in m.params.iter().zip(*args) {
                    locals.insert(param.name.clone(), self.eval(s, li, &frame, a, &pp)?);
                }
                let result = fut.map(|f| {
                    s.futures.push(None);
                    let id = s.futures.len() - 1;
                    frame.locals.insert(f.clone(), Value::Fut(id));
                    id
                });
                s.locs[ti].queue.push(Queued::Pending(Frame {
                    method: Some((ci, mi)),
                    pc: 0,
                    locals,
                    result,
                }));
                format!("call {}!{method}", s.loc_name(ti))
            }
            OpKind::Await(f) => {
                let fut = self.future(&frame, f, &pp)?;
                let at = frame.pc;
                s.locs[li].queue.push(Queued::Suspended {
                    frame: Frame { pc: at, ..frame },
                    fut,
                });
                return Ok((pp, format!("await {f} (suspends)")));
            }
            OpKind::Get { fut: f, dest } => {
                let fut = self.future(&frame, f, &pp)?;
                match s.futures[fut].clone() {
                    Some(v) => {
                        if let Some(d) = dest {
                            self.store(s, li, &mut frame, d, v)?;
                        }
                        format!("get {f}")
                    }
                    None => {
                        s.locs[li].status = Status::Blocked { frame, fut };
                        return Ok((pp, format!("get {f} (blocks)")));
                    }
                }
            }
            OpKind::Branch { cond, target } => match self.eval(s, li, &frame, cond, &pp)? {
                Value::Bool(true) => "branch true".into(),
                Value::Bool(false) => {
                    next = *target;
                    "branch false".into()
                }
                other => {
                    return Err(Error::Runtime {
                        pp: pp.to_string(),
                        message: format!("condition evaluated to {other:?}"),
                    })
                }
            },
            OpKind::Jump(t) => {
                next = *t;
                "jump".into()
            }
            OpKind::Return(e) => {
                let v = self.eval(s, li, &frame, e, &pp)?;
                let action = format!("return {}", show(&v));
                self.complete(s, li, &frame, v);
                return Ok((pp, action));
            }
            OpKind::Skip => "skip".into(),
        };
        frame.pc = settle(ops, next);
        s.locs[li].status = Status::Active(frame);
        self.finish_if_done(s, li);
        Ok((pp, action))
    }

    fn future(&self, frame: &Frame, f: &str, pp: &ProgramPoint) -> Result<usize> {
        match frame.locals.get(f) {
            Some(Value::Fut(id)) => Ok(*id),
            _ => Err(Error::Runtime {
                pp: pp.to_string(),
                message: format!("future {f} not bound"),
            }),
        }
    }

    /// A set of tasks that wait on each other and can never proceed, with
    /// the locations holding them. Blocked gets wait on the task resolving
    /// their future, suspended awaits likewise, and tasks queued behind a
    /// frozen location wait on the frozen task.
    pub fn waits_for_cycle(&self, s: &State) -> Option<Vec<usize>> {
        // node: (location, None = active/blocked task, Some(slot) = queued)
        type Node = (usize, Option<usize>);
        let mut owner: BTreeMap<usize, Node> = BTreeMap::new();
        let mut nodes: Vec<Node> = Vec::new();
        for (li, l) in s.locs.iter().enumerate() {
            match &l.status {
                Status::Idle => {}
                Status::Active(f) | Status::Blocked { frame: f, .. } => {
                    nodes.push((li, None));
                    if let Some(r) = f.result {
                        owner.insert(r, (li, None));
                    }
                }
            }
            for (qi, q) in l.queue.iter().enumerate() {
                nodes.push((li, Some(qi)));
                if let Some(r) = q.frame().result {
                    owner.insert(r, (li, Some(qi)));
                }
            }
        }
        let succ = |n: &Node| -> Vec<Node> {
            let l = &s.locs[n.0];
            let on = |fut: usize| -> Vec<Node> {
                if s.futures[fut].is_some() {
                    return Vec::new();
                }
                owner.get(&fut).copied().into_iter().collect()
            };
            match n.1 {
                None => match &l.status {
                    Status::Blocked { fut, .. } => on(*fut),
                    _ => Vec::new(),
                },
                Some(qi) => {
                    let mut out = Vec::new();
                    if let Queued::Suspended { fut, .. } = &l.queue[qi] {
                        out.extend(on(*fut));
                    }
                    if matches!(l.status, Status::Blocked { .. }) {
                        out.push((n.0, None));
                    }
                    out
                }
            }
        };
        let adj: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| {
                succ(n)
                    .iter()
                    .filter_map(|m| nodes.iter().position(|x| x == m))
                    .collect()
            })
            .collect();
        let circuit = elementary_circuits(nodes.len(), &adj).into_iter().next()?;
        let mut locs: Vec<usize> = circuit.iter().map(|&i| nodes[i].0).collect();
        locs.sort();
        locs.dedup();
        Some(locs)
    }
}

fn default_value(ty: &Type) -> Result<Value> {
    Literal::default_for(ty)
        .map(|l| Value::from(&l))
        .ok_or_else(|| Error::InvalidContext(format!("no default for {ty:?}")))
}

fn show(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Unit => "unit".into(),
        Value::Ref(i) => format!("loc#{i}"),
        Value::Fut(i) => format!("fut#{i}"),
    }
}
