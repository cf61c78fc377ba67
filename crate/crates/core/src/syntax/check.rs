//! Name resolution and well-formedness checks run after parsing.
//!
//! Bare identifiers are parsed as variables; this pass rewrites the ones
//! that name fields of the enclosing class and rejects everything the
//! analyses rely on never seeing: unknown names, ill-typed expressions,
//! first-class futures, futures synchronized outside the scope of their
//! defining call.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::Pos;
use super::parser::Spans;
use super::ParseError;

struct MethodSig {
    params: Vec<Type>,
    ret: Type,
}

struct ClassSig {
    fields: HashMap<Ident, Type>,
    ctor: Vec<Type>,
    methods: HashMap<Ident, MethodSig>,
}

struct Sigs {
    classes: HashMap<Ident, ClassSig>,
}

#[derive(Clone)]
struct Local {
    ty: Type,
    // For futures: the (class, method) the defining call invokes.
    callee: Option<(Ident, Ident)>,
}

struct Scope<'s> {
    sigs: &'s Sigs,
    class: Option<&'s str>,
    ret: Option<Type>,
    frames: Vec<HashMap<Ident, Local>>,
    declared: HashSet<Ident>,
    pos: Pos,
}

impl Scope<'_> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::at(self.pos, msg)
    }

    fn lookup(&self, name: &str) -> Option<&Local> {
        self.frames.iter().rev().find_map(|f| f.get(name))
    }

    fn field_type(&self, name: &str) -> Option<&Type> {
        self.sigs.classes.get(self.class?)?.fields.get(name)
    }

    fn declare(&mut self, name: &str, local: Local) -> Result<(), ParseError> {
        if !self.declared.insert(name.to_string()) {
            return Err(self.err(format!("local `{name}` declared twice")));
        }
        self.frames.last_mut().unwrap().insert(name.to_string(), local);
        Ok(())
    }

    fn check_type_exists(&self, ty: &Type) -> Result<(), ParseError> {
        match ty {
            Type::Class(c) if !self.sigs.classes.contains_key(c) => {
                Err(self.err(format!("unknown class `{c}`")))
            }
            _ => Ok(()),
        }
    }

    fn resolve_expr(&self, e: &mut Expr) -> Result<Type, ParseError> {
        match e {
            Expr::Lit(Literal::Int(_)) => Ok(Type::Int),
            Expr::Lit(Literal::Bool(_)) => Ok(Type::Bool),
            Expr::Lit(Literal::Unit) => Ok(Type::Unit),
            Expr::This => match self.class {
                Some(c) => Ok(Type::Class(c.to_string())),
                None => Err(self.err("`this` is not available in main")),
            },
            Expr::Var(v) => {
                if let Some(l) = self.lookup(v) {
                    if l.ty == Type::Fut {
                        return Err(self.err(format!(
                            "future `{v}` can only be used by `await` or `get`"
                        )));
                    }
                    return Ok(l.ty.clone());
                }
                if let Some(t) = self.field_type(v) {
                    let t = t.clone();
                    *e = Expr::Field(std::mem::take(v));
                    return Ok(t);
                }
                Err(self.err(format!("unknown variable `{v}`")))
            }
            Expr::Field(f) => self
                .field_type(f)
                .cloned()
                .ok_or_else(|| self.err(format!("unknown field `{f}`"))),
            Expr::Not(inner) => {
                let t = self.resolve_expr(inner)?;
                self.expect(&t, &Type::Bool, "operand of `!`")?;
                Ok(Type::Bool)
            }
            Expr::Binary(op, l, r) => {
                let op = *op;
                let lt = self.resolve_expr(l)?;
                let rt = self.resolve_expr(r)?;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Lt => {
                        self.expect(&lt, &Type::Int, op.symbol())?;
                        self.expect(&rt, &Type::Int, op.symbol())?;
                        Ok(if op == BinOp::Lt { Type::Bool } else { Type::Int })
                    }
                    BinOp::And => {
                        self.expect(&lt, &Type::Bool, "&&")?;
                        self.expect(&rt, &Type::Bool, "&&")?;
                        Ok(Type::Bool)
                    }
                    BinOp::Eq => {
                        self.expect(&rt, &lt, "==")?;
                        Ok(Type::Bool)
                    }
                }
            }
        }
    }

    fn expect(&self, got: &Type, want: &Type, what: &str) -> Result<(), ParseError> {
        if got == want {
            Ok(())
        } else {
            Err(self.err(format!("type mismatch in {what}: expected {want}, found {got}")))
        }
    }

    fn resolve_place(&self, place: &mut Place) -> Result<Type, ParseError> {
        match place {
            Place::Local(v) => {
                if let Some(l) = self.lookup(v) {
                    if l.ty == Type::Fut {
                        return Err(self.err(format!("future `{v}` cannot be reassigned")));
                    }
                    return Ok(l.ty.clone());
                }
                if let Some(t) = self.field_type(v) {
                    let t = t.clone();
                    *place = Place::Field(std::mem::take(v));
                    return Ok(t);
                }
                Err(self.err(format!("unknown variable `{v}`")))
            }
            Place::Field(f) => self
                .field_type(f)
                .cloned()
                .ok_or_else(|| self.err(format!("unknown field `{f}`"))),
        }
    }

    fn check_args(&self, args: &mut [Expr], params: &[Type], what: &str) -> Result<(), ParseError> {
        if args.len() != params.len() {
            return Err(self.err(format!(
                "{what} expects {} argument(s), found {}",
                params.len(),
                args.len()
            )));
        }
        for (a, p) in args.iter_mut().zip(params) {
            let t = self.resolve_expr(a)?;
            self.expect(&t, p, what)?;
        }
        Ok(())
    }

    fn future(&self, fut: &str) -> Result<Local, ParseError> {
        match self.lookup(fut) {
            Some(l) if l.ty == Type::Fut => Ok(l.clone()),
            _ => Err(self.err(format!("unbound future `{fut}`"))),
        }
    }

    fn block(&mut self, block: &mut [Stmt], spans: &Spans) -> Result<(), ParseError> {
        for s in block {
            self.stmt(s, spans)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &mut Stmt, spans: &Spans) -> Result<(), ParseError> {
        self.pos = spans.stmts.get(&s.pp.id).copied().unwrap_or(self.pos);
        // Bare `x = e` where `x` is a field.
        if let StmtKind::LocalAssign { var, decl: None, expr } = &mut s.kind {
            if self.lookup(var).is_none() && self.field_type(var).is_some() {
                s.kind = StmtKind::FieldAssign {
                    field: std::mem::take(var),
                    expr: expr.clone(),
                };
            }
        }
        match &mut s.kind {
            StmtKind::FieldAssign { field, expr } => {
                let ft = self
                    .field_type(field)
                    .cloned()
                    .ok_or_else(|| self.err(format!("unknown field `{field}`")))?;
                let t = self.resolve_expr(expr)?;
                self.expect(&t, &ft, "field assignment")?;
            }
            StmtKind::LocalAssign { var, decl, expr } => {
                let t = self.resolve_expr(expr)?;
                match decl {
                    Some(d) => {
                        self.check_type_exists(d)?;
                        if *d == Type::Fut {
                            return Err(self.err("a `Fut` variable must be initialized by an asynchronous call"));
                        }
                        self.expect(&t, d, "declaration")?;
                        let d = d.clone();
                        self.declare(var, Local { ty: d, callee: None })?;
                    }
                    None => {
                        let lt = self
                            .lookup(var)
                            .map(|l| l.ty.clone())
                            .ok_or_else(|| self.err(format!("unknown variable `{var}`")))?;
                        if lt == Type::Fut {
                            return Err(self.err(format!("future `{var}` cannot be reassigned")));
                        }
                        self.expect(&t, &lt, "assignment")?;
                    }
                }
            }
            StmtKind::NewLocation {
                dest,
                decl,
                class,
                args,
            } => {
                let ctor = &self
                    .sigs
                    .classes
                    .get(class)
                    .ok_or_else(|| self.err(format!("unknown class `{class}`")))?
                    .ctor;
                self.check_args(args, ctor, &format!("constructor of `{class}`"))?;
                let ty = Type::Class(class.clone());
                if *decl {
                    let Place::Local(v) = dest else {
                        unreachable!("declarations are local")
                    };
                    let v = v.clone();
                    self.declare(&v, Local { ty, callee: None })?;
                } else {
                    let t = self.resolve_place(dest)?;
                    self.expect(&ty, &t, "assignment")?;
                }
            }
            StmtKind::AsyncCall {
                fut,
                target,
                method,
                args,
            } => {
                let tt = self.resolve_expr(target)?;
                let Type::Class(cls) = tt else {
                    return Err(self.err(format!("call target has non-location type {tt}")));
                };
                let sig = self.sigs.classes[&cls]
                    .methods
                    .get(method)
                    .ok_or_else(|| self.err(format!("class `{cls}` has no method `{method}`")))?;
                self.check_args(args, &sig.params, &format!("`{cls}.{method}`"))?;
                if let Some(f) = fut {
                    let f = f.clone();
                    let callee = Some((cls, method.clone()));
                    self.declare(&f, Local { ty: Type::Fut, callee })?;
                }
            }
            StmtKind::AwaitFut { fut } => {
                self.future(fut)?;
            }
            StmtKind::GetFut { fut, dest, decl } => {
                let l = self.future(fut)?;
                let (cls, m) = l.callee.expect("futures record their callee");
                let ret = self.sigs.classes[&cls].methods[&m].ret.clone();
                match (dest, decl) {
                    (Some(Place::Local(v)), Some(d)) => {
                        self.check_type_exists(d)?;
                        self.expect(&ret, d, "get result")?;
                        let (v, d) = (v.clone(), d.clone());
                        self.declare(&v, Local { ty: d, callee: None })?;
                    }
                    (Some(place), None) => {
                        let t = self.resolve_place(place)?;
                        self.expect(&ret, &t, "get result")?;
                    }
                    (None, _) => {}
                    (Some(Place::Field(_)), Some(_)) => unreachable!("declarations are local"),
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let t = self.resolve_expr(cond)?;
                self.expect(&t, &Type::Bool, "condition")?;
                self.frames.push(HashMap::new());
                self.block(then_block, spans)?;
                self.frames.pop();
                self.frames.push(HashMap::new());
                self.block(else_block, spans)?;
                self.frames.pop();
            }
            StmtKind::While { cond, body } => {
                let t = self.resolve_expr(cond)?;
                self.expect(&t, &Type::Bool, "condition")?;
                self.frames.push(HashMap::new());
                self.block(body, spans)?;
                self.frames.pop();
            }
            StmtKind::Return { expr } => {
                let t = self.resolve_expr(expr)?;
                match &self.ret {
                    Some(r) => self.expect(&t, r, "return")?,
                    None => return Err(self.err("`return` is not allowed in main")),
                }
            }
            StmtKind::Skip => {}
        }
        Ok(())
    }
}

fn duplicate<'a>(names: impl Iterator<Item = &'a str>) -> Option<(usize, &'a str)> {
    let mut seen = HashSet::new();
    names.enumerate().find(|(_, n)| !seen.insert(*n))
}

pub(crate) fn check(p: &mut Program, spans: &Spans) -> Result<(), ParseError> {
    if let Some((i, n)) = duplicate(p.classes.iter().map(|c| c.name.as_str())) {
        return Err(ParseError::at(spans.classes[i], format!("duplicate class `{n}`")));
    }
    let mut seen_labels = HashSet::new();
    for (l, pos) in &spans.labels {
        if !seen_labels.insert(l.as_str()) {
            return Err(ParseError::at(*pos, format!("duplicate label `@pp:{l}`")));
        }
    }

    let mut sigs = Sigs {
        classes: HashMap::new(),
    };
    for (ci, c) in p.classes.iter().enumerate() {
        if let Some((i, n)) = duplicate(c.fields.iter().map(|f| f.name.as_str())) {
            return Err(ParseError::at(
                spans.fields[ci][i],
                format!("duplicate field `{n}` in class `{}`", c.name),
            ));
        }
        if let Some((i, n)) = duplicate(c.methods.iter().map(|m| m.name.as_str())) {
            return Err(ParseError::at(
                spans.methods[ci][i],
                format!("duplicate method `{n}` in class `{}`", c.name),
            ));
        }
        sigs.classes.insert(
            c.name.clone(),
            ClassSig {
                fields: c.fields.iter().map(|f| (f.name.clone(), f.ty.clone())).collect(),
                ctor: c.ctor_params.iter().map(|p| p.ty.clone()).collect(),
                methods: c
                    .methods
                    .iter()
                    .map(|m| {
                        let sig = MethodSig {
                            params: m.params.iter().map(|p| p.ty.clone()).collect(),
                            ret: m.ret.clone(),
                        };
                        (m.name.clone(), sig)
                    })
                    .collect(),
            },
        );
    }

    for (ci, c) in p.classes.iter_mut().enumerate() {
        let class_name = c.name.clone();
        for (fi, f) in c.fields.iter().enumerate() {
            let pos = spans.fields[ci][fi];
            match (&f.ty, f.init) {
                (Type::Class(k), _) if !sigs.classes.contains_key(k) => {
                    return Err(ParseError::at(pos, format!("unknown class `{k}`")))
                }
                (Type::Fut, _) => {
                    return Err(ParseError::at(pos, "futures cannot be stored in fields"))
                }
                (Type::Class(_), Some(_)) => {
                    return Err(ParseError::at(pos, "location fields cannot have a literal initializer"))
                }
                (ty, Some(lit)) if Literal::default_for(ty).map(|d| std::mem::discriminant(&d)) != Some(std::mem::discriminant(&lit)) => {
                    return Err(ParseError::at(pos, format!("initializer of `{}` does not match {ty}", f.name)))
                }
                _ => {}
            }
        }
        for (mi, m) in c.methods.iter_mut().enumerate() {
            let mut scope = Scope {
                sigs: &sigs,
                class: Some(&class_name),
                ret: Some(m.ret.clone()),
                frames: vec![HashMap::new()],
                declared: HashSet::new(),
                pos: spans.methods[ci][mi],
            };
            if m.ret == Type::Fut {
                return Err(scope.err("futures cannot be returned"));
            }
            scope.check_type_exists(&m.ret)?;
            for prm in &m.params {
                if prm.ty == Type::Fut {
                    return Err(scope.err("futures cannot be passed as arguments"));
                }
                scope.check_type_exists(&prm.ty)?;
                scope.declare(&prm.name, Local { ty: prm.ty.clone(), callee: None })?;
            }
            scope.block(&mut m.body, spans)?;
            m.entry_pp = m.body[0].pp.clone();
        }
    }

    let mut scope = Scope {
        sigs: &sigs,
        class: None,
        ret: None,
        frames: vec![HashMap::new()],
        declared: HashSet::new(),
        pos: Pos { line: 1, col: 1 },
    };
    scope.block(&mut p.main, spans)?;
    Ok(())
}
