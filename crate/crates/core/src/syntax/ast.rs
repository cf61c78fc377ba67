use std::fmt;

use serde::Serialize;

pub type Ident = String;

/// A statement position. Ids are assigned in source order and are unique
/// within one parsed program; the label comes from an `@pp:NAME` annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProgramPoint {
    pub id: u32,
    pub label: Option<String>,
}

impl ProgramPoint {
    pub fn new(id: u32) -> Self {
        Self { id, label: None }
    }

    pub fn labeled(id: u32, label: impl Into<String>) -> Self {
        Self {
            id,
            label: Some(label.into()),
        }
    }

    /// True if the point carries the annotation `@pp:<name>`.
    pub fn is(&self, name: &str) -> bool {
        self.label.as_deref() == Some(name)
    }
}

impl fmt::Display for ProgramPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "pp:{l}"),
            None => write!(f, "pp#{}", self.id),
        }
    }
}

impl Serialize for ProgramPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Bool,
    Unit,
    Fut,
    Class(Ident),
}

impl Type {
    pub fn class_name(&self) -> Option<&str> {
        match self {
            Type::Class(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("Int"),
            Type::Bool => f.write_str("Bool"),
            Type::Unit => f.write_str("Unit"),
            Type::Fut => f.write_str("Fut"),
            Type::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Unit,
}

impl Literal {
    /// Value a primitive of type `ty` takes when nothing initializes it.
    pub fn default_for(ty: &Type) -> Option<Literal> {
        match ty {
            Type::Int => Some(Literal::Int(0)),
            Type::Bool => Some(Literal::Bool(false)),
            Type::Unit => Some(Literal::Unit),
            Type::Fut | Type::Class(_) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Unit => f.write_str("unit"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Lt,
    Eq,
    And,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Eq => "==",
            BinOp::And => "&&",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::And => 1,
            BinOp::Eq => 2,
            BinOp::Lt => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(Literal),
    Var(Ident),
    Field(Ident),
    This,
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Fields read anywhere inside the expression.
    pub fn collect_fields<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Field(f) => out.push(f),
            Expr::Not(e) => e.collect_fields(out),
            Expr::Binary(_, l, r) => {
                l.collect_fields(out);
                r.collect_fields(out);
            }
            Expr::Lit(_) | Expr::Var(_) | Expr::This => {}
        }
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        match self {
            Expr::Var(v) => v == name,
            Expr::Not(e) => e.mentions_var(name),
            Expr::Binary(_, l, r) => l.mentions_var(name) || r.mentions_var(name),
            Expr::Lit(_) | Expr::Field(_) | Expr::This => false,
        }
    }
}

/// Assignment destination of `new` and `get` results.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Place {
    Local(Ident),
    Field(Ident),
}

impl Place {
    pub fn field(&self) -> Option<&str> {
        match self {
            Place::Field(f) => Some(f),
            Place::Local(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    FieldAssign {
        field: Ident,
        expr: Expr,
    },
    /// `decl` is the declared type when the statement introduces the local.
    LocalAssign {
        var: Ident,
        decl: Option<Type>,
        expr: Expr,
    },
    NewLocation {
        dest: Place,
        decl: bool,
        class: Ident,
        args: Vec<Expr>,
    },
    AsyncCall {
        fut: Option<Ident>,
        target: Expr,
        method: Ident,
        args: Vec<Expr>,
    },
    AwaitFut {
        fut: Ident,
    },
    GetFut {
        fut: Ident,
        dest: Option<Place>,
        decl: Option<Type>,
    },
    If {
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return {
        expr: Expr,
    },
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub pp: ProgramPoint,
    pub kind: StmtKind,
}

impl Stmt {
    /// The field this statement writes, if any.
    pub fn written_field(&self) -> Option<&str> {
        match &self.kind {
            StmtKind::FieldAssign { field, .. } => Some(field),
            StmtKind::NewLocation { dest, .. } => dest.field(),
            StmtKind::GetFut { dest: Some(d), .. } => d.field(),
            _ => None,
        }
    }

    /// Fields read or written by this statement alone. For `if`/`while` only
    /// the condition counts; nested blocks are separate statements.
    pub fn accessed_fields(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match &self.kind {
            StmtKind::FieldAssign { field, expr } => {
                out.push(field.as_str());
                expr.collect_fields(&mut out);
            }
            StmtKind::LocalAssign { expr, .. } | StmtKind::Return { expr } => {
                expr.collect_fields(&mut out)
            }
            StmtKind::NewLocation { dest, args, .. } => {
                out.extend(dest.field());
                args.iter().for_each(|a| a.collect_fields(&mut out));
            }
            StmtKind::AsyncCall { target, args, .. } => {
                target.collect_fields(&mut out);
                args.iter().for_each(|a| a.collect_fields(&mut out));
            }
            StmtKind::GetFut { dest, .. } => out.extend(dest.as_ref().and_then(Place::field)),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => {
                cond.collect_fields(&mut out)
            }
            StmtKind::AwaitFut { .. } | StmtKind::Skip => {}
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_await(&self) -> bool {
        matches!(self.kind, StmtKind::AwaitFut { .. })
    }
}

/// Visit every statement of a block, including nested ones, in source order.
pub fn walk_stmts<'a>(block: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        match &s.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                walk_stmts(then_block, f);
                walk_stmts(else_block, f);
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Ident,
    pub ty: Type,
}

/// A field without an initializer is a constructor parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: Ident,
    pub ty: Type,
    pub init: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: Ident,
    pub ret: Type,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub entry_pp: ProgramPoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: Ident,
    pub fields: Vec<FieldDecl>,
    pub ctor_params: Vec<Param>,
    pub methods: Vec<MethodDecl>,
}

impl ClassDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn method_index(&self, name: &str) -> Option<usize> {
        self.methods.iter().position(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    pub main: Vec<Stmt>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn method(&self, class: &str, method: &str) -> Option<&MethodDecl> {
        self.class(class)?.method(method)
    }

    /// Declaration-order key of a method; `None` for unknown names.
    pub fn method_order(&self, class: &str, method: &str) -> Option<(usize, usize)> {
        let ci = self.class_index(class)?;
        let mi = self.classes[ci].method_index(method)?;
        Some((ci, mi))
    }

    /// Every statement of the program, methods first (in declaration
    /// order), then main.
    pub fn all_stmts(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for c in &self.classes {
            for m in &c.methods {
                walk_stmts(&m.body, &mut |s| out.push(s));
            }
        }
        walk_stmts(&self.main, &mut |s| out.push(s));
        out
    }

    pub fn find_label(&self, label: &str) -> Option<&ProgramPoint> {
        self.all_stmts()
            .into_iter()
            .map(|s| &s.pp)
            .find(|pp| pp.is(label))
    }
}
