use std::collections::HashSet;
use std::fmt::Write;

use super::ast::*;

/// Render a program back to source. Labels are printed after the statement
/// they name, so `parse(pretty_print(p)) == p`.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for c in &p.classes {
        let _ = writeln!(out, "class {} {{", c.name);
        for f in &c.fields {
            match f.init {
                Some(lit) => {
                    let _ = writeln!(out, "  {} {} = {};", f.ty, f.name, lit);
                }
                None => {
                    let _ = writeln!(out, "  {} {};", f.ty, f.name);
                }
            }
        }
        for m in &c.methods {
            let params: Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
            let _ = writeln!(out, "  {} {}({}) {{", m.ret, m.name, params.join(", "));
            let mut locals: HashSet<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
            walk_stmts(&m.body, &mut |s| {
                if let Some(name) = declared_local(s) {
                    locals.insert(name);
                }
            });
            block(&mut out, &m.body, 2, &locals);
            out.push_str("  }\n");
        }
        out.push_str("}\n");
    }
    if p.main.is_empty() {
        out.push_str("main { }\n");
    } else {
        out.push_str("main {\n");
        block(&mut out, &p.main, 1, &HashSet::new());
        out.push_str("}\n");
    }
    out
}

fn declared_local(s: &Stmt) -> Option<&str> {
    match &s.kind {
        StmtKind::LocalAssign { var, decl: Some(_), .. } => Some(var),
        StmtKind::NewLocation {
            dest: Place::Local(v),
            decl: true,
            ..
        } => Some(v),
        StmtKind::AsyncCall { fut: Some(f), .. } => Some(f),
        StmtKind::GetFut {
            dest: Some(Place::Local(v)),
            decl: Some(_),
            ..
        } => Some(v),
        _ => None,
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn label(out: &mut String, pp: &ProgramPoint) {
    if let Some(l) = &pp.label {
        let _ = write!(out, " @pp:{l}");
    }
    out.push('\n');
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize, locals: &HashSet<&str>) {
    for s in stmts {
        indent(out, depth);
        stmt(out, s, depth, locals);
    }
}

fn field(name: &str, locals: &HashSet<&str>) -> String {
    if locals.contains(name) {
        format!("this.{name}")
    } else {
        name.to_string()
    }
}

fn place(p: &Place, locals: &HashSet<&str>) -> String {
    match p {
        Place::Local(v) => v.clone(),
        Place::Field(f) => field(f, locals),
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize, locals: &HashSet<&str>) {
    let e = |x: &Expr| expr(x, locals, 0);
    let args = |xs: &[Expr]| xs.iter().map(e).collect::<Vec<_>>().join(", ");
    match &s.kind {
        StmtKind::FieldAssign { field: f, expr: x } => {
            let _ = write!(out, "{} = {};", field(f, locals), e(x));
        }
        StmtKind::LocalAssign { var, decl, expr: x } => {
            if let Some(t) = decl {
                let _ = write!(out, "{t} ");
            }
            let _ = write!(out, "{var} = {};", e(x));
        }
        StmtKind::NewLocation {
            dest,
            decl,
            class,
            args: a,
        } => {
            if *decl {
                let _ = write!(out, "{class} ");
            }
            let _ = write!(out, "{} = new {class}({});", place(dest, locals), args(a));
        }
        StmtKind::AsyncCall {
            fut,
            target,
            method,
            args: a,
        } => {
            if let Some(f) = fut {
                let _ = write!(out, "Fut {f} = ");
            }
            let _ = write!(out, "{} ! {method}({});", e(target), args(a));
        }
        StmtKind::AwaitFut { fut } => {
            let _ = write!(out, "await {fut}?;");
        }
        StmtKind::GetFut { fut, dest, decl } => {
            if let Some(d) = dest {
                if let Some(t) = decl {
                    let _ = write!(out, "{t} ");
                }
                let _ = write!(out, "{} = ", place(d, locals));
            }
            let _ = write!(out, "{fut}.get;");
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = writeln!(out, "if ({}) {{", e(cond));
            block(out, then_block, depth + 1, locals);
            indent(out, depth);
            out.push('}');
            if !else_block.is_empty() {
                out.push_str(" else {\n");
                block(out, else_block, depth + 1, locals);
                indent(out, depth);
                out.push('}');
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", e(cond));
            block(out, body, depth + 1, locals);
            indent(out, depth);
            out.push('}');
        }
        StmtKind::Return { expr: x } => {
            let _ = write!(out, "return {};", e(x));
        }
        StmtKind::Skip => out.push_str("skip;"),
    }
    label(out, &s.pp);
}

fn expr(x: &Expr, locals: &HashSet<&str>, min_prec: u8) -> String {
    match x {
        Expr::Lit(l) => l.to_string(),
        Expr::Var(v) => v.clone(),
        Expr::Field(f) => field(f, locals),
        Expr::This => "this".into(),
        Expr::Not(inner) => format!("!{}", expr(inner, locals, 5)),
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let s = format!(
                "{} {} {}",
                expr(l, locals, prec),
                op.symbol(),
                expr(r, locals, prec + 1)
            );
            if prec < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
