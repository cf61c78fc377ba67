use std::collections::HashMap;

use crate::syntax::{Expr, Ident, Place, Program, ProgramPoint, Stmt, StmtKind};

#[derive(Debug, Clone)]
pub(crate) enum OpKind<'p> {
    SetLocal(&'p Ident, &'p Expr),
    SetField(&'p Ident, &'p Expr),
    New {
        dest: &'p Place,
        class: &'p Ident,
        args: &'p [Expr],
    },
    Call {
        fut: Option<&'p Ident>,
        target: &'p Expr,
        method: &'p Ident,
        args: &'p [Expr],
    },
    Await(&'p Ident),
    Get {
        fut: &'p Ident,
        dest: Option<&'p Place>,
    },
    /// Fall through when `cond` holds, jump otherwise.
    Branch {
        cond: &'p Expr,
        target: usize,
    },
    Jump(usize),
    Return(&'p Expr),
    Skip,
}

#[derive(Debug, Clone)]
pub(crate) struct Op<'p> {
    pub pp: &'p ProgramPoint,
    pub kind: OpKind<'p>,
}

/// Flat instruction list of every method body and of main.
#[derive(Debug, Clone)]
pub(crate) struct Code<'p> {
    pub methods: HashMap<(usize, usize), Vec<Op<'p>>>,
    pub main: Vec<Op<'p>>,
}

impl<'p> Code<'p> {
    pub fn new(p: &'p Program) -> Self {
        let mut methods = HashMap::new();
        for (ci, c) in p.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                methods.insert((ci, mi), compile(&m.body));
            }
        }
        Code {
            methods,
            main: compile(&p.main),
        }
    }

    pub fn body(&self, method: Option<(usize, usize)>) -> &[Op<'p>] {
        match method {
            Some(k) => &self.methods[&k],
            None => &self.main,
        }
    }
}

fn compile(body: &[Stmt]) -> Vec<Op<'_>> {
    let mut out = Vec::new();
    emit(body, &mut out);
    out
}

fn emit<'p>(block: &'p [Stmt], out: &mut Vec<Op<'p>>) {
    for s in block {
        let pp = &s.pp;
        match &s.kind {
            StmtKind::LocalAssign { var, expr, .. } => out.push(Op {
                pp,
                kind: OpKind::SetLocal(var, expr),
            }),
            StmtKind::FieldAssign { field, expr } => out.push(Op {
                pp,
                kind: OpKind::SetField(field, expr),
            }),
            StmtKind::NewLocation { dest, class, args, .. } => out.push(Op {
                pp,
                kind: OpKind::New { dest, class, args },
            }),
            StmtKind::AsyncCall {
                fut,
                target,
                method,
                args,
            } => out.push(Op {
                pp,
                kind: OpKind::Call {
                    fut: fut.as_ref(),
                    target,
                    method,
                    args,
                },
            }),
            StmtKind::AwaitFut { fut } => out.push(Op {
                pp,
                kind: OpKind::Await(fut),
            }),
            StmtKind::GetFut { fut, dest, .. } => out.push(Op {
                pp,
                kind: OpKind::Get {
                    fut,
                    dest: dest.as_ref(),
                },
            }),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let branch = out.len();
                out.push(Op {
                    pp,
                    kind: OpKind::Branch { cond, target: 0 },
                });
                emit(then_block, out);
                let jump = out.len();
                out.push(Op { pp, kind: OpKind::Jump(0) });
                let else_start = out.len();
                emit(else_block, out);
                let end = out.len();
                out[branch].kind = OpKind::Branch { cond, target: else_start };
                out[jump].kind = OpKind::Jump(end);
            }
            StmtKind::While { cond, body } => {
                let head = out.len();
                out.push(Op {
                    pp,
                    kind: OpKind::Branch { cond, target: 0 },
                });
                emit(body, out);
                out.push(Op {
                    pp,
                    kind: OpKind::Jump(head),
                });
                let end = out.len();
                out[head].kind = OpKind::Branch { cond, target: end };
            }
            StmtKind::Return { expr } => out.push(Op {
                pp,
                kind: OpKind::Return(expr),
            }),
            StmtKind::Skip => out.push(Op { pp, kind: OpKind::Skip }),
        }
    }
}

/// Follow jumps from `pc`.
pub(crate) fn settle(ops: &[Op<'_>], mut pc: usize) -> usize {
    while let Some(Op {
        kind: OpKind::Jump(t), ..
    }) = ops.get(pc)
    {
        pc = *t;
    }
    pc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn loops_and_branches_compile_to_jumps() {
        let p = parse(
            "class A { Int x = 0; Unit m() {
                while (x < 2) { x = x + 1; }
                if (x == 2) { skip; } else { x = 0; }
            } } main { }",
        )
        .unwrap();
        let code = Code::new(&p);
        let ops = code.body(Some((0, 0)));
        // branch, inc, jump, branch, skip, jump, reset
        assert_eq!(ops.len(), 7);
        assert!(matches!(ops[0].kind, OpKind::Branch { target: 3, .. }));
        assert!(matches!(ops[2].kind, OpKind::Jump(0)));
        assert!(matches!(ops[3].kind, OpKind::Branch { target: 6, .. }));
        assert!(matches!(ops[5].kind, OpKind::Jump(7)));
        assert_eq!(settle(ops, 5), 7);
        assert_eq!(settle(ops, 2), 0);
    }
}
