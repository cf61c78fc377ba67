use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};
use super::ParseError;

/// Source positions of declarations, kept beside the AST for diagnostics.
#[derive(Debug, Default)]
pub(crate) struct Spans {
    pub stmts: HashMap<u32, Pos>,
    pub classes: Vec<Pos>,
    pub fields: Vec<Vec<Pos>>,
    pub methods: Vec<Vec<Pos>>,
    pub labels: Vec<(String, Pos)>,
}

const RESERVED: &[&str] = &[
    "class", "main", "new", "if", "else", "while", "return", "await", "this", "true", "false",
    "unit", "skip", "get", "Fut", "Int", "Bool", "Unit",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    idx: usize,
    next_pp: u32,
    pub spans: Spans,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            toks: tokenize(src)?,
            idx: 0,
            next_pp: 0,
            spans: Spans::default(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.idx].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.idx + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.idx].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.idx].tok.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError {
            line: self.pos().line,
            col: self.pos().col,
            message: format!("unexpected {}", self.peek()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&[p]))
        }
    }

    fn expect_kw(&mut self, kw: &'static str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn fresh_pp(&mut self, pos: Pos) -> ProgramPoint {
        let id = self.next_pp;
        self.next_pp += 1;
        self.spans.stmts.insert(id, pos);
        ProgramPoint::new(id)
    }

    pub fn program(&mut self) -> Result<Program, ParseError> {
        let mut classes = Vec::new();
        while self.is_kw("class") {
            classes.push(self.class()?);
        }
        if !self.is_kw("main") {
            return Err(self.unexpected(&["class", "main"]));
        }
        self.advance();
        let main = self.block()?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected(&["end of input"]));
        }
        Ok(Program { classes, main })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let t = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "Int" => Type::Int,
                "Bool" => Type::Bool,
                "Unit" => Type::Unit,
                "Fut" => Type::Fut,
                _ => return self.ident().map(Type::Class),
            },
            _ => return Err(self.unexpected(&["type"])),
        };
        self.advance();
        Ok(t)
    }

    fn starts_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if matches!(s.as_str(), "Int" | "Bool" | "Unit" | "Fut") || !RESERVED.contains(&s.as_str()))
    }

    fn class(&mut self) -> Result<ClassDecl, ParseError> {
        self.expect_kw("class")?;
        self.spans.classes.push(self.pos());
        let name = self.ident()?;
        self.expect_punct("{")?;
        let (mut fields, mut methods) = (Vec::new(), Vec::new());
        let (mut field_pos, mut method_pos) = (Vec::new(), Vec::new());
        while !self.is_punct("}") {
            if !self.starts_type() {
                return Err(self.unexpected(&["field", "method", "}"]));
            }
            let ty = self.ty()?;
            let pos = self.pos();
            let member = self.ident()?;
            if self.is_punct("(") {
                method_pos.push(pos);
                methods.push(self.method(ty, member)?);
            } else {
                let init = if self.eat_punct("=") {
                    Some(self.literal()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                field_pos.push(pos);
                fields.push(FieldDecl {
                    name: member,
                    ty,
                    init,
                });
            }
        }
        self.advance();
        self.spans.fields.push(field_pos);
        self.spans.methods.push(method_pos);
        let ctor_params = fields
            .iter()
            .filter(|f| f.init.is_none())
            .map(|f| Param {
                name: f.name.clone(),
                ty: f.ty.clone(),
            })
            .collect();
        Ok(ClassDecl {
            name,
            fields,
            ctor_params,
            methods,
        })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let negative = self.eat_punct("-");
        let lit = match self.peek().clone() {
            Tok::Int(i) => Literal::Int(if negative { -i } else { i }),
            Tok::Ident(s) if !negative && s == "true" => Literal::Bool(true),
            Tok::Ident(s) if !negative && s == "false" => Literal::Bool(false),
            Tok::Ident(s) if !negative && s == "unit" => Literal::Unit,
            _ => return Err(self.unexpected(&["literal"])),
        };
        self.advance();
        Ok(lit)
    }

    fn method(&mut self, ret: Type, name: Ident) -> Result<MethodDecl, ParseError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let ty = self.ty()?;
                let pname = self.ident()?;
                params.push(Param { name: pname, ty });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let close_pos = self.block_close_pos();
        let mut body = self.block()?;
        if body.is_empty() {
            let pp = self.fresh_pp(close_pos);
            body.push(Stmt {
                pp,
                kind: StmtKind::Skip,
            });
        }
        // A label after the method body names its entry point.
        if let Tok::Label(l) = self.peek().clone() {
            let pos = self.pos();
            self.advance();
            let entry = &mut body[0].pp;
            if entry.label.is_some() {
                return Err(ParseError::at(pos, format!("entry of `{name}` is already labeled")));
            }
            entry.label = Some(l.clone());
            self.spans.labels.push((l, pos));
        }
        let entry_pp = body[0].pp.clone();
        Ok(MethodDecl {
            name,
            ret,
            params,
            body,
            entry_pp,
        })
    }

    // Position of the `}` that closes the block starting at the current `{`.
    fn block_close_pos(&self) -> Pos {
        let mut depth = 0usize;
        for t in &self.toks[self.idx..] {
            match t.tok {
                Tok::Punct("{") => depth += 1,
                Tok::Punct("}") => {
                    depth -= 1;
                    if depth == 0 {
                        return t.pos;
                    }
                }
                _ => {}
            }
        }
        self.pos()
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected(&["}"]));
            }
            out.push(self.stmt()?);
        }
        self.advance();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        let pp = self.fresh_pp(pos);
        let kind = self.stmt_kind()?;
        let mut stmt = Stmt { pp, kind };
        while let Tok::Label(l) = self.peek().clone() {
            let lpos = self.pos();
            if stmt.pp.label.is_some() {
                return Err(ParseError::at(lpos, "statement carries more than one label"));
            }
            self.advance();
            stmt.pp.label = Some(l.clone());
            self.spans.labels.push((l, lpos));
        }
        Ok(stmt)
    }

    fn stmt_kind(&mut self) -> Result<StmtKind, ParseError> {
        if self.is_kw("if") {
            self.advance();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_block = self.block()?;
            let else_block = if self.is_kw("else") {
                self.advance();
                self.block()?
            } else {
                Vec::new()
            };
            return Ok(StmtKind::If {
                cond,
                then_block,
                else_block,
            });
        }
        if self.is_kw("while") {
            self.advance();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(StmtKind::While { cond, body });
        }
        if self.is_kw("return") {
            self.advance();
            let expr = self.expr()?;
            self.expect_punct(";")?;
            return Ok(StmtKind::Return { expr });
        }
        if self.is_kw("skip") {
            self.advance();
            self.expect_punct(";")?;
            return Ok(StmtKind::Skip);
        }
        if self.is_kw("await") {
            self.advance();
            let fut = self.ident()?;
            self.expect_punct("?")?;
            self.expect_punct(";")?;
            return Ok(StmtKind::AwaitFut { fut });
        }

        // `T x = rhs;`
        let is_decl = self.starts_type()
            && matches!(self.peek_at(1), Tok::Ident(s) if !RESERVED.contains(&s.as_str()));
        if is_decl {
            let ty = self.ty()?;
            let var = self.ident()?;
            self.expect_punct("=")?;
            let kind = self.rhs(Place::Local(var), Some(ty))?;
            self.expect_punct(";")?;
            return Ok(kind);
        }

        // `f.get;`
        if matches!(self.peek(), Tok::Ident(_))
            && *self.peek_at(1) == Tok::Punct(".")
            && *self.peek_at(2) == Tok::Ident("get".into())
        {
            let fut = self.ident()?;
            self.advance();
            self.advance();
            self.expect_punct(";")?;
            return Ok(StmtKind::GetFut {
                fut,
                dest: None,
                decl: None,
            });
        }

        // `x = rhs;` or `this.x = rhs;`
        let place = if matches!(self.peek(), Tok::Ident(s) if !RESERVED.contains(&s.as_str()))
            && *self.peek_at(1) == Tok::Punct("=")
        {
            let v = self.ident()?;
            Some(Place::Local(v))
        } else if self.is_kw("this")
            && *self.peek_at(1) == Tok::Punct(".")
            && *self.peek_at(3) == Tok::Punct("=")
        {
            self.advance();
            self.advance();
            Some(Place::Field(self.ident()?))
        } else {
            None
        };
        if let Some(place) = place {
            self.expect_punct("=")?;
            let kind = self.rhs(place, None)?;
            self.expect_punct(";")?;
            return Ok(kind);
        }

        // `target ! m(args);`
        let target = self.primary()?;
        if !self.is_punct("!") {
            return Err(self.unexpected(&["!", "="]));
        }
        let kind = self.async_call(None, target)?;
        self.expect_punct(";")?;
        Ok(kind)
    }

    fn rhs(&mut self, dest: Place, decl: Option<Type>) -> Result<StmtKind, ParseError> {
        if self.is_kw("new") {
            self.advance();
            let class = self.ident()?;
            let args = self.args()?;
            if let Some(t) = &decl {
                if t.class_name() != Some(class.as_str()) {
                    return Err(ParseError::at(
                        self.pos(),
                        format!("`new {class}` assigned to a variable of type {t}"),
                    ));
                }
            }
            return Ok(StmtKind::NewLocation {
                dest,
                decl: decl.is_some(),
                class,
                args,
            });
        }
        if matches!(self.peek(), Tok::Ident(_))
            && *self.peek_at(1) == Tok::Punct(".")
            && *self.peek_at(2) == Tok::Ident("get".into())
        {
            let fut = self.ident()?;
            self.advance();
            self.advance();
            return Ok(StmtKind::GetFut {
                fut,
                dest: Some(dest),
                decl,
            });
        }
        let pos = self.pos();
        let expr = self.expr()?;
        if self.is_punct("!") {
            let fut = match (dest, &decl) {
                (Place::Local(v), Some(Type::Fut)) => v,
                _ => {
                    return Err(ParseError::at(
                        pos,
                        "an asynchronous call must initialize a fresh `Fut` variable",
                    ))
                }
            };
            return self.async_call(Some(fut), expr);
        }
        Ok(match dest {
            Place::Local(var) => StmtKind::LocalAssign { var, decl, expr },
            Place::Field(field) => StmtKind::FieldAssign { field, expr },
        })
    }

    fn async_call(&mut self, fut: Option<Ident>, target: Expr) -> Result<StmtKind, ParseError> {
        if !matches!(target, Expr::Var(_) | Expr::Field(_) | Expr::This) {
            return Err(ParseError::at(self.pos(), "call target must be `this`, a variable or a field"));
        }
        self.expect_punct("!")?;
        let method = self.ident()?;
        let args = self.args()?;
        Ok(StmtKind::AsyncCall {
            fut,
            target,
            method,
            args,
        })
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if !self.is_punct(")") {
            loop {
                out.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(out)
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Punct("+") => Some(BinOp::Add),
            Tok::Punct("-") => Some(BinOp::Sub),
            Tok::Punct("<") => Some(BinOp::Lt),
            Tok::Punct("==") => Some(BinOp::Eq),
            Tok::Punct("&&") => Some(BinOp::And),
            _ => None,
        }
    }

    // Precedence climbing; all operators are left associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                Ok(Expr::Lit(Literal::Int(i)))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" | "unit" => Ok(Expr::Lit(self.literal()?)),
                "this" => {
                    self.advance();
                    if self.eat_punct(".") {
                        Ok(Expr::Field(self.ident()?))
                    } else {
                        Ok(Expr::This)
                    }
                }
                _ => Ok(Expr::Var(self.ident()?)),
            },
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}
