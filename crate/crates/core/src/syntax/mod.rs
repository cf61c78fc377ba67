//! The actor language: grammar, AST and program-point labeling.
//!
//! ```text
//! program  := class* "main" block
//! class    := "class" Name "{" (field | method)* "}"
//! field    := Type name ("=" literal)? ";"      // no initializer: constructor parameter
//! method   := Type name "(" params ")" block label?
//! stmt     := (simple | "if" "(" e ")" block ("else" block)? | "while" "(" e ")" block) label?
//! simple   := Type? x "=" e ";" | C x "=" "new" C "(" args ")" ";"
//!           | "Fut" f "=" target "!" m "(" args ")" ";" | target "!" m "(" args ")" ";"
//!           | "await" f "?" ";" | (Type? x "=")? f ".get" ";" | "return" e ";" | "skip" ";"
//! label    := "@pp:" NAME
//! ```
//!
//! A label after a method body names the method's entry statement.

mod ast;
mod check;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

pub use ast::*;
pub use lexer::Pos;
pub use pretty::pretty_print;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn at(pos: Pos, message: impl Into<String>) -> Self {
        Self {
            line: pos.line,
            col: pos.col,
            message: message.into(),
            expected: Vec::new(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Parse and check a program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut parser = parser::Parser::new(source)?;
    let mut program = parser.program()?;
    check::check(&mut program, &parser.spans)?;
    Ok(program)
}
