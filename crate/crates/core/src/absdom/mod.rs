//! Abstractions and per-instruction static facts.
//!
//! Locations are abstracted by their creation site and tasks by the method
//! they run. [`Facts`] answers the three questions the interference
//! analysis asks about an instruction: which fields were touched on the way
//! to it, whether a release point may precede it, and which instructions
//! write a given field. [`PointsTo`] maps reference variables and fields to
//! creation sites.

mod cfg;
mod facts;
mod points_to;

use std::fmt;

use serde::Serialize;

use crate::syntax::{ClassDecl, Ident, ProgramPoint, Program, Stmt};

pub use cfg::Cfg;
pub use facts::{Facts, InstrKind, TaskFacts};
pub use points_to::{resolve_references, PointsTo, RefKey};

pub const MAIN: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    /// The location running the main block.
    Main,
    New(ProgramPoint),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractLocation {
    pub site: Site,
    pub class_name: Ident,
}

impl AbstractLocation {
    pub fn main() -> Self {
        Self {
            site: Site::Main,
            class_name: MAIN.into(),
        }
    }

    pub fn created_at(pp: ProgramPoint, class_name: impl Into<Ident>) -> Self {
        Self {
            site: Site::New(pp),
            class_name: class_name.into(),
        }
    }
}

impl fmt::Display for AbstractLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.site {
            Site::Main => f.write_str("obj@main"),
            Site::New(pp) => write!(f, "obj@{pp}"),
        }
    }
}

impl Serialize for AbstractLocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A method, standing for every task that executes it. The main block is
/// the task `main.main`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractTask {
    pub class_name: Ident,
    pub method_name: Ident,
}

impl AbstractTask {
    pub fn new(class_name: impl Into<Ident>, method_name: impl Into<Ident>) -> Self {
        Self {
            class_name: class_name.into(),
            method_name: method_name.into(),
        }
    }

    pub fn main() -> Self {
        Self::new(MAIN, MAIN)
    }

    pub fn is_main(&self) -> bool {
        self.class_name == MAIN
    }

    /// Parse `Class.method`.
    pub fn parse(s: &str) -> Option<Self> {
        let (c, m) = s.split_once('.')?;
        (!c.is_empty() && !m.is_empty()).then(|| Self::new(c, m))
    }

    /// Declaration-order sort key; main sorts last.
    pub fn order_key(&self, p: &Program) -> (usize, usize) {
        p.method_order(&self.class_name, &self.method_name)
            .unwrap_or((usize::MAX, 0))
    }
}

impl fmt::Display for AbstractTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_main() {
            f.write_str(MAIN)
        } else {
            write!(f, "{}.{}", self.class_name, self.method_name)
        }
    }
}

impl Serialize for AbstractTask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A body of code together with the task it belongs to.
pub(crate) struct Scope<'p> {
    pub task: AbstractTask,
    pub class: Option<&'p ClassDecl>,
    pub body: &'p [Stmt],
}

pub(crate) fn scopes(p: &Program) -> Vec<Scope<'_>> {
    let mut out = Vec::new();
    for c in &p.classes {
        for m in &c.methods {
            out.push(Scope {
                task: AbstractTask::new(&c.name, &m.name),
                class: Some(c),
                body: &m.body,
            });
        }
    }
    out.push(Scope {
        task: AbstractTask::main(),
        class: None,
        body: &p.main,
    });
    out
}
