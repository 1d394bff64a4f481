//! Textual front end: `.net` model files and `.pattern.json` descriptors.
//!
//! A model is a list of declarations:
//!
//! ```text
//! version 1
//! const N = 3
//! channel pickup, putdown : {0..N-1}.{0..N-1}
//! channel sit, eat, getup : {0..N-1}
//! fun next(i) = (i + 1) % N
//! Phil(id) = sit.id -> pickup.id.id -> pickup.id!next(id) -> ... -> Phil(id)
//! atom Phil(id) : {| sit.id, eat.id, getup.id, pickup.id, putdown.id |} = Phil(id)
//! instance Phil : {0..N-1}
//! component Monitor : {sit.0} = M
//! ```
//!
//! Atoms are instantiated once per element of their instance set and named
//! `Atom.v`; multi-parameter atoms take tuples and are named `Atom.v1.v2`.
//! `ch?x -> P` is an indexed external choice over the declared domain of the
//! field `x` stands in; `ch!e` is the same as `ch.e`.

mod descriptor;
mod elaborate;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{EvalError, Expr, ProcessTerm};

pub use descriptor::{echo_descriptor, parse_descriptor, DescriptorError, DESCRIPTOR_VERSION};
pub use elaborate::{elaborate, elaborate_with, Elaborated};
pub use parser::{parse_expr, parse_network, parse_term};
pub use pretty::{print_expr, print_network, print_term};

/// Model files declare this version, or none.
pub const NET_VERSION: i64 = 1;

/// Marker for the domain of a `?x` input, resolved during elaboration.
pub(crate) const INPUT_DOMAIN: &str = "$input";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub pos: Pos,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { pos, severity: Severity::Error, message: message.into() }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { pos, severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {}", self.pos, self.message)
    }
}

/// A model file and the diagnostics raised while reading it.
#[derive(Clone, Debug)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceFile { path: path.into(), text: text.into(), diagnostics: Vec::new() }
    }

    pub fn read(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(SourceFile::new(path.display().to_string(), std::fs::read_to_string(path)?))
    }

    /// Parse, recording any diagnostics in position order.
    pub fn parse(&mut self) -> Option<NetworkDecl> {
        match parse_network(&self.text) {
            Ok(d) => Some(d),
            Err(mut ds) => {
                self.diagnostics.append(&mut ds);
                self.diagnostics.sort_by_key(|d| d.pos);
                None
            }
        }
    }

    pub fn render_diagnostics(&self) -> String {
        self.diagnostics.iter().map(|d| format!("{}:{d}\n", self.path)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDecl {
    pub name: String,
    /// One finite integer set per field.
    pub fields: Vec<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: ProcessTerm,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomDecl {
    pub name: String,
    pub params: Vec<String>,
    pub alphabet: Expr,
    pub behaviour: ProcessTerm,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceDecl {
    pub atom: String,
    pub ids: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentDecl {
    pub name: String,
    pub alphabet: Expr,
    pub behaviour: ProcessTerm,
    pub pos: Pos,
}

/// Components appear in the network in placement order.
#[derive(Clone, Debug, PartialEq)]
pub enum Placement {
    Instance(InstanceDecl),
    Component(ComponentDecl),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkDecl {
    pub version: Option<(i64, Pos)>,
    pub consts: Vec<ConstDecl>,
    pub channels: Vec<ChannelDecl>,
    pub funs: Vec<FunDecl>,
    pub defs: Vec<ProcDecl>,
    pub atoms: Vec<AtomDecl>,
    pub placements: Vec<Placement>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DslError {
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Syntax(Vec<Diagnostic>),
    #[error("{pos}: unknown channel `{name}`")]
    UnknownChannel { name: String, pos: Pos },
    #[error("{pos}: channel `{channel}` has {arity} fields, input reads field {field}")]
    ChannelArity { channel: String, arity: usize, field: usize, pos: Pos },
    #[error("declared channels exceed the event universe limit")]
    RangeOverflow,
    #[error("{pos}: component `{name}` is declared twice")]
    DuplicateComponentName { name: String, pos: Pos },
    #[error("{pos}: alphabet of `{component}` does not evaluate to events: {reason}")]
    NonGroundAlphabet { component: String, reason: String, pos: Pos },
    #[error("{pos}: {what}: {source}")]
    Eval { what: String, pos: Pos, source: EvalError },
    #[error("{pos}: {message}")]
    Invalid { message: String, pos: Pos },
}

/// Parse and elaborate in one step.
pub fn load_network(src: &str) -> Result<Elaborated, DslError> {
    let decl = parse_network(src).map_err(DslError::Syntax)?;
    elaborate(&decl)
}

#[cfg(test)]
mod tests;
