use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Expr, Symbols, Value};

/// Process syntax, templated over expressions so definitions can be parametrised.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessTerm {
    Stop,
    Skip,
    Div,
    Prefix(Expr, Box<ProcessTerm>),
    ExtChoice(Vec<ProcessTerm>),
    IntChoice(Vec<ProcessTerm>),
    /// `[] x : S @ P`
    ReplExt(String, Expr, Box<ProcessTerm>),
    /// `|~| x : S @ P`
    ReplInt(String, Expr, Box<ProcessTerm>),
    Guard(Expr, Box<ProcessTerm>),
    Seq(Box<ProcessTerm>, Box<ProcessTerm>),
    Hide(Box<ProcessTerm>, Expr),
    /// One-to-many relational renaming; each pair maps events or channel prefixes.
    Rename(Box<ProcessTerm>, Vec<(Expr, Expr)>),
    Interrupt(Box<ProcessTerm>, Box<ProcessTerm>),
    Call(String, Vec<Expr>),
}

impl ProcessTerm {
    pub fn prefix(e: Expr, p: ProcessTerm) -> Self {
        ProcessTerm::Prefix(e, Box::new(p))
    }
    pub fn guard(c: Expr, p: ProcessTerm) -> Self {
        ProcessTerm::Guard(c, Box::new(p))
    }
    pub fn seq(p: ProcessTerm, q: ProcessTerm) -> Self {
        ProcessTerm::Seq(Box::new(p), Box::new(q))
    }
    pub fn hide(p: ProcessTerm, x: Expr) -> Self {
        ProcessTerm::Hide(Box::new(p), x)
    }
    pub fn interrupt(p: ProcessTerm, q: ProcessTerm) -> Self {
        ProcessTerm::Interrupt(Box::new(p), Box::new(q))
    }
    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        ProcessTerm::Call(name.to_string(), args)
    }
    pub fn repl_ext(x: &str, s: Expr, p: ProcessTerm) -> Self {
        ProcessTerm::ReplExt(x.to_string(), s, Box::new(p))
    }
    pub fn repl_int(x: &str, s: Expr, p: ProcessTerm) -> Self {
        ProcessTerm::ReplInt(x.to_string(), s, Box::new(p))
    }

    /// Syntactic depth, counting every operator node.
    pub fn depth(&self) -> usize {
        use ProcessTerm::*;
        match self {
            Stop | Skip | Div | Call(..) => 1,
            Prefix(_, p) | ReplExt(_, _, p) | ReplInt(_, _, p) | Guard(_, p) | Hide(p, _) | Rename(p, _) => 1 + p.depth(),
            ExtChoice(ps) | IntChoice(ps) => 1 + ps.iter().map(|p| p.depth()).max().unwrap_or(0),
            Seq(p, q) | Interrupt(p, q) => 1 + p.depth().max(q.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunDef {
    pub params: Vec<String>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcDef {
    pub params: Vec<String>,
    pub body: ProcessTerm,
}

/// Everything a closed term may refer to.
#[derive(Clone, Debug)]
pub struct DefEnv {
    pub symbols: Arc<Symbols>,
    pub consts: BTreeMap<String, Value>,
    pub funs: BTreeMap<String, FunDef>,
    pub defs: BTreeMap<(String, usize), ProcDef>,
    /// Atom names usable as `Atom.id` component references.
    pub atoms: BTreeMap<String, Arc<str>>,
}

impl DefEnv {
    pub fn new(symbols: Symbols) -> Self {
        Self::with_symbols(Arc::new(symbols))
    }

    pub fn with_symbols(symbols: Arc<Symbols>) -> Self {
        DefEnv { symbols, consts: BTreeMap::new(), funs: BTreeMap::new(), defs: BTreeMap::new(), atoms: BTreeMap::new() }
    }

    pub fn add_fun(&mut self, name: &str, params: &[&str], body: Expr) {
        let params = params.iter().map(|s| s.to_string()).collect();
        self.funs.insert(name.to_string(), FunDef { params, body });
    }

    pub fn define(&mut self, name: &str, params: &[&str], body: ProcessTerm) {
        let params: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        self.defs.insert((name.to_string(), params.len()), ProcDef { params, body });
    }

    pub fn add_atom(&mut self, name: &str) {
        self.atoms.insert(name.to_string(), Arc::from(name));
    }

    pub fn def(&self, name: &str, arity: usize) -> Option<&ProcDef> {
        self.defs.get(&(name.to_string(), arity))
    }

    /// A name not yet used by any definition, built from `stem`.
    pub fn fresh_name(&self, stem: &str) -> String {
        let mut n = stem.to_string();
        let mut k = 0;
        while self.defs.keys().any(|(d, _)| *d == n) {
            k += 1;
            n = format!("{stem}_{k}");
        }
        n
    }
}

impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ProcessTerm::*;
        fn join(f: &mut fmt::Formatter<'_>, ps: &[ProcessTerm], op: &str) -> fmt::Result {
            write!(f, "(")?;
            for (i, p) in ps.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{p}")?;
            }
            write!(f, ")")
        }
        match self {
            Stop => write!(f, "STOP"),
            Skip => write!(f, "SKIP"),
            Div => write!(f, "DIV"),
            Prefix(e, p) => write!(f, "{e} -> {p}"),
            ExtChoice(ps) => join(f, ps, "[]"),
            IntChoice(ps) => join(f, ps, "|~|"),
            ReplExt(x, s, p) => write!(f, "([] {x} : {s} @ {p})"),
            ReplInt(x, s, p) => write!(f, "(|~| {x} : {s} @ {p})"),
            Guard(c, p) => write!(f, "({c} & {p})"),
            Seq(p, q) => write!(f, "({p} ; {q})"),
            Hide(p, x) => write!(f, "({p} \\ {x})"),
            Rename(p, r) => {
                write!(f, "({p}[[")?;
                for (i, (a, b)) in r.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a} <- {b}")?;
                }
                write!(f, "]])")
            }
            Interrupt(p, q) => write!(f, "({p} /\\ {q})"),
            Call(n, args) => {
                write!(f, "{n}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}
