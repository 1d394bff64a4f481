//! Integer, set and event expressions used inside process terms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DefEnv, EventId, EventSet};

/// Runtime value of an expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Event(EventId),
    /// A channel applied to some but not all of its fields.
    Chan {
        chan: u32,
        prefix: Vec<i64>,
    },
    /// Component reference `Atom.id`.
    Comp(Arc<str>, i64),
    Set(BTreeSet<Value>),
    Seq(Vec<Value>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Event(_) => "event",
            Value::Chan { .. } => "channel",
            Value::Comp(..) => "component",
            Value::Set(_) => "set",
            Value::Seq(_) => "sequence",
            Value::Tuple(_) => "tuple",
        }
    }

    pub fn int_set<I: IntoIterator<Item = i64>>(it: I) -> Value {
        Value::Set(it.into_iter().map(Value::Int).collect())
    }

    /// Elements of a set or sequence, in iteration order.
    pub fn elements(&self) -> Result<Vec<Value>, EvalError> {
        match self {
            Value::Set(s) => Ok(s.iter().cloned().collect()),
            Value::Seq(s) => Ok(s.clone()),
            other => Err(EvalError::Type { expected: "set or sequence", found: other.kind() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
    Card,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Cat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Cat => "^",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gen {
    Bind(String, Expr),
    Cond(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    /// `head.f1.f2`; the head names a channel, an atom or a channel-valued variable.
    Dotted(String, Vec<Expr>),
    /// `{| e1, ..., en |}`
    Ext(Vec<Expr>),
    SetLit(Vec<Expr>),
    SeqLit(Vec<Expr>),
    Range(Box<Expr>, Box<Expr>),
    SetComp(Box<Expr>, Vec<Gen>),
    SeqComp(Box<Expr>, Vec<Gen>),
    Tuple(Vec<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Lit(Value::Int(v))
    }
    pub fn var(n: &str) -> Expr {
        Expr::Var(n.to_string())
    }
    pub fn event(e: EventId) -> Expr {
        Expr::Lit(Value::Event(e))
    }
    pub fn events(es: &EventSet) -> Expr {
        Expr::Lit(Value::Set(es.iter().map(Value::Event).collect()))
    }
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("expected {expected}, found {found}")]
    Type { expected: &'static str, found: &'static str },
    #[error("division by zero")]
    DivByZero,
    #[error("`{0}` is not an event of the declared universe")]
    UnknownEvent(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("{0} of an empty sequence")]
    EmptySeq(&'static str),
    #[error("integer overflow")]
    Overflow,
    #[error("function recursion too deep")]
    TooDeep,
}

const MAX_FUN_DEPTH: usize = 512;

pub type Locals = Vec<(String, Value)>;

fn lookup<'a>(locals: &'a [(String, Value)], name: &str) -> Option<&'a Value> {
    locals.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
}

impl DefEnv {
    pub fn eval(&self, e: &Expr, locals: &[(String, Value)]) -> Result<Value, EvalError> {
        Evaluator { env: self, depth: 0 }.eval(e, &mut locals.to_vec())
    }

    pub fn eval_int(&self, e: &Expr, locals: &[(String, Value)]) -> Result<i64, EvalError> {
        as_int(&self.eval(e, locals)?)
    }

    pub fn eval_bool(&self, e: &Expr, locals: &[(String, Value)]) -> Result<bool, EvalError> {
        as_bool(&self.eval(e, locals)?)
    }

    pub fn eval_event(&self, e: &Expr, locals: &[(String, Value)]) -> Result<EventId, EvalError> {
        match self.eval(e, locals)? {
            Value::Event(ev) => Ok(ev),
            Value::Chan { chan, prefix } => {
                Err(EvalError::UnknownEvent(dotted_name(self.symbols.channel(chan as usize).name.as_str(), &prefix)))
            }
            other => Err(EvalError::Type { expected: "event", found: other.kind() }),
        }
    }

    /// Flatten an event, channel prefix or set thereof to an event set.
    pub fn to_events(&self, v: &Value) -> Result<EventSet, EvalError> {
        let mut out = Vec::new();
        self.collect_events(v, &mut out)?;
        Ok(out.into_iter().collect())
    }

    fn collect_events(&self, v: &Value, out: &mut Vec<EventId>) -> Result<(), EvalError> {
        match v {
            Value::Event(e) => out.push(*e),
            Value::Chan { chan, prefix } => out.extend(self.symbols.extension(*chan as usize, prefix)),
            Value::Set(s) => {
                for x in s {
                    self.collect_events(x, out)?;
                }
            }
            Value::Seq(s) => {
                for x in s {
                    self.collect_events(x, out)?;
                }
            }
            other => return Err(EvalError::Type { expected: "event set", found: other.kind() }),
        }
        Ok(())
    }

    pub fn eval_events(&self, e: &Expr, locals: &[(String, Value)]) -> Result<EventSet, EvalError> {
        let v = self.eval(e, locals)?;
        self.to_events(&v)
    }
}

fn dotted_name(head: &str, fields: &[i64]) -> String {
    let mut s = head.to_string();
    for f in fields {
        s.push('.');
        s.push_str(&f.to_string());
    }
    s
}

pub fn as_int(v: &Value) -> Result<i64, EvalError> {
    match v {
        Value::Int(i) => Ok(*i),
        other => Err(EvalError::Type { expected: "int", found: other.kind() }),
    }
}

pub fn as_bool(v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(EvalError::Type { expected: "bool", found: other.kind() }),
    }
}

fn as_set(v: Value) -> Result<BTreeSet<Value>, EvalError> {
    match v {
        Value::Set(s) => Ok(s),
        Value::Seq(s) => Ok(s.into_iter().collect()),
        other => Err(EvalError::Type { expected: "set", found: other.kind() }),
    }
}

fn as_seq(v: Value) -> Result<Vec<Value>, EvalError> {
    match v {
        Value::Seq(s) => Ok(s),
        other => Err(EvalError::Type { expected: "sequence", found: other.kind() }),
    }
}

struct Evaluator<'a> {
    env: &'a DefEnv,
    depth: usize,
}

impl Evaluator<'_> {
    fn eval(&mut self, e: &Expr, locals: &mut Locals) -> Result<Value, EvalError> {
        match e {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(n) => {
                if let Some(v) = lookup(locals, n) {
                    return Ok(v.clone());
                }
                if let Some(v) = self.env.consts.get(n) {
                    return Ok(v.clone());
                }
                if let Some(ci) = self.env.symbols.channel_index(n) {
                    return self.extend(ci as u32, Vec::new());
                }
                Err(EvalError::Unbound(n.clone()))
            }
            Expr::Unary(op, a) => {
                let v = self.eval(a, locals)?;
                match op {
                    UnOp::Neg => Ok(Value::Int(as_int(&v)?.checked_neg().ok_or(EvalError::Overflow)?)),
                    UnOp::Not => Ok(Value::Bool(!as_bool(&v)?)),
                    UnOp::Card => match v {
                        Value::Set(s) => Ok(Value::Int(s.len() as i64)),
                        Value::Seq(s) => Ok(Value::Int(s.len() as i64)),
                        other => Err(EvalError::Type { expected: "set or sequence", found: other.kind() }),
                    },
                }
            }
            Expr::Binary(op, a, b) => self.binary(*op, a, b, locals),
            Expr::If(c, t, f) => {
                if as_bool(&self.eval(c, locals)?)? {
                    self.eval(t, locals)
                } else {
                    self.eval(f, locals)
                }
            }
            Expr::Call(name, args) => {
                let vals = args.iter().map(|a| self.eval(a, locals)).collect::<Result<Vec<_>, _>>()?;
                self.call(name, vals)
            }
            Expr::Dotted(head, fields) => {
                let vals = fields.iter().map(|a| self.eval(a, locals)).collect::<Result<Vec<_>, _>>()?;
                self.dotted(head, vals, locals)
            }
            Expr::Ext(items) => {
                let mut out = BTreeSet::new();
                for it in items {
                    let v = self.eval(it, locals)?;
                    for ev in self.env.to_events(&v)?.iter() {
                        out.insert(Value::Event(ev));
                    }
                }
                Ok(Value::Set(out))
            }
            Expr::SetLit(items) => {
                let mut out = BTreeSet::new();
                for it in items {
                    out.insert(self.eval(it, locals)?);
                }
                Ok(Value::Set(out))
            }
            Expr::SeqLit(items) => Ok(Value::Seq(items.iter().map(|it| self.eval(it, locals)).collect::<Result<_, _>>()?)),
            Expr::Tuple(items) => Ok(Value::Tuple(items.iter().map(|it| self.eval(it, locals)).collect::<Result<_, _>>()?)),
            Expr::Range(lo, hi) => {
                let lo = as_int(&self.eval(lo, locals)?)?;
                let hi = as_int(&self.eval(hi, locals)?)?;
                Ok(Value::int_set(lo..=hi))
            }
            Expr::SetComp(body, gens) => {
                let mut out = Vec::new();
                self.comprehend(body, gens, locals, &mut out)?;
                Ok(Value::Set(out.into_iter().collect()))
            }
            Expr::SeqComp(body, gens) => {
                let mut out = Vec::new();
                self.comprehend(body, gens, locals, &mut out)?;
                Ok(Value::Seq(out))
            }
        }
    }

    fn comprehend(&mut self, body: &Expr, gens: &[Gen], locals: &mut Locals, out: &mut Vec<Value>) -> Result<(), EvalError> {
        match gens.split_first() {
            None => {
                out.push(self.eval(body, locals)?);
                Ok(())
            }
            Some((Gen::Cond(c), rest)) => {
                if as_bool(&self.eval(c, locals)?)? {
                    self.comprehend(body, rest, locals, out)?;
                }
                Ok(())
            }
            Some((Gen::Bind(x, src), rest)) => {
                let items = self.eval(src, locals)?.elements()?;
                for it in items {
                    locals.push((x.clone(), it));
                    let r = self.comprehend(body, rest, locals, out);
                    locals.pop();
                    r?;
                }
                Ok(())
            }
        }
    }

    fn binary(&mut self, op: BinOp, a: &Expr, b: &Expr, locals: &mut Locals) -> Result<Value, EvalError> {
        // Short-circuit the boolean connectives.
        match op {
            BinOp::And => {
                return Ok(Value::Bool(as_bool(&self.eval(a, locals)?)? && as_bool(&self.eval(b, locals)?)?));
            }
            BinOp::Or => {
                return Ok(Value::Bool(as_bool(&self.eval(a, locals)?)? || as_bool(&self.eval(b, locals)?)?));
            }
            _ => {}
        }
        let x = self.eval(a, locals)?;
        let y = self.eval(b, locals)?;
        match op {
            BinOp::Eq => return Ok(Value::Bool(x == y)),
            BinOp::Ne => return Ok(Value::Bool(x != y)),
            BinOp::Cat => {
                let mut s = as_seq(x)?;
                s.extend(as_seq(y)?);
                return Ok(Value::Seq(s));
            }
            _ => {}
        }
        let (x, y) = (as_int(&x)?, as_int(&y)?);
        let r = match op {
            BinOp::Add => Value::Int(x.checked_add(y).ok_or(EvalError::Overflow)?),
            BinOp::Sub => Value::Int(x.checked_sub(y).ok_or(EvalError::Overflow)?),
            BinOp::Mul => Value::Int(x.checked_mul(y).ok_or(EvalError::Overflow)?),
            BinOp::Div => {
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                Value::Int(x.div_euclid(y))
            }
            BinOp::Mod => {
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                Value::Int(x.rem_euclid(y))
            }
            BinOp::Lt => Value::Bool(x < y),
            BinOp::Le => Value::Bool(x <= y),
            BinOp::Gt => Value::Bool(x > y),
            BinOp::Ge => Value::Bool(x >= y),
            BinOp::And | BinOp::Or | BinOp::Eq | BinOp::Ne | BinOp::Cat => unreachable!(),
        };
        Ok(r)
    }

    fn extend(&self, chan: u32, prefix: Vec<i64>) -> Result<Value, EvalError> {
        let c = self.env.symbols.channel(chan as usize);
        if prefix.len() == c.fields.len() {
            self.env
                .symbols
                .event(chan as usize, &prefix)
                .map(Value::Event)
                .ok_or_else(|| EvalError::UnknownEvent(dotted_name(&c.name, &prefix)))
        } else if prefix.len() < c.fields.len() {
            if prefix.iter().zip(&c.fields).any(|(v, dom)| !dom.contains(v)) {
                return Err(EvalError::UnknownEvent(dotted_name(&c.name, &prefix)));
            }
            Ok(Value::Chan { chan, prefix })
        } else {
            Err(EvalError::UnknownEvent(dotted_name(&c.name, &prefix)))
        }
    }

    fn dotted(&mut self, head: &str, fields: Vec<Value>, locals: &Locals) -> Result<Value, EvalError> {
        let ints = |fields: &[Value]| fields.iter().map(as_int).collect::<Result<Vec<_>, _>>();
        if let Some(v) = lookup(locals, head).or_else(|| self.env.consts.get(head)) {
            return match v.clone() {
                Value::Chan { chan, mut prefix } => {
                    prefix.extend(ints(&fields)?);
                    self.extend(chan, prefix)
                }
                other => Err(EvalError::Type { expected: "channel", found: other.kind() }),
            };
        }
        if let Some(ci) = self.env.symbols.channel_index(head) {
            return self.extend(ci as u32, ints(&fields)?);
        }
        if let Some(atom) = self.env.atoms.get(head) {
            if fields.len() != 1 {
                return Err(EvalError::Arity { name: head.to_string(), expected: 1, got: fields.len() });
            }
            return Ok(Value::Comp(atom.clone(), as_int(&fields[0])?));
        }
        Err(EvalError::Unbound(head.to_string()))
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
        if let Some(f) = self.env.funs.get(name) {
            if f.params.len() != args.len() {
                return Err(EvalError::Arity { name: name.to_string(), expected: f.params.len(), got: args.len() });
            }
            if self.depth >= MAX_FUN_DEPTH {
                return Err(EvalError::TooDeep);
            }
            self.depth += 1;
            let mut scope: Locals = f.params.iter().cloned().zip(args).collect();
            let r = self.eval(&f.body, &mut scope);
            self.depth -= 1;
            return r;
        }
        builtin(name, args)
    }
}

fn arity(name: &str, args: &[Value], n: usize) -> Result<(), EvalError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(EvalError::Arity { name: name.to_string(), expected: n, got: args.len() })
    }
}

fn builtin(name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
    let mut it = args.clone().into_iter();
    let mut next = || it.next().unwrap();
    match name {
        "union" | "inter" | "diff" => {
            arity(name, &args, 2)?;
            let a = as_set(next())?;
            let b = as_set(next())?;
            let s: BTreeSet<Value> = match name {
                "union" => a.union(&b).cloned().collect(),
                "inter" => a.intersection(&b).cloned().collect(),
                _ => a.difference(&b).cloned().collect(),
            };
            Ok(Value::Set(s))
        }
        "Union" => {
            arity(name, &args, 1)?;
            let mut out = BTreeSet::new();
            for s in as_set(next())? {
                out.extend(as_set(s)?);
            }
            Ok(Value::Set(out))
        }
        "card" => {
            arity(name, &args, 1)?;
            Ok(Value::Int(as_set(next())?.len() as i64))
        }
        "empty" | "null" => {
            arity(name, &args, 1)?;
            Ok(Value::Bool(next().elements()?.is_empty()))
        }
        "member" | "elem" => {
            arity(name, &args, 2)?;
            let x = next();
            Ok(Value::Bool(next().elements()?.contains(&x)))
        }
        "head" => {
            arity(name, &args, 1)?;
            as_seq(next())?.into_iter().next().ok_or(EvalError::EmptySeq("head"))
        }
        "tail" => {
            arity(name, &args, 1)?;
            let s = as_seq(next())?;
            if s.is_empty() {
                return Err(EvalError::EmptySeq("tail"));
            }
            Ok(Value::Seq(s[1..].to_vec()))
        }
        "length" | "len" => {
            arity(name, &args, 1)?;
            Ok(Value::Int(as_seq(next())?.len() as i64))
        }
        "concat" => {
            arity(name, &args, 2)?;
            let mut a = as_seq(next())?;
            a.extend(as_seq(next())?);
            Ok(Value::Seq(a))
        }
        "set" => {
            arity(name, &args, 1)?;
            Ok(Value::Set(as_set(next())?))
        }
        "seq" => {
            arity(name, &args, 1)?;
            Ok(Value::Seq(next().elements()?))
        }
        "nth" => {
            arity(name, &args, 2)?;
            let s = as_seq(next())?;
            let i = as_int(&next())?;
            usize::try_from(i).ok().and_then(|i| s.get(i).cloned()).ok_or(EvalError::EmptySeq("nth"))
        }
        "min" | "max" => {
            arity(name, &args, 2)?;
            let a = as_int(&next())?;
            let b = as_int(&next())?;
            Ok(Value::Int(if name == "min" { a.min(b) } else { a.max(b) }))
        }
        "abs" => {
            arity(name, &args, 1)?;
            Ok(Value::Int(as_int(&next())?.abs()))
        }
        _ => Err(EvalError::Unbound(name.to_string())),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, xs: &[Expr]) -> fmt::Result {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            Ok(())
        }
        fn gens(f: &mut fmt::Formatter<'_>, gs: &[Gen]) -> fmt::Result {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                match g {
                    Gen::Bind(x, s) => write!(f, "{x} <- {s}")?,
                    Gen::Cond(c) => write!(f, "{c}")?,
                }
            }
            Ok(())
        }
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Unary(UnOp::Neg, a) => write!(f, "-({a})"),
            Expr::Unary(UnOp::Not, a) => write!(f, "not ({a})"),
            Expr::Unary(UnOp::Card, a) => write!(f, "#({a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::If(c, t, e) => write!(f, "(if {c} then {t} else {e})"),
            Expr::Call(n, args) => {
                write!(f, "{n}(")?;
                list(f, args)?;
                write!(f, ")")
            }
            Expr::Dotted(h, fs) => {
                write!(f, "{h}")?;
                for x in fs {
                    match x {
                        Expr::Lit(_) | Expr::Var(_) => write!(f, ".{x}")?,
                        _ => write!(f, ".({x})")?,
                    }
                }
                Ok(())
            }
            Expr::Ext(xs) => {
                write!(f, "{{| ")?;
                list(f, xs)?;
                write!(f, " |}}")
            }
            Expr::SetLit(xs) => {
                write!(f, "{{")?;
                list(f, xs)?;
                write!(f, "}}")
            }
            Expr::SeqLit(xs) => {
                write!(f, "<")?;
                list(f, xs)?;
                write!(f, ">")
            }
            Expr::Tuple(xs) => {
                write!(f, "(")?;
                list(f, xs)?;
                write!(f, ")")
            }
            Expr::Range(a, b) => write!(f, "{{{a}..{b}}}"),
            Expr::SetComp(b, gs) => {
                write!(f, "{{ {b} | ")?;
                gens(f, gs)?;
                write!(f, " }}")
            }
            Expr::SeqComp(b, gs) => {
                write!(f, "< {b} | ")?;
                gens(f, gs)?;
                write!(f, " >")
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) if *i < 0 => write!(f, "({i})"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Event(e) => write!(f, "#ev{e}"),
            Value::Chan { chan, prefix } => write!(f, "#ch{chan}{prefix:?}"),
            Value::Comp(a, i) => write!(f, "{a}.{i}"),
            Value::Set(s) => {
                write!(f, "{{")?;
                for (i, x) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Value::Seq(s) => {
                write!(f, "<")?;
                for (i, x) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ">")
            }
            Value::Tuple(s) => {
                write!(f, "(")?;
                for (i, x) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}
