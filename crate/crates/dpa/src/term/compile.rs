//! Operational compilation of closed process terms.
//!
//! Terms are first instantiated into a hash-consed arena of ground nodes in
//! which every event, set and call argument is a concrete value. Calls are
//! kept symbolic and unfolded on demand, so recursion terminates exactly
//! when the set of distinct ground terms reachable is finite.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use super::expr::{EvalError, Value};
use super::lts::Relation;
use super::{DefEnv, EventId, EventSet, Expr, Label, Lts, ProcessTerm, StateId};

pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("no definition for `{name}` with {arity} argument(s)")]
    UnboundCall { name: String, arity: usize },
    #[error("state limit of {0} exceeded")]
    StateLimitExceeded(usize),
    #[error("choice over an empty set in `{0}`")]
    EmptyChoiceList(String),
    #[error("guard `{guard}` is not a closed boolean: {reason}")]
    GuardNotClosed { guard: String, reason: EvalError },
    #[error("in `{context}`: {source}")]
    Eval { context: String, source: EvalError },
}

#[derive(Clone, Debug)]
pub struct CompileOptions {
    pub state_limit: usize,
    /// Record a rendering of each state's ground term.
    pub names: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { state_limit: DEFAULT_STATE_LIMIT, names: false }
    }
}

pub fn compile(env: &DefEnv, term: &ProcessTerm, limit: usize) -> Result<Lts, CompileError> {
    compile_with(env, term, &CompileOptions { state_limit: limit, names: false })
}

pub fn compile_with(env: &DefEnv, term: &ProcessTerm, opts: &CompileOptions) -> Result<Lts, CompileError> {
    let mut arena = Arena::new(env);
    let root = arena.ground(term, &mut Vec::new())?;
    let mut index: HashMap<GId, StateId> = HashMap::new();
    let mut order: Vec<GId> = vec![root];
    index.insert(root, 0);
    let mut transitions = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let g = order[i];
        let ts = arena.transitions(g)?;
        let mut out = Vec::with_capacity(ts.len());
        for &(l, t) in ts.iter() {
            let id = match index.get(&t) {
                Some(&id) => id,
                None => {
                    if order.len() >= opts.state_limit {
                        return Err(CompileError::StateLimitExceeded(opts.state_limit));
                    }
                    let id = order.len() as StateId;
                    index.insert(t, id);
                    order.push(t);
                    id
                }
            };
            out.push((l, id));
        }
        transitions.push(out);
        i += 1;
    }
    let mut lts = Lts::new(0, transitions);
    if opts.names {
        lts.names = Some(order.iter().map(|&g| arena.render(g, 160)).collect());
    }
    Ok(lts)
}

/// Evaluate renaming pairs. Equal-length sides are zipped in order; a
/// single-event target absorbs the whole source.
pub(crate) fn eval_relation(env: &DefEnv, pairs: &[(Expr, Expr)], locals: &[(String, Value)]) -> Result<Relation, EvalError> {
    let mut rel: Relation = BTreeMap::new();
    for (from, to) in pairs {
        let ea = env.to_events(&env.eval(from, locals)?)?;
        let eb = env.to_events(&env.eval(to, locals)?)?;
        let mapped: Vec<(EventId, EventId)> = if ea.len() == eb.len() {
            ea.iter().zip(eb.iter()).collect()
        } else if eb.len() == 1 {
            let t = eb.as_slice()[0];
            ea.iter().map(|e| (e, t)).collect()
        } else {
            return Err(EvalError::Type { expected: "matching renaming domains", found: "mismatched sets" });
        };
        for (a, b) in mapped {
            rel.entry(a).or_default().push(b);
        }
    }
    for v in rel.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    Ok(rel)
}

type GId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum G {
    Stop,
    Skip,
    Div,
    /// Terminated process, reached only through ✓.
    Omega,
    Prefix(EventId, GId),
    Ext(Vec<GId>),
    Int(Vec<GId>),
    Seq(GId, GId),
    Hide(GId, u32),
    Rename(GId, u32),
    Interrupt(GId, GId),
    Call(u32, Vec<Value>),
}

const STOP: GId = 0;
const SKIP: GId = 1;
const DIV: GId = 2;
const OMEGA: GId = 3;

type Trans = Arc<Vec<(Label, GId)>>;

struct Arena<'e> {
    env: &'e DefEnv,
    nodes: Vec<G>,
    index: HashMap<G, GId>,
    sets: Vec<EventSet>,
    set_index: HashMap<EventSet, u32>,
    rels: Vec<Relation>,
    rel_index: HashMap<Relation, u32>,
    defs: Vec<(String, usize)>,
    def_index: HashMap<(String, usize), u32>,
    expanded: HashMap<GId, GId>,
    memo: HashMap<GId, Trans>,
    in_progress: HashSet<GId>,
}

impl<'e> Arena<'e> {
    fn new(env: &'e DefEnv) -> Self {
        let mut a = Arena {
            env,
            nodes: Vec::new(),
            index: HashMap::new(),
            sets: Vec::new(),
            set_index: HashMap::new(),
            rels: Vec::new(),
            rel_index: HashMap::new(),
            defs: Vec::new(),
            def_index: HashMap::new(),
            expanded: HashMap::new(),
            memo: HashMap::new(),
            in_progress: HashSet::new(),
        };
        for g in [G::Stop, G::Skip, G::Div, G::Omega] {
            a.intern(g);
        }
        a
    }

    fn intern(&mut self, g: G) -> GId {
        if let Some(&id) = self.index.get(&g) {
            return id;
        }
        let id = self.nodes.len() as GId;
        self.nodes.push(g.clone());
        self.index.insert(g, id);
        id
    }

    fn set_id(&mut self, s: EventSet) -> u32 {
        if let Some(&id) = self.set_index.get(&s) {
            return id;
        }
        let id = self.sets.len() as u32;
        self.sets.push(s.clone());
        self.set_index.insert(s, id);
        id
    }

    fn rel_id(&mut self, r: Relation) -> u32 {
        if let Some(&id) = self.rel_index.get(&r) {
            return id;
        }
        let id = self.rels.len() as u32;
        self.rels.push(r.clone());
        self.rel_index.insert(r, id);
        id
    }

    fn mk_ext(&mut self, children: Vec<GId>) -> GId {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match &self.nodes[c as usize] {
                G::Ext(cs) => flat.extend(cs.iter().copied()),
                G::Stop => {}
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => STOP,
            1 => flat[0],
            _ => self.intern(G::Ext(flat)),
        }
    }

    fn mk_int(&mut self, children: Vec<GId>) -> GId {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match &self.nodes[c as usize] {
                G::Int(cs) => flat.extend(cs.iter().copied()),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        if flat.len() == 1 {
            flat[0]
        } else {
            self.intern(G::Int(flat))
        }
    }

    fn mk_seq(&mut self, p: GId, q: GId) -> GId {
        match p {
            STOP | DIV => p,
            SKIP => q,
            _ => self.intern(G::Seq(p, q)),
        }
    }

    fn mk_hide(&mut self, p: GId, set: EventSet) -> GId {
        if set.is_empty() || matches!(p, STOP | SKIP | DIV) {
            return p;
        }
        if let G::Hide(inner, s) = self.nodes[p as usize] {
            let merged = self.sets[s as usize].union(&set);
            let sid = self.set_id(merged);
            return self.intern(G::Hide(inner, sid));
        }
        let sid = self.set_id(set);
        self.intern(G::Hide(p, sid))
    }

    fn mk_rename(&mut self, p: GId, rel: Relation) -> GId {
        if rel.is_empty() || matches!(p, STOP | SKIP | DIV) {
            return p;
        }
        let rid = self.rel_id(rel);
        self.intern(G::Rename(p, rid))
    }

    fn mk_interrupt(&mut self, p: GId, q: GId) -> GId {
        if q == STOP {
            return p;
        }
        if p == STOP {
            return q;
        }
        self.intern(G::Interrupt(p, q))
    }

    fn eval_err(term: &ProcessTerm, e: EvalError) -> CompileError {
        let mut context = term.to_string();
        if context.len() > 80 {
            let mut cut = 77;
            while !context.is_char_boundary(cut) {
                cut -= 1;
            }
            context.truncate(cut);
            context.push_str("...");
        }
        CompileError::Eval { context, source: e }
    }

    /// Instantiate a term under local bindings.
    fn ground(&mut self, term: &ProcessTerm, locals: &mut Vec<(String, Value)>) -> Result<GId, CompileError> {
        use ProcessTerm as P;
        let env = self.env;
        Ok(match term {
            P::Stop => STOP,
            P::Skip => SKIP,
            P::Div => DIV,
            P::Prefix(e, p) => {
                let ev = env.eval_event(e, locals).map_err(|err| Self::eval_err(term, err))?;
                let k = self.ground(p, locals)?;
                self.intern(G::Prefix(ev, k))
            }
            P::ExtChoice(ps) | P::IntChoice(ps) => {
                if ps.is_empty() {
                    return Err(CompileError::EmptyChoiceList(term.to_string()));
                }
                let mut cs = Vec::with_capacity(ps.len());
                for p in ps {
                    cs.push(self.ground(p, locals)?);
                }
                if matches!(term, P::ExtChoice(_)) {
                    self.mk_ext(cs)
                } else {
                    self.mk_int(cs)
                }
            }
            P::ReplExt(x, s, p) | P::ReplInt(x, s, p) => {
                let items = env.eval(s, locals).and_then(|v| v.elements()).map_err(|err| Self::eval_err(term, err))?;
                let internal = matches!(term, P::ReplInt(..));
                if items.is_empty() && internal {
                    return Err(CompileError::EmptyChoiceList(term.to_string()));
                }
                let mut cs = Vec::with_capacity(items.len());
                for v in items {
                    locals.push((x.clone(), v));
                    let r = self.ground(p, locals);
                    locals.pop();
                    cs.push(r?);
                }
                if internal {
                    self.mk_int(cs)
                } else {
                    self.mk_ext(cs)
                }
            }
            P::Guard(c, p) => {
                let b = env.eval_bool(c, locals).map_err(|reason| CompileError::GuardNotClosed { guard: c.to_string(), reason })?;
                if b {
                    self.ground(p, locals)?
                } else {
                    STOP
                }
            }
            P::Seq(p, q) => {
                let a = self.ground(p, locals)?;
                let b = self.ground(q, locals)?;
                self.mk_seq(a, b)
            }
            P::Interrupt(p, q) => {
                let a = self.ground(p, locals)?;
                let b = self.ground(q, locals)?;
                self.mk_interrupt(a, b)
            }
            P::Hide(p, x) => {
                let set = env.eval_events(x, locals).map_err(|err| Self::eval_err(term, err))?;
                let a = self.ground(p, locals)?;
                self.mk_hide(a, set)
            }
            P::Rename(p, pairs) => {
                let rel = eval_relation(env, pairs, locals).map_err(|err| Self::eval_err(term, err))?;
                let a = self.ground(p, locals)?;
                self.mk_rename(a, rel)
            }
            P::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(env.eval(a, locals).map_err(|err| Self::eval_err(term, err))?);
                }
                let key = (name.clone(), vals.len());
                let did = match self.def_index.get(&key) {
                    Some(&d) => d,
                    None => {
                        if !env.defs.contains_key(&key) {
                            return Err(CompileError::UnboundCall { name: name.clone(), arity: vals.len() });
                        }
                        let d = self.defs.len() as u32;
                        self.defs.push(key.clone());
                        self.def_index.insert(key, d);
                        d
                    }
                };
                self.intern(G::Call(did, vals))
            }
        })
    }

    fn expand(&mut self, g: GId, did: u32, args: Vec<Value>) -> Result<GId, CompileError> {
        if let Some(&b) = self.expanded.get(&g) {
            return Ok(b);
        }
        let def = &self.env.defs[&self.defs[did as usize]];
        let mut locals: Vec<(String, Value)> = def.params.iter().cloned().zip(args).collect();
        let body = self.ground(&def.body, &mut locals)?;
        self.expanded.insert(g, body);
        Ok(body)
    }

    fn transitions(&mut self, g: GId) -> Result<Trans, CompileError> {
        if let Some(t) = self.memo.get(&g) {
            return Ok(t.clone());
        }
        if self.in_progress.contains(&g) {
            // Unguarded recursion: the fixed point starts from divergence.
            return Ok(Arc::new(vec![(Label::Tau, DIV)]));
        }
        self.in_progress.insert(g);
        let r = self.compute(g);
        self.in_progress.remove(&g);
        let mut ts = r?;
        ts.sort_unstable();
        ts.dedup();
        let ts = Arc::new(ts);
        self.memo.insert(g, ts.clone());
        Ok(ts)
    }

    fn compute(&mut self, g: GId) -> Result<Vec<(Label, GId)>, CompileError> {
        let node = self.nodes[g as usize].clone();
        Ok(match node {
            G::Stop | G::Omega => vec![],
            G::Skip => vec![(Label::Tick, OMEGA)],
            G::Div => vec![(Label::Tau, DIV)],
            G::Prefix(e, p) => vec![(Label::Vis(e), p)],
            G::Int(cs) => cs.into_iter().map(|c| (Label::Tau, c)).collect(),
            G::Ext(cs) => {
                let mut out = Vec::new();
                for (i, &c) in cs.iter().enumerate() {
                    for &(l, t) in self.transitions(c)?.iter() {
                        if l == Label::Tau {
                            let mut next = cs.clone();
                            next[i] = t;
                            out.push((Label::Tau, self.mk_ext(next)));
                        } else {
                            out.push((l, t));
                        }
                    }
                }
                out
            }
            G::Seq(p, q) => {
                let mut out = Vec::new();
                for &(l, t) in self.transitions(p)?.iter() {
                    if l == Label::Tick {
                        out.push((Label::Tau, q));
                    } else {
                        out.push((l, self.mk_seq(t, q)));
                    }
                }
                out
            }
            G::Hide(p, sid) => {
                let mut out = Vec::new();
                for &(l, t) in self.transitions(p)?.iter() {
                    match l {
                        Label::Tick => out.push((Label::Tick, OMEGA)),
                        Label::Vis(e) if self.sets[sid as usize].contains(e) => {
                            let set = self.sets[sid as usize].clone();
                            out.push((Label::Tau, self.mk_hide(t, set)));
                        }
                        _ => {
                            let set = self.sets[sid as usize].clone();
                            out.push((l, self.mk_hide(t, set)));
                        }
                    }
                }
                out
            }
            G::Rename(p, rid) => {
                let mut out = Vec::new();
                for &(l, t) in self.transitions(p)?.iter() {
                    if l == Label::Tick {
                        out.push((Label::Tick, OMEGA));
                        continue;
                    }
                    let rel = self.rels[rid as usize].clone();
                    let k = self.mk_rename(t, rel.clone());
                    match l {
                        Label::Vis(e) => match rel.get(&e) {
                            Some(images) => out.extend(images.iter().map(|&b| (Label::Vis(b), k))),
                            None => out.push((l, k)),
                        },
                        _ => out.push((l, k)),
                    }
                }
                out
            }
            G::Interrupt(p, q) => {
                let mut out = Vec::new();
                for &(l, t) in self.transitions(p)?.iter() {
                    if l == Label::Tick {
                        out.push((Label::Tick, OMEGA));
                    } else {
                        out.push((l, self.mk_interrupt(t, q)));
                    }
                }
                for &(l, t) in self.transitions(q)?.iter() {
                    match l {
                        Label::Tick => out.push((Label::Tick, OMEGA)),
                        Label::Tau => out.push((Label::Tau, self.mk_interrupt(p, t))),
                        Label::Vis(_) => out.push((l, t)),
                    }
                }
                out
            }
            G::Call(did, args) => {
                let body = self.expand(g, did, args)?;
                self.transitions(body)?.to_vec()
            }
        })
    }

    fn render(&self, g: GId, budget: usize) -> String {
        let mut s = String::new();
        self.render_into(g, &mut s, budget);
        if s.len() > budget {
            let mut cut = budget.saturating_sub(3);
            while !s.is_char_boundary(cut) {
                cut -= 1;
            }
            s.truncate(cut);
            s.push_str("...");
        }
        s
    }

    fn render_into(&self, g: GId, s: &mut String, budget: usize) {
        if s.len() > budget {
            return;
        }
        let sym = &self.env.symbols;
        match &self.nodes[g as usize] {
            G::Stop => s.push_str("STOP"),
            G::Skip => s.push_str("SKIP"),
            G::Div => s.push_str("DIV"),
            G::Omega => s.push('Ω'),
            G::Prefix(e, p) => {
                s.push_str(sym.name(*e));
                s.push_str(" -> ");
                self.render_into(*p, s, budget);
            }
            G::Ext(cs) | G::Int(cs) => {
                let op = if matches!(self.nodes[g as usize], G::Ext(_)) { " [] " } else { " |~| " };
                s.push('(');
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        s.push_str(op);
                    }
                    self.render_into(*c, s, budget);
                }
                s.push(')');
            }
            G::Seq(p, q) | G::Interrupt(p, q) => {
                let op = if matches!(self.nodes[g as usize], G::Seq(..)) { " ; " } else { " /\\ " };
                s.push('(');
                self.render_into(*p, s, budget);
                s.push_str(op);
                self.render_into(*q, s, budget);
                s.push(')');
            }
            G::Hide(p, sid) => {
                s.push('(');
                self.render_into(*p, s, budget);
                s.push_str(" \\ ");
                s.push_str(&sym.fmt_events(self.sets[*sid as usize].iter()));
                s.push(')');
            }
            G::Rename(p, _) => {
                s.push('(');
                self.render_into(*p, s, budget);
                s.push_str(")[[..]]");
            }
            G::Call(did, args) => {
                s.push_str(&self.defs[*did as usize].0);
                if !args.is_empty() {
                    s.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            s.push(',');
                        }
                        s.push_str(&a.to_string());
                    }
                    s.push(')');
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{BinOp, Expr, Symbols};

    fn ev(env: &DefEnv, n: &str) -> Expr {
        Expr::event(env.symbols.lookup(n).unwrap())
    }

    #[test]
    fn single_prefix() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let t = ProcessTerm::prefix(ev(&env, "a"), ProcessTerm::Stop);
        let l = compile(&env, &t, 100).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.out(0), &[(Label::Vis(0), 1)]);
    }

    #[test]
    fn tail_recursion_is_one_state() {
        let mut env = DefEnv::new(Symbols::plain(&["a"]));
        let body = ProcessTerm::prefix(ev(&env, "a"), ProcessTerm::call("P", vec![]));
        env.define("P", &[], body);
        let l = compile(&env, &ProcessTerm::call("P", vec![]), 100).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.out(0), &[(Label::Vis(0), 0)]);
    }

    #[test]
    fn guard_false_is_stop_and_unbound_call_errors() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let t = ProcessTerm::guard(Expr::bin(BinOp::Lt, Expr::int(2), Expr::int(1)), ProcessTerm::prefix(ev(&env, "a"), ProcessTerm::Stop));
        let l = compile(&env, &t, 100).unwrap();
        assert_eq!(l.len(), 1);
        assert!(l.out(0).is_empty());
        let bad = ProcessTerm::call("Q", vec![Expr::int(1)]);
        assert_eq!(compile(&env, &bad, 10), Err(CompileError::UnboundCall { name: "Q".into(), arity: 1 }));
        let open = ProcessTerm::guard(Expr::var("x"), ProcessTerm::Stop);
        assert!(matches!(compile(&env, &open, 10), Err(CompileError::GuardNotClosed { .. })));
    }

    #[test]
    fn empty_internal_choice_rejected() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let t = ProcessTerm::repl_int("x", Expr::SetLit(vec![]), ProcessTerm::Stop);
        assert!(matches!(compile(&env, &t, 10), Err(CompileError::EmptyChoiceList(_))));
        assert!(matches!(compile(&env, &ProcessTerm::IntChoice(vec![]), 10), Err(CompileError::EmptyChoiceList(_))));
    }

    #[test]
    fn counter_hits_state_limit() {
        let mut env = DefEnv::new(Symbols::plain(&["a"]));
        let body = ProcessTerm::prefix(ev(&env, "a"), ProcessTerm::call("C", vec![Expr::bin(BinOp::Add, Expr::var("n"), Expr::int(1))]));
        env.define("C", &["n"], body);
        let r = compile(&env, &ProcessTerm::call("C", vec![Expr::int(0)]), 50);
        assert_eq!(r, Err(CompileError::StateLimitExceeded(50)));
    }

    #[test]
    fn seq_hide_rename_interrupt() {
        let env = DefEnv::new(Symbols::plain(&["a", "b", "c"]));
        let (a, b, c) = (ev(&env, "a"), ev(&env, "b"), ev(&env, "c"));
        // (a -> SKIP ; b -> STOP) \ {a}
        let t = ProcessTerm::hide(
            ProcessTerm::seq(ProcessTerm::prefix(a.clone(), ProcessTerm::Skip), ProcessTerm::prefix(b.clone(), ProcessTerm::Stop)),
            Expr::SetLit(vec![a.clone()]),
        );
        let l = compile(&env, &t, 100).unwrap();
        // SKIP ; Q is normalised to Q, so the hidden a leads straight to b.
        assert_eq!(l.out(0), &[(Label::Tau, 1)]);
        assert_eq!(l.out(1), &[(Label::Vis(1), 2)]);
        // (a -> STOP)[[a <- a, a <- c]]
        let r = ProcessTerm::Rename(
            Box::new(ProcessTerm::prefix(a.clone(), ProcessTerm::Stop)),
            vec![(a.clone(), a.clone()), (a.clone(), c.clone())],
        );
        let l = compile(&env, &r, 100).unwrap();
        assert_eq!(l.out(0), &[(Label::Vis(0), 1), (Label::Vis(2), 1)]);
        // (a -> a -> STOP) /\ (b -> STOP)
        let i = ProcessTerm::interrupt(
            ProcessTerm::prefix(a.clone(), ProcessTerm::prefix(a, ProcessTerm::Stop)),
            ProcessTerm::prefix(b, ProcessTerm::Stop),
        );
        let l = compile(&env, &i, 100).unwrap();
        assert_eq!(l.len(), 4);
        let labels: Vec<Label> = l.out(0).iter().map(|x| x.0).collect();
        assert_eq!(labels, vec![Label::Vis(0), Label::Vis(1)]);
    }

    #[test]
    fn unguarded_recursion_diverges() {
        let mut env = DefEnv::new(Symbols::plain(&["a"]));
        env.define("P", &[], ProcessTerm::call("P", vec![]));
        let l = compile(&env, &ProcessTerm::call("P", vec![]), 10).unwrap();
        assert!(!l.is_stable(l.initial));
    }
}
