use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Diagnostic, DslError, NetworkDecl, Placement, Pos, INPUT_DOMAIN, NET_VERSION};
use crate::network::{Component, Network};
use crate::term::{DefEnv, EventSet, Expr, Gen, ProcessTerm, SymbolError, Symbols, Value};

#[derive(Clone, Debug)]
pub struct Elaborated {
    pub network: Network,
    pub warnings: Vec<Diagnostic>,
}

pub fn elaborate(decl: &NetworkDecl) -> Result<Elaborated, DslError> {
    elaborate_with(decl, &[])
}

/// Elaborate with some integer constants replaced, e.g. to resize a model.
pub fn elaborate_with(decl: &NetworkDecl, overrides: &[(String, i64)]) -> Result<Elaborated, DslError> {
    if let Some((v, pos)) = decl.version {
        if v != NET_VERSION {
            return Err(DslError::Invalid { message: format!("unsupported model version {v}"), pos });
        }
    }
    for (name, _) in overrides {
        if !decl.consts.iter().any(|c| &c.name == name) {
            return Err(DslError::Invalid { message: format!("no constant `{name}` to override"), pos: Pos::default() });
        }
    }
    let override_of = |name: &str| overrides.iter().rev().find(|(n, _)| n == name).map(|(_, v)| Value::Int(*v));

    // Channel domains may use constants, and constants may use channels, so
    // constants are evaluated once without channels (best effort) and again
    // with them.
    let mut pre = DefEnv::new(Symbols::builder().build().expect("empty universe"));
    add_funs(&mut pre, decl);
    for c in &decl.consts {
        let v = override_of(&c.name).map(Ok).unwrap_or_else(|| pre.eval(&c.value, &[]));
        if let Ok(v) = v {
            pre.consts.insert(c.name.clone(), v);
        }
    }
    let mut builder = Symbols::builder();
    for ch in &decl.channels {
        let mut fields = Vec::with_capacity(ch.fields.len());
        for f in &ch.fields {
            let what = format!("field domain of channel `{}`", ch.name);
            let v = pre.eval(f, &[]).map_err(|source| DslError::Eval { what: what.clone(), pos: ch.pos, source })?;
            let elems = v.elements().map_err(|source| DslError::Eval { what: what.clone(), pos: ch.pos, source })?;
            let mut ints = Vec::with_capacity(elems.len());
            for e in elems {
                match e {
                    Value::Int(i) => ints.push(i),
                    other => {
                        return Err(DslError::Invalid { message: format!("{what} holds a {}, not an integer", other.kind()), pos: ch.pos })
                    }
                }
            }
            ints.sort_unstable();
            ints.dedup();
            fields.push(ints);
        }
        builder.add_channel(&ch.name, fields);
    }
    let symbols = builder.build().map_err(|e| match e {
        SymbolError::RangeOverflow => DslError::RangeOverflow,
        SymbolError::DuplicateChannel(ref n) | SymbolError::EmptyDomain(ref n) => {
            let pos = decl.channels.iter().rev().find(|c| &c.name == n).map(|c| c.pos).unwrap_or_default();
            DslError::Invalid { message: e.to_string(), pos }
        }
    })?;

    let mut env = DefEnv::new(symbols);
    add_funs(&mut env, decl);
    for a in &decl.atoms {
        env.add_atom(&a.name);
    }
    for c in &decl.consts {
        let v = match override_of(&c.name) {
            Some(v) => v,
            None => {
                env.eval(&c.value, &[]).map_err(|source| DslError::Eval { what: format!("constant `{}`", c.name), pos: c.pos, source })?
            }
        };
        env.consts.insert(c.name.clone(), v);
    }

    let mut defs = BTreeMap::new();
    for d in &decl.defs {
        if defs.insert((d.name.clone(), d.params.len()), ()).is_some() {
            return Err(DslError::Invalid {
                message: format!("process `{}` with {} parameters is defined twice", d.name, d.params.len()),
                pos: d.pos,
            });
        }
    }
    let mut checker = Checker { env: &env, defs: &defs, pos: Pos::default() };
    let mut bodies = Vec::with_capacity(decl.defs.len());
    for d in &decl.defs {
        checker.pos = d.pos;
        bodies.push(checker.term(&d.body, &mut d.params.clone())?);
    }
    let mut atoms = BTreeMap::new();
    for a in &decl.atoms {
        checker.pos = a.pos;
        let behaviour = checker.term(&a.behaviour, &mut a.params.clone())?;
        checker.alphabet(&a.alphabet, &mut a.params.clone())?;
        if atoms.insert(a.name.clone(), (a, behaviour)).is_some() {
            return Err(DslError::Invalid { message: format!("atom `{}` is declared twice", a.name), pos: a.pos });
        }
    }
    for (d, body) in decl.defs.iter().zip(bodies) {
        let params: Vec<&str> = d.params.iter().map(String::as_str).collect();
        env.define(&d.name, &params, body);
    }
    let mut checker = Checker { env: &env, defs: &defs, pos: Pos::default() };

    let mut components: Vec<Component> = Vec::new();
    let mut names = BTreeSet::new();
    let mut warnings = Vec::new();
    let mut place = |c: Component, pos: Pos, components: &mut Vec<Component>| {
        if !names.insert(c.name.clone()) {
            return Err(DslError::DuplicateComponentName { name: c.name, pos });
        }
        components.push(c);
        Ok(())
    };
    for p in &decl.placements {
        match p {
            Placement::Instance(inst) => {
                let (atom, behaviour) = atoms
                    .get(&inst.atom)
                    .ok_or_else(|| DslError::Invalid { message: format!("unknown atom `{}`", inst.atom), pos: inst.pos })?;
                let what = format!("instance set of `{}`", inst.atom);
                let ids =
                    env.eval(&inst.ids, &[]).and_then(|v| v.elements()).map_err(|source| DslError::Eval { what, pos: inst.pos, source })?;
                if ids.is_empty() {
                    warnings.push(Diagnostic::warning(inst.pos, format!("atom `{}` is instantiated with an empty set", inst.atom)));
                }
                for id in ids {
                    let locals = bind(atom.params.as_slice(), &id).ok_or_else(|| DslError::Invalid {
                        message: format!("`{id}` does not match the parameters of `{}`", atom.name),
                        pos: inst.pos,
                    })?;
                    let name = instance_name(&atom.name, &id).ok_or_else(|| DslError::Invalid {
                        message: format!("instance id `{id}` is not an integer or tuple of integers"),
                        pos: inst.pos,
                    })?;
                    let alphabet = env.eval_events(&atom.alphabet, &locals).map_err(|e| DslError::NonGroundAlphabet {
                        component: name.clone(),
                        reason: e.to_string(),
                        pos: atom.pos,
                    })?;
                    let closed = close(&env, behaviour, &locals, atom.pos)?;
                    place(Component::new(name, alphabet, closed), inst.pos, &mut components)?;
                }
            }
            Placement::Component(c) => {
                checker.pos = c.pos;
                checker.alphabet(&c.alphabet, &mut Vec::new())?;
                let behaviour = checker.term(&c.behaviour, &mut Vec::new())?;
                let alphabet: EventSet = env.eval_events(&c.alphabet, &[]).map_err(|e| DslError::NonGroundAlphabet {
                    component: c.name.clone(),
                    reason: e.to_string(),
                    pos: c.pos,
                })?;
                place(Component::new(c.name.clone(), alphabet, behaviour), c.pos, &mut components)?;
            }
        }
    }
    Ok(Elaborated { network: Network::new(Arc::new(env), components), warnings })
}

fn add_funs(env: &mut DefEnv, decl: &NetworkDecl) {
    for f in &decl.funs {
        let params: Vec<&str> = f.params.iter().map(String::as_str).collect();
        env.add_fun(&f.name, &params, f.body.clone());
    }
}

fn bind(params: &[String], id: &Value) -> Option<Vec<(String, Value)>> {
    match (params, id) {
        ([p], v) => Some(vec![(p.clone(), v.clone())]),
        (ps, Value::Tuple(vs)) if ps.len() == vs.len() => Some(ps.iter().cloned().zip(vs.iter().cloned()).collect()),
        _ => None,
    }
}

fn instance_name(atom: &str, id: &Value) -> Option<String> {
    match id {
        Value::Int(i) => Some(format!("{atom}.{i}")),
        Value::Tuple(vs) => {
            let mut s = atom.to_string();
            for v in vs {
                let Value::Int(i) = v else { return None };
                s.push_str(&format!(".{i}"));
            }
            Some(s)
        }
        _ => None,
    }
}

/// An atom behaviour with its parameters fixed. Calls get evaluated
/// arguments; anything else has the parameters substituted.
fn close(env: &DefEnv, t: &ProcessTerm, locals: &[(String, Value)], pos: Pos) -> Result<ProcessTerm, DslError> {
    if let ProcessTerm::Call(n, args) = t {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            let v = env.eval(a, locals).map_err(|source| DslError::Eval { what: format!("argument of `{n}`"), pos, source })?;
            vals.push(Expr::Lit(v));
        }
        return Ok(ProcessTerm::Call(n.clone(), vals));
    }
    Ok(subst_term(t, locals))
}

fn subst_term(t: &ProcessTerm, s: &[(String, Value)]) -> ProcessTerm {
    use ProcessTerm::*;
    let e = |x: &Expr| subst_expr(x, s);
    let without = |x: &str| s.iter().filter(|(n, _)| n != x).cloned().collect::<Vec<_>>();
    match t {
        Stop | Skip | Div => t.clone(),
        Prefix(a, p) => Prefix(e(a), Box::new(subst_term(p, s))),
        ExtChoice(ps) => ExtChoice(ps.iter().map(|p| subst_term(p, s)).collect()),
        IntChoice(ps) => IntChoice(ps.iter().map(|p| subst_term(p, s)).collect()),
        ReplExt(x, set, p) => ReplExt(x.clone(), e(set), Box::new(subst_term(p, &without(x)))),
        ReplInt(x, set, p) => ReplInt(x.clone(), e(set), Box::new(subst_term(p, &without(x)))),
        Guard(c, p) => Guard(e(c), Box::new(subst_term(p, s))),
        Seq(p, q) => Seq(Box::new(subst_term(p, s)), Box::new(subst_term(q, s))),
        Hide(p, x) => Hide(Box::new(subst_term(p, s)), e(x)),
        Rename(p, r) => Rename(Box::new(subst_term(p, s)), r.iter().map(|(a, b)| (e(a), e(b))).collect()),
        Interrupt(p, q) => Interrupt(Box::new(subst_term(p, s)), Box::new(subst_term(q, s))),
        Call(n, args) => Call(n.clone(), args.iter().map(e).collect()),
    }
}

fn subst_expr(x: &Expr, s: &[(String, Value)]) -> Expr {
    let r = |y: &Expr| subst_expr(y, s);
    let all = |ys: &[Expr]| ys.iter().map(|y| subst_expr(y, s)).collect::<Vec<_>>();
    match x {
        Expr::Var(n) => match s.iter().rev().find(|(m, _)| m == n) {
            Some((_, v)) => Expr::Lit(v.clone()),
            None => x.clone(),
        },
        Expr::Lit(_) => x.clone(),
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(r(a))),
        Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(r(a)), Box::new(r(b))),
        Expr::If(c, a, b) => Expr::If(Box::new(r(c)), Box::new(r(a)), Box::new(r(b))),
        Expr::Call(n, args) => Expr::Call(n.clone(), all(args)),
        Expr::Dotted(h, fs) => match s.iter().rev().find(|(m, _)| m == h) {
            // a channel-valued parameter cannot stay a dotted head once substituted
            Some(_) => x.clone(),
            None => Expr::Dotted(h.clone(), all(fs)),
        },
        Expr::Ext(ys) => Expr::Ext(all(ys)),
        Expr::SetLit(ys) => Expr::SetLit(all(ys)),
        Expr::SeqLit(ys) => Expr::SeqLit(all(ys)),
        Expr::Tuple(ys) => Expr::Tuple(all(ys)),
        Expr::Range(a, b) => Expr::Range(Box::new(r(a)), Box::new(r(b))),
        Expr::SetComp(b, gs) | Expr::SeqComp(b, gs) => {
            let mut inner: Vec<(String, Value)> = s.to_vec();
            let mut out = Vec::with_capacity(gs.len());
            for g in gs {
                match g {
                    Gen::Bind(v, set) => {
                        out.push(Gen::Bind(v.clone(), subst_expr(set, &inner)));
                        inner.retain(|(n, _)| n != v);
                    }
                    Gen::Cond(c) => out.push(Gen::Cond(subst_expr(c, &inner))),
                }
            }
            let body = Box::new(subst_expr(b, &inner));
            if matches!(x, Expr::SetComp(..)) {
                Expr::SetComp(body, out)
            } else {
                Expr::SeqComp(body, out)
            }
        }
    }
}

/// Static checks on bodies: channel names exist, `?` domains resolve, and
/// called processes are defined.
struct Checker<'a> {
    env: &'a DefEnv,
    defs: &'a BTreeMap<(String, usize), ()>,
    pos: Pos,
}

impl Checker<'_> {
    fn known(&self, name: &str, scope: &[String]) -> bool {
        scope.iter().any(|s| s == name)
            || self.env.consts.contains_key(name)
            || self.env.symbols.channel_index(name).is_some()
            || self.env.atoms.contains_key(name)
    }

    fn event(&self, e: &Expr, scope: &[String]) -> Result<(), DslError> {
        match e {
            Expr::Dotted(h, _) | Expr::Var(h) if !self.known(h, scope) && !self.env.funs.contains_key(h) => {
                Err(DslError::UnknownChannel { name: h.clone(), pos: self.pos })
            }
            _ => Ok(()),
        }
    }

    fn alphabet(&self, e: &Expr, scope: &mut Vec<String>) -> Result<(), DslError> {
        match e {
            Expr::Dotted(..) => self.event(e, scope),
            Expr::Ext(xs) => xs.iter().try_for_each(|x| self.event(x, scope)),
            Expr::SetLit(xs) => xs.iter().try_for_each(|x| self.alphabet(x, scope)),
            Expr::Binary(_, a, b) => {
                self.alphabet(a, scope)?;
                self.alphabet(b, scope)
            }
            Expr::Call(_, xs) => xs.iter().try_for_each(|x| self.alphabet(x, scope)),
            Expr::SetComp(b, gs) => {
                let n = scope.len();
                for g in gs {
                    if let Gen::Bind(v, _) = g {
                        scope.push(v.clone());
                    }
                }
                let r = self.alphabet(b, scope);
                scope.truncate(n);
                r
            }
            _ => Ok(()),
        }
    }

    fn domain(&self, set: &Expr) -> Result<Option<Expr>, DslError> {
        let Expr::Call(n, args) = set else { return Ok(None) };
        if n != INPUT_DOMAIN {
            return Ok(None);
        }
        let (Some(Expr::Var(ch)), Some(Expr::Lit(Value::Int(k)))) = (args.first(), args.get(1)) else {
            return Ok(None);
        };
        let idx = self.env.symbols.channel_index(ch).ok_or_else(|| DslError::UnknownChannel { name: ch.clone(), pos: self.pos })?;
        let c = self.env.symbols.channel(idx);
        let k = *k as usize;
        let dom = c.fields.get(k).ok_or(DslError::ChannelArity { channel: ch.clone(), arity: c.fields.len(), field: k, pos: self.pos })?;
        Ok(Some(Expr::Lit(Value::int_set(dom.iter().copied()))))
    }

    fn term(&self, t: &ProcessTerm, scope: &mut Vec<String>) -> Result<ProcessTerm, DslError> {
        use ProcessTerm::*;
        Ok(match t {
            Stop | Skip | Div => t.clone(),
            Prefix(e, p) => {
                self.event(e, scope)?;
                Prefix(e.clone(), Box::new(self.term(p, scope)?))
            }
            ExtChoice(ps) => ExtChoice(ps.iter().map(|p| self.term(p, scope)).collect::<Result<_, _>>()?),
            IntChoice(ps) => IntChoice(ps.iter().map(|p| self.term(p, scope)).collect::<Result<_, _>>()?),
            ReplExt(x, set, p) | ReplInt(x, set, p) => {
                let set = self.domain(set)?.unwrap_or_else(|| set.clone());
                scope.push(x.clone());
                let body = self.term(p, scope);
                scope.pop();
                let body = Box::new(body?);
                if matches!(t, ReplExt(..)) {
                    ReplExt(x.clone(), set, body)
                } else {
                    ReplInt(x.clone(), set, body)
                }
            }
            Guard(c, p) => Guard(c.clone(), Box::new(self.term(p, scope)?)),
            Seq(p, q) => Seq(Box::new(self.term(p, scope)?), Box::new(self.term(q, scope)?)),
            Hide(p, x) => Hide(Box::new(self.term(p, scope)?), x.clone()),
            Rename(p, r) => Rename(Box::new(self.term(p, scope)?), r.clone()),
            Interrupt(p, q) => Interrupt(Box::new(self.term(p, scope)?), Box::new(self.term(q, scope)?)),
            Call(n, args) => {
                if !self.defs.contains_key(&(n.clone(), args.len())) {
                    return Err(DslError::Invalid { message: format!("no process `{n}` with {} parameters", args.len()), pos: self.pos });
                }
                t.clone()
            }
        })
    }
}
