//! Reference semantics computed by direct evaluation of the compositional
//! clauses, used to cross-check the operational compiler.
//!
//! Recursion is approximated from below: each call expansion spends one unit
//! of an unfold budget and calls past the budget become `DIV`. When every
//! recursive call sits behind a visible prefix, the result is exact on traces
//! shorter than the budget.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::term::{eval_relation, CompileError, DefEnv, EvalError, EventId, Label, ProcessTerm, Relation, Value};

use super::behaviours::{bit, join, maximize, meet, BehaviourSet, Mask, TraceObs, MAX_UNIVERSE};

/// Upper bound on the traces held by any intermediate result.
pub const BLOWUP_BOUND: usize = 200_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DenotError {
    #[error(transparent)]
    Term(#[from] CompileError),
    #[error("intermediate behaviour set exceeded {0} traces")]
    CombinatorialBlowup(usize),
    #[error("alphabet of {0} events is too large for the reference oracle")]
    UniverseTooLarge(usize),
}

type Obs = BTreeMap<Vec<Label>, TraceObs>;

/// Behaviours of `term` with recursion unfolded at most `unfold_depth` times
/// along any path. Traces are kept up to length `unfold_depth`.
pub fn denotational_oracle(env: &DefEnv, term: &ProcessTerm, unfold_depth: usize) -> Result<BehaviourSet, DenotError> {
    let n = env.symbols.sigma_len();
    if n > MAX_UNIVERSE {
        return Err(DenotError::UniverseTooLarge(n));
    }
    let sigma: Mask = (1u128 << n) - 1;
    let mut ev = Eval { env, sigma, full: sigma | (1u128 << n), truncated: false, memo: HashMap::new() };
    let obs = ev.eval(term, &mut Vec::new(), unfold_depth, unfold_depth)?;
    Ok(BehaviourSet { sigma_len: n as u32, traces: Arc::unwrap_or_clone(obs), truncated: ev.truncated })
}

struct Eval<'e> {
    env: &'e DefEnv,
    sigma: Mask,
    full: Mask,
    truncated: bool,
    memo: HashMap<(String, Vec<Value>, usize, usize), Arc<Obs>>,
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

fn size(t: &ProcessTerm) -> usize {
    use ProcessTerm::*;
    match t {
        Stop | Skip | Div | Call(..) => 1,
        Prefix(_, p) | ReplExt(_, _, p) | ReplInt(_, _, p) | Guard(_, p) | Hide(p, _) | Rename(p, _) => 1 + size(p),
        ExtChoice(ps) | IntChoice(ps) => 1 + ps.iter().map(size).sum::<usize>(),
        Seq(p, q) | Interrupt(p, q) => 1 + size(p) + size(q),
    }
}

fn insert(out: &mut Obs, trace: Vec<Label>, o: &TraceObs) {
    match out.get_mut(&trace) {
        Some(e) => e.merge(o),
        None => {
            out.insert(trace, o.clone());
        }
    }
}

fn ends_in_tick(t: &[Label]) -> bool {
    t.last() == Some(&Label::Tick)
}

impl Eval<'_> {
    fn check(&self, o: &Obs) -> Result<(), DenotError> {
        if o.len() > BLOWUP_BOUND {
            Err(DenotError::CombinatorialBlowup(BLOWUP_BOUND))
        } else {
            Ok(())
        }
    }

    fn stop(&self) -> Obs {
        let mut o = Obs::new();
        o.insert(Vec::new(), TraceObs { refusals: vec![self.full], deadlock: true, ..Default::default() });
        o
    }

    fn skip(&self) -> Obs {
        let mut o = Obs::new();
        o.insert(Vec::new(), TraceObs { refusals: vec![self.sigma], ..Default::default() });
        o.insert(vec![Label::Tick], TraceObs { refusals: vec![self.full], ..Default::default() });
        o
    }

    fn div(&self) -> Obs {
        let mut o = Obs::new();
        o.insert(Vec::new(), TraceObs::default());
        o
    }

    fn eval(&mut self, term: &ProcessTerm, locals: &mut Vec<(String, Value)>, budget: usize, len: usize) -> Result<Arc<Obs>, DenotError> {
        use ProcessTerm as P;
        let env = self.env;
        let out = match term {
            P::Stop => self.stop(),
            P::Skip => self.skip(),
            P::Div => self.div(),
            P::Prefix(e, p) => {
                let a = env.eval_event(e, locals).map_err(|err| eval_err(term, err))?;
                let mut o = Obs::new();
                o.insert(
                    Vec::new(),
                    TraceObs {
                        refusals: vec![self.full & !bit(a)],
                        deadlock: false,
                        revivals: [(a, vec![self.sigma & !bit(a)])].into_iter().collect(),
                    },
                );
                if len > 0 {
                    let k = self.eval(p, locals, budget, len - 1)?;
                    for (s, obs) in k.iter() {
                        let mut t = Vec::with_capacity(s.len() + 1);
                        t.push(Label::Vis(a));
                        t.extend_from_slice(s);
                        o.insert(t, obs.clone());
                    }
                }
                o
            }
            P::ExtChoice(ps) | P::IntChoice(ps) => {
                if ps.is_empty() {
                    return Err(CompileError::EmptyChoiceList(term.to_string()).into());
                }
                let mut parts = Vec::with_capacity(ps.len());
                for p in ps {
                    parts.push(self.eval(p, locals, budget, len)?);
                }
                self.choice(parts, matches!(term, P::ExtChoice(_)))
            }
            P::ReplExt(x, s, p) | P::ReplInt(x, s, p) => {
                let items = env.eval(s, locals).and_then(|v| v.elements()).map_err(|err| eval_err(term, err))?;
                let internal = matches!(term, P::ReplInt(..));
                if items.is_empty() {
                    if internal {
                        return Err(CompileError::EmptyChoiceList(term.to_string()).into());
                    }
                    return Ok(Arc::new(self.stop()));
                }
                let mut parts = Vec::with_capacity(items.len());
                for v in items {
                    locals.push((x.clone(), v));
                    let r = self.eval(p, locals, budget, len);
                    locals.pop();
                    parts.push(r?);
                }
                self.choice(parts, !internal)
            }
            P::Guard(c, p) => {
                let b = env.eval_bool(c, locals).map_err(|reason| CompileError::GuardNotClosed { guard: c.to_string(), reason })?;
                if b {
                    return self.eval(p, locals, budget, len);
                }
                self.stop()
            }
            P::Seq(p, q) => {
                let a = self.eval(p, locals, budget, len)?;
                let b = self.eval(q, locals, budget, len)?;
                self.seq(&a, &b, len)
            }
            P::Interrupt(p, q) => {
                let a = self.eval(p, locals, budget, len)?;
                let b = self.eval(q, locals, budget, len)?;
                self.interrupt(&a, &b, len)
            }
            P::Hide(p, x) => {
                let set = env.eval_events(x, locals).map_err(|err| eval_err(term, err))?;
                // Hidden events do not count towards trace length, so the
                // operand is explored further; exact for call-free operands.
                let a = self.eval(p, locals, budget, len + size(p))?;
                let hm = set.iter().fold(0, |m, e| m | bit(e));
                self.hide(&a, hm, len)
            }
            P::Rename(p, pairs) => {
                let rel = eval_relation(env, pairs, locals).map_err(|err| eval_err(term, err))?;
                let a = self.eval(p, locals, budget, len)?;
                self.rename(&a, &rel)?
            }
            P::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(env.eval(a, locals).map_err(|err| eval_err(term, err))?);
                }
                let Some(def) = env.def(name, vals.len()) else {
                    return Err(CompileError::UnboundCall { name: name.clone(), arity: vals.len() }.into());
                };
                if budget == 0 {
                    self.truncated = true;
                    return Ok(Arc::new(self.div()));
                }
                let key = (name.clone(), vals, budget, len);
                if let Some(o) = self.memo.get(&key) {
                    return Ok(o.clone());
                }
                let mut inner: Vec<(String, Value)> = def.params.iter().cloned().zip(key.1.iter().cloned()).collect();
                let o = self.eval(&def.body, &mut inner, budget - 1, len)?;
                self.memo.insert(key, o.clone());
                return Ok(o);
            }
        };
        self.check(&out)?;
        Ok(Arc::new(out))
    }

    fn choice(&self, parts: Vec<Arc<Obs>>, external: bool) -> Obs {
        let mut it = parts.into_iter();
        let mut acc = Arc::unwrap_or_clone(it.next().expect("non-empty"));
        for p in it {
            acc = if external { self.ext2(&acc, &p) } else { self.int2(acc, &p) };
        }
        acc
    }

    fn int2(&self, mut a: Obs, b: &Obs) -> Obs {
        for (t, o) in b {
            insert(&mut a, t.clone(), o);
        }
        a
    }

    /// Resolution at the first step: both sides must agree to refuse, and a
    /// revival needs a refusal stable on both sides.
    fn initial_pair(&self, p: &TraceObs, q: &TraceObs, tick_possible: bool) -> TraceObs {
        let mut refusals = meet(&p.refusals, &q.refusals);
        if tick_possible {
            refusals = join(&refusals, &[self.sigma]);
        }
        let both = meet(&p.stable_refusals(self.sigma), &q.stable_refusals(self.sigma));
        let mut revivals = BTreeMap::new();
        let events: Vec<EventId> = p.revivals.keys().chain(q.revivals.keys()).copied().collect();
        for a in events {
            let either = join(p.revivals.get(&a).map_or(&[][..], |v| v), q.revivals.get(&a).map_or(&[][..], |v| v));
            let r = meet(&both, &either);
            if !r.is_empty() {
                revivals.insert(a, r);
            }
        }
        TraceObs { refusals, deadlock: p.deadlock && q.deadlock, revivals }
    }

    fn ext2(&self, a: &Obs, b: &Obs) -> Obs {
        let mut out = Obs::new();
        for (t, o) in a.iter().chain(b.iter()) {
            if !t.is_empty() {
                insert(&mut out, t.clone(), o);
            }
        }
        let tick = vec![Label::Tick];
        let first = self.initial_pair(&a[&Vec::new()], &b[&Vec::new()], a.contains_key(&tick) || b.contains_key(&tick));
        out.insert(Vec::new(), first);
        out
    }

    fn seq(&self, a: &Obs, b: &Obs, len: usize) -> Obs {
        let mut out = Obs::new();
        let t = self.full & !self.sigma;
        for (s, o) in a {
            if ends_in_tick(s) {
                let pre = &s[..s.len() - 1];
                for (u, q) in b {
                    if pre.len() + u.len() <= len {
                        let mut tr = pre.to_vec();
                        tr.extend_from_slice(u);
                        insert(&mut out, tr, q);
                    }
                }
            } else {
                let kept = TraceObs {
                    refusals: o.refusals.iter().copied().filter(|&r| r & t != 0).collect(),
                    deadlock: o.deadlock,
                    revivals: o.revivals.clone(),
                };
                insert(&mut out, s.clone(), &kept);
            }
        }
        out
    }

    fn interrupt(&self, a: &Obs, b: &Obs, len: usize) -> Obs {
        let mut out = Obs::new();
        let q0 = &b[&Vec::new()];
        let q_ticks = b.contains_key(&vec![Label::Tick]);
        for (s, o) in a {
            if ends_in_tick(s) {
                insert(&mut out, s.clone(), o);
                continue;
            }
            let mut st = s.clone();
            st.push(Label::Tick);
            let here = self.initial_pair(o, q0, q_ticks || a.contains_key(&st));
            insert(&mut out, s.clone(), &here);
            for (u, q) in b {
                if !u.is_empty() && s.len() + u.len() <= len {
                    let mut tr = s.clone();
                    tr.extend_from_slice(u);
                    insert(&mut out, tr, q);
                }
            }
        }
        out
    }

    fn hide(&self, a: &Obs, hm: Mask, len: usize) -> Obs {
        let mut out = Obs::new();
        for (s, o) in a {
            let t: Vec<Label> = s.iter().copied().filter(|l| !matches!(l, Label::Vis(e) if hm & bit(*e) != 0)).collect();
            if t.len() > len {
                continue;
            }
            let keep = |rs: &[Mask]| -> Vec<Mask> { rs.iter().copied().filter(|&r| r & hm == hm).collect() };
            let mut revivals = BTreeMap::new();
            for (&e, rs) in &o.revivals {
                let k = keep(rs);
                if !k.is_empty() {
                    revivals.insert(e, k);
                }
            }
            insert(&mut out, t, &TraceObs { refusals: keep(&o.refusals), deadlock: o.deadlock, revivals });
        }
        out
    }

    fn rename(&self, a: &Obs, rel: &Relation) -> Result<Obs, DenotError> {
        let n = self.sigma.count_ones();
        let image = |e: EventId| -> Vec<EventId> { rel.get(&e).cloned().unwrap_or_else(|| vec![e]) };
        // preimage mask of every target event
        let mut pre: Vec<Mask> = vec![0; n as usize];
        for e in 0..n {
            for b in image(e) {
                pre[b as usize] |= bit(e);
            }
        }
        let tick = self.full & !self.sigma;
        let lift = |m: Mask| -> Mask {
            let mut x = m & tick;
            for (b, &p) in pre.iter().enumerate() {
                if p & m == p {
                    x |= bit(b as EventId);
                }
            }
            x
        };
        let mut out = Obs::new();
        for (s, o) in a {
            let mapped = TraceObs {
                refusals: maximize(o.refusals.iter().map(|&m| lift(m)).collect()),
                deadlock: o.deadlock,
                revivals: BTreeMap::new(),
            };
            let mut revs: BTreeMap<EventId, Vec<Mask>> = BTreeMap::new();
            for (&e, rs) in &o.revivals {
                let lifted: Vec<Mask> = rs.iter().map(|&m| lift(m) & self.sigma).collect();
                for b in image(e) {
                    let entry = revs.entry(b).or_default();
                    *entry = join(entry, &lifted);
                }
            }
            let mapped = TraceObs { revivals: revs, ..mapped };
            let mut traces: Vec<Vec<Label>> = vec![Vec::new()];
            for l in s {
                let opts: Vec<Label> = match l {
                    Label::Vis(e) => image(*e).into_iter().map(Label::Vis).collect(),
                    other => vec![*other],
                };
                traces = traces
                    .into_iter()
                    .flat_map(|t| {
                        opts.iter().map(move |&x| {
                            let mut t2 = t.clone();
                            t2.push(x);
                            t2
                        })
                    })
                    .collect();
                if traces.len() > BLOWUP_BOUND {
                    return Err(DenotError::CombinatorialBlowup(BLOWUP_BOUND));
                }
            }
            for t in traces {
                insert(&mut out, t, &mapped);
            }
        }
        self.check(&out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{EventSet, Expr, Symbols};

    fn ev(e: EventId) -> Expr {
        Expr::event(e)
    }

    #[test]
    fn skip_has_no_deadlocks() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let b = denotational_oracle(&env, &ProcessTerm::Skip, 2).unwrap();
        assert!(b.traces.values().all(|o| !o.deadlock));
        assert!(b.has_trace(&[Label::Tick]));
        assert!(!b.truncated);
    }

    #[test]
    fn recursion_is_cut_and_flagged() {
        let mut env = DefEnv::new(Symbols::plain(&["a"]));
        env.define("P", &[], ProcessTerm::prefix(ev(0), ProcessTerm::call("P", vec![])));
        let b = denotational_oracle(&env, &ProcessTerm::call("P", vec![]), 3).unwrap();
        assert!(b.truncated);
        assert!(b.has_trace(&[Label::Vis(0); 3]));
        // below the cut the loop refuses nothing but ✓
        assert!(b.refuses(&[Label::Vis(0); 2], &EventSet::new(), true));
        assert!(!b.refuses(&[Label::Vis(0); 2], &EventSet::singleton(0), false));
    }

    #[test]
    fn external_choice_with_skip_refuses_sigma() {
        let env = DefEnv::new(Symbols::plain(&["a", "b"]));
        let t = ProcessTerm::ExtChoice(vec![ProcessTerm::Skip, ProcessTerm::prefix(ev(0), ProcessTerm::Stop)]);
        let b = denotational_oracle(&env, &t, 2).unwrap();
        assert!(b.refuses(&[], &[0, 1].into_iter().collect(), false));
        assert!(!b.refuses(&[], &EventSet::new(), true));
        assert!(!b.has_revival(&[], &EventSet::new(), 0));
    }

    #[test]
    fn interrupt_by_stop_is_identity() {
        let env = DefEnv::new(Symbols::plain(&["a", "b"]));
        let p = ProcessTerm::prefix(ev(0), ProcessTerm::Stop);
        let lhs = denotational_oracle(&env, &ProcessTerm::interrupt(p.clone(), ProcessTerm::Stop), 3).unwrap();
        let rhs = denotational_oracle(&env, &p, 3).unwrap();
        assert_eq!(lhs.first_difference(&rhs), None);
    }
}
