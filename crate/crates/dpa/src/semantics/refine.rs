//! Refinement checking against a normalised specification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::term::{EventSet, Label, Lts, StateId, DEFAULT_STATE_LIMIT};

use super::{initials, Acceptance, NormalId, NormalSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Failures,
    Revivals,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    /// The implementation performs a label the specification cannot.
    TraceViolation(Label),
    /// The implementation offers only this, which the specification may not.
    RefusalViolation(Acceptance),
    /// The implementation offers `event` while refusing everything outside `acceptance`.
    RevivalViolation {
        acceptance: EventSet,
        event: crate::term::EventId,
    },
    DeadlockViolation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Visible events leading to the witnessing state.
    pub trace: Vec<Label>,
    pub kind: ViolationKind,
    pub impl_state: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Holds,
    Violated(Counterexample),
}

impl Outcome {
    pub fn holds(&self) -> bool {
        matches!(self, Outcome::Holds)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Outcome::Holds => None,
            Outcome::Violated(c) => Some(c),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum RefineError {
    #[error("refinement product exceeds {0} pairs")]
    StateLimitExceeded(usize),
}

/// Effective acceptance of a stable state: ✓ hides everything else.
fn effective(acc: Acceptance) -> Acceptance {
    if acc.tick {
        Acceptance { events: EventSet::new(), tick: true }
    } else {
        acc
    }
}

fn check_state(spec: &NormalSpec, n: NormalId, lts: &Lts, s: StateId, model: Model) -> Option<ViolationKind> {
    let ns = spec.state(n);
    for &(l, _) in lts.out(s) {
        let ok = match l {
            Label::Vis(e) => ns.after(e).is_some(),
            Label::Tick => ns.tick_allowed,
            Label::Tau => true,
        };
        if !ok {
            return Some(ViolationKind::TraceViolation(l));
        }
    }
    let ticked = Acceptance { events: EventSet::new(), tick: true };
    match model {
        Model::Failures => {
            if lts.can_tick(s) && !ns.allows_acceptance(&ticked) {
                return Some(ViolationKind::RefusalViolation(ticked));
            }
            if !lts.is_stable(s) {
                return None;
            }
            let eff = effective(initials(lts, s));
            if !ns.allows_acceptance(&eff) {
                return Some(ViolationKind::RefusalViolation(eff));
            }
        }
        // Failures are implied by traces, deadlocks and revivals here.
        Model::Revivals => {
            if !lts.is_stable(s) || lts.can_tick(s) {
                return None;
            }
            let acc = initials(lts, s);
            if acc.events.is_empty() {
                if !ns.deadlock_allowed {
                    return Some(ViolationKind::DeadlockViolation);
                }
            } else {
                for e in acc.events.iter() {
                    if !ns.allows_revival(&acc.events, e) {
                        return Some(ViolationKind::RevivalViolation { acceptance: acc.events.clone(), event: e });
                    }
                }
            }
        }
    }
    None
}

pub fn refines(spec: &NormalSpec, imp: &Lts, model: Model) -> Result<Outcome, RefineError> {
    refines_with_limit(spec, imp, model, DEFAULT_STATE_LIMIT)
}

/// Breadth-first over (normal state, impl state) pairs, level by visible
/// trace length, so the first violation found has a shortest trace.
pub fn refines_with_limit(spec: &NormalSpec, imp: &Lts, model: Model, limit: usize) -> Result<Outcome, RefineError> {
    let mut g = Product { index: HashMap::new(), parent: Vec::new(), pairs: Vec::new(), limit };
    let mut level: Vec<usize> = Vec::new();
    if let Some(i) = g.visit((NormalSpec::INITIAL, imp.initial), None)? {
        level.push(i);
    }
    while !level.is_empty() {
        // close the level under τ
        let mut k = 0;
        while k < level.len() {
            let (n, s) = g.pairs[level[k]];
            for &(l, t) in imp.out(s) {
                if l == Label::Tau {
                    if let Some(j) = g.visit((n, t), Some((level[k], Label::Tau)))? {
                        level.push(j);
                    }
                }
            }
            k += 1;
        }
        let mut next = Vec::new();
        for &i in &level {
            let (n, s) = g.pairs[i];
            if let Some(kind) = check_state(spec, n, imp, s, model) {
                return Ok(Outcome::Violated(Counterexample { trace: trace_to(&g.parent, i), kind, impl_state: s }));
            }
            for &(l, t) in imp.out(s) {
                if let Label::Vis(e) = l {
                    let n2 = spec.state(n).after(e).expect("checked above");
                    if let Some(j) = g.visit((n2, t), Some((i, l)))? {
                        next.push(j);
                    }
                }
            }
        }
        level = next;
    }
    Ok(Outcome::Holds)
}

struct Product {
    index: HashMap<(NormalId, StateId), usize>,
    parent: Vec<Option<(usize, Label)>>,
    pairs: Vec<(NormalId, StateId)>,
    limit: usize,
}

impl Product {
    fn visit(&mut self, p: (NormalId, StateId), from: Option<(usize, Label)>) -> Result<Option<usize>, RefineError> {
        if self.index.contains_key(&p) {
            return Ok(None);
        }
        if self.pairs.len() >= self.limit {
            return Err(RefineError::StateLimitExceeded(self.limit));
        }
        self.index.insert(p, self.pairs.len());
        self.pairs.push(p);
        self.parent.push(from);
        Ok(Some(self.pairs.len() - 1))
    }
}

fn trace_to(parent: &[Option<(usize, Label)>], mut i: usize) -> Vec<Label> {
    let mut out = Vec::new();
    while let Some((p, l)) = parent[i] {
        if l != Label::Tau {
            out.push(l);
        }
        i = p;
    }
    out.reverse();
    out
}

/// Confirm that a counterexample's trace reaches its state on `imp` and that
/// the state exhibits the reported behaviour.
pub fn replay(imp: &Lts, cex: &Counterexample) -> bool {
    if !imp.after(&cex.trace).contains(&cex.impl_state) {
        return false;
    }
    let s = cex.impl_state;
    match &cex.kind {
        ViolationKind::TraceViolation(l) => imp.out(s).iter().any(|(m, _)| m == l),
        ViolationKind::RefusalViolation(a) if a.tick => imp.can_tick(s),
        ViolationKind::RefusalViolation(a) => imp.is_stable(s) && effective(initials(imp, s)) == *a,
        ViolationKind::RevivalViolation { acceptance, event } => {
            let acc = initials(imp, s);
            imp.is_stable(s) && !acc.tick && acc.events == *acceptance && acceptance.contains(*event)
        }
        ViolationKind::DeadlockViolation => imp.is_stable(s) && imp.out(s).is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::normalize;
    use crate::term::{compile, DefEnv, Expr, ProcessTerm, Symbols};

    fn env() -> DefEnv {
        DefEnv::new(Symbols::plain(&["a", "b"]))
    }

    fn lts(t: &ProcessTerm) -> Lts {
        compile(&env(), t, 100).unwrap()
    }

    fn pre(e: u32, p: ProcessTerm) -> ProcessTerm {
        ProcessTerm::prefix(Expr::event(e), p)
    }

    #[test]
    fn reflexive() {
        let t = ProcessTerm::IntChoice(vec![pre(0, ProcessTerm::Stop), pre(1, ProcessTerm::Skip)]);
        let n = normalize(&lts(&t)).unwrap();
        assert!(refines(&n, &lts(&t), Model::Failures).unwrap().holds());
        assert!(refines(&n, &lts(&t), Model::Revivals).unwrap().holds());
    }

    #[test]
    fn trace_escape() {
        let n = normalize(&lts(&pre(0, ProcessTerm::Stop))).unwrap();
        let imp = lts(&pre(1, ProcessTerm::Stop));
        let out = refines(&n, &imp, Model::Failures).unwrap();
        let c = out.counterexample().unwrap();
        assert_eq!(c.trace, vec![]);
        assert_eq!(c.kind, ViolationKind::TraceViolation(Label::Vis(1)));
        assert!(replay(&imp, c));
    }

    #[test]
    fn failures_blind_to_extra_deadlock_choice_but_revivals_not() {
        // STOP |~| a -> STOP has the same failures as STOP |~| (a -> STOP [] b -> STOP)
        // would allow, but offering a alone is not a revival of the spec.
        let spec = ProcessTerm::IntChoice(vec![
            ProcessTerm::Stop,
            ProcessTerm::ExtChoice(vec![pre(0, ProcessTerm::Stop), pre(1, ProcessTerm::Stop)]),
        ]);
        let imp = ProcessTerm::IntChoice(vec![ProcessTerm::Stop, pre(0, ProcessTerm::Stop)]);
        let n = normalize(&lts(&spec)).unwrap();
        assert!(refines(&n, &lts(&imp), Model::Failures).unwrap().holds());
        let out = refines(&n, &lts(&imp), Model::Revivals).unwrap();
        let c = out.counterexample().unwrap();
        assert_eq!(c.kind, ViolationKind::RevivalViolation { acceptance: EventSet::singleton(0), event: 0 });
        assert!(replay(&lts(&imp), c));
    }

    #[test]
    fn unexpected_deadlock() {
        let spec = pre(0, pre(0, ProcessTerm::Stop));
        let imp = ProcessTerm::ExtChoice(vec![pre(0, ProcessTerm::Stop)]);
        let n = normalize(&lts(&spec)).unwrap();
        let out = refines(&n, &lts(&imp), Model::Revivals).unwrap();
        let c = out.counterexample().unwrap();
        assert_eq!(c.trace, vec![Label::Vis(0)]);
        assert_eq!(c.kind, ViolationKind::DeadlockViolation);
        let out = refines(&n, &lts(&imp), Model::Failures).unwrap();
        assert!(matches!(out.counterexample().unwrap().kind, ViolationKind::RefusalViolation(_)));
    }
}
