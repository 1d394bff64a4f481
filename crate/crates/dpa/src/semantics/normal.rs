//! Subset-construction normal form of a specification LTS.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::term::{EventSet, Label, Lts, StateId, DEFAULT_STATE_LIMIT};

use super::{stable_behaviours, Acceptance};

pub type NormalId = u32;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NormalError {
    #[error("specification diverges after trace {trace:?}")]
    SpecDivergence { trace: Vec<Label> },
    #[error("normal form exceeds {0} states")]
    StateLimitExceeded(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalState {
    /// Specification states reachable on the trace, τ-closed.
    pub members: Vec<StateId>,
    /// Minimal stable acceptances; any ✓-capable member contributes `{✓}`.
    pub min_acceptances: Vec<Acceptance>,
    /// Distinct non-empty acceptances of stable non-terminating members.
    pub rev_acceptances: Vec<EventSet>,
    pub deadlock_allowed: bool,
    pub tick_allowed: bool,
    /// Deterministic successors on visible events, sorted by event.
    pub transitions: Vec<(EventId, NormalId)>,
}

use crate::term::EventId;

impl NormalState {
    pub fn after(&self, e: EventId) -> Option<NormalId> {
        self.transitions.binary_search_by_key(&e, |&(a, _)| a).ok().map(|i| self.transitions[i].1)
    }

    /// Some stable specification acceptance is contained in `acc`.
    pub fn allows_acceptance(&self, acc: &Acceptance) -> bool {
        self.min_acceptances.iter().any(|a| a.is_subset(acc))
    }

    /// Some revival acceptance contains `e` and is contained in `offered`.
    pub fn allows_revival(&self, offered: &EventSet, e: EventId) -> bool {
        self.rev_acceptances.iter().any(|a| a.contains(e) && a.is_subset(offered))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub states: Vec<NormalState>,
}

impl NormalSpec {
    pub const INITIAL: NormalId = 0;

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, n: NormalId) -> &NormalState {
        &self.states[n as usize]
    }

    /// Follow a trace of visible events; `None` if the spec cannot perform it.
    pub fn after(&self, trace: &[EventId]) -> Option<NormalId> {
        trace.iter().try_fold(Self::INITIAL, |n, &e| self.state(n).after(e))
    }
}

pub fn normalize(spec: &Lts) -> Result<NormalSpec, NormalError> {
    normalize_with_limit(spec, DEFAULT_STATE_LIMIT)
}

pub fn normalize_with_limit(spec: &Lts, limit: usize) -> Result<NormalSpec, NormalError> {
    let info = stable_behaviours(spec);
    let mut index: HashMap<Vec<StateId>, NormalId> = HashMap::new();
    let mut parents: Vec<Option<(NormalId, EventId)>> = vec![None];
    let first = spec.tau_closure(&[spec.initial]);
    index.insert(first.clone(), 0);
    let mut pending = vec![first];
    let mut states: Vec<NormalState> = Vec::new();
    let mut i = 0;
    while i < pending.len() {
        let members = pending[i].clone();
        if members.iter().any(|&s| info.divergent[s as usize]) {
            let mut trace = Vec::new();
            let mut cur = i as NormalId;
            while let Some((p, e)) = parents[cur as usize] {
                trace.push(Label::Vis(e));
                cur = p;
            }
            trace.reverse();
            return Err(NormalError::SpecDivergence { trace });
        }
        let mut accs: Vec<Acceptance> = Vec::new();
        let mut revs: Vec<EventSet> = Vec::new();
        let mut deadlock_allowed = false;
        let mut tick_allowed = false;
        let mut succ: std::collections::BTreeMap<EventId, Vec<StateId>> = Default::default();
        for &s in &members {
            for &(l, t) in spec.out(s) {
                match l {
                    Label::Vis(e) => succ.entry(e).or_default().push(t),
                    Label::Tick => tick_allowed = true,
                    Label::Tau => {}
                }
            }
            if let Some(acc) = &info.acceptances[s as usize] {
                if !acc.tick {
                    if acc.events.is_empty() {
                        deadlock_allowed = true;
                    } else {
                        revs.push(acc.events.clone());
                    }
                    accs.push(acc.clone());
                }
            }
        }
        if tick_allowed {
            accs.push(Acceptance { events: EventSet::new(), tick: true });
        }
        accs.sort();
        accs.dedup();
        let min_acceptances: Vec<Acceptance> = accs.iter().filter(|a| !accs.iter().any(|b| b != *a && b.is_subset(a))).cloned().collect();
        revs.sort();
        revs.dedup();
        let mut transitions = Vec::with_capacity(succ.len());
        for (e, ts) in succ {
            let mut ts = spec.tau_closure(&ts);
            ts.sort_unstable();
            let id = match index.get(&ts) {
                Some(&id) => id,
                None => {
                    if pending.len() >= limit {
                        return Err(NormalError::StateLimitExceeded(limit));
                    }
                    let id = pending.len() as NormalId;
                    index.insert(ts.clone(), id);
                    pending.push(ts);
                    parents.push(Some((i as NormalId, e)));
                    id
                }
            };
            transitions.push((e, id));
        }
        states.push(NormalState { members, min_acceptances, rev_acceptances: revs, deadlock_allowed, tick_allowed, transitions });
        i += 1;
    }
    Ok(NormalSpec { states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{compile, DefEnv, Expr, ProcessTerm, Symbols};

    fn acc(es: &[EventId]) -> Acceptance {
        Acceptance { events: es.iter().copied().collect(), tick: false }
    }

    #[test]
    fn prefix_normalizes_to_two_states() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let l = compile(&env, &ProcessTerm::prefix(Expr::event(0), ProcessTerm::Stop), 10).unwrap();
        let n = normalize(&l).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n.states[0].min_acceptances, vec![acc(&[0])]);
        assert_eq!(n.states[1].min_acceptances, vec![acc(&[])]);
        assert!(n.states[1].deadlock_allowed);
        assert!(!n.states[0].deadlock_allowed);
    }

    #[test]
    fn internal_choice_keeps_both_acceptances() {
        let env = DefEnv::new(Symbols::plain(&["a", "b"]));
        let t = ProcessTerm::IntChoice(vec![
            ProcessTerm::prefix(Expr::event(0), ProcessTerm::Stop),
            ProcessTerm::prefix(Expr::event(1), ProcessTerm::Stop),
        ]);
        let n = normalize(&compile(&env, &t, 10).unwrap()).unwrap();
        assert_eq!(n.states[0].min_acceptances, vec![acc(&[0]), acc(&[1])]);
        assert_eq!(n.states[0].transitions.len(), 2);
        assert!(n.after(&[0]).is_some() && n.after(&[1]).is_some());
    }

    #[test]
    fn divergent_spec_is_reported() {
        let mut env = DefEnv::new(Symbols::plain(&["a", "b"]));
        env.define("P", &[], ProcessTerm::prefix(Expr::event(0), ProcessTerm::call("P", vec![])));
        let t =
            ProcessTerm::prefix(Expr::event(1), ProcessTerm::hide(ProcessTerm::call("P", vec![]), Expr::events(&EventSet::singleton(0))));
        let err = normalize(&compile(&env, &t, 10).unwrap()).unwrap_err();
        assert_eq!(err, NormalError::SpecDivergence { trace: vec![Label::Vis(1)] });
    }
}
