//! Stable failures and stable revivals: observation, normalisation and refinement.
//!
//! Termination is handled the usual way for these models: a trace that can
//! be extended by ✓ may refuse all of Σ, whether or not the ✓-capable state
//! is stable. Such states contribute no revivals and are never deadlocks.

mod behaviours;
mod denot;
mod normal;
mod refine;

use serde::{Deserialize, Serialize};

use crate::term::{EventSet, Label, Lts, StateId};

pub use behaviours::{operational_behaviours, BehaviourSet, Mask, TraceObs, MAX_UNIVERSE};
pub use denot::{denotational_oracle, DenotError, BLOWUP_BOUND};
pub use normal::{normalize, normalize_with_limit, NormalError, NormalId, NormalSpec, NormalState};
pub use refine::{refines, refines_with_limit, replay, Counterexample, Model, Outcome, RefineError, ViolationKind};

/// What a state offers: visible initials plus whether ✓ is possible.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Acceptance {
    pub events: EventSet,
    pub tick: bool,
}

impl Acceptance {
    pub fn is_subset(&self, other: &Acceptance) -> bool {
        (!self.tick || other.tick) && self.events.is_subset(&other.events)
    }
}

/// Per-state stability data for an LTS.
#[derive(Clone, Debug)]
pub struct StableInfo {
    /// Initials of each stable state; `None` for states with a τ transition.
    pub acceptances: Vec<Option<Acceptance>>,
    /// States lying on a τ cycle.
    pub divergent: Vec<bool>,
}

impl StableInfo {
    pub fn is_stable(&self, s: StateId) -> bool {
        self.acceptances[s as usize].is_some()
    }

    /// Stable states in the τ-closure of `s`.
    pub fn stable_members(&self, lts: &Lts, s: StateId) -> Vec<StateId> {
        lts.tau_closure(&[s]).into_iter().filter(|&t| self.is_stable(t)).collect()
    }

    pub fn any_divergent(&self) -> bool {
        self.divergent.iter().any(|&d| d)
    }
}

pub fn initials(lts: &Lts, s: StateId) -> Acceptance {
    let mut events = Vec::new();
    let mut tick = false;
    for &(l, _) in lts.out(s) {
        match l {
            Label::Vis(e) => events.push(e),
            Label::Tick => tick = true,
            Label::Tau => {}
        }
    }
    Acceptance { events: events.into_iter().collect(), tick }
}

/// τ-closures, stable acceptances and divergence flags.
pub fn stable_behaviours(lts: &Lts) -> StableInfo {
    let acceptances = (0..lts.len() as StateId).map(|s| if lts.is_stable(s) { Some(initials(lts, s)) } else { None }).collect();
    StableInfo { acceptances, divergent: tau_cycle_states(lts) }
}

/// States on a τ cycle, via an iterative Tarjan SCC pass over τ edges only.
pub fn tau_cycle_states(lts: &Lts) -> Vec<bool> {
    let n = lts.len();
    let mut index = vec![u32::MAX; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut out = vec![false; n];
    let mut next = 0u32;
    let tau_succ = |s: u32| -> Vec<u32> { lts.out(s).iter().filter(|(l, _)| l.is_tau()).map(|&(_, t)| t).collect() };
    for root in 0..n as u32 {
        if index[root as usize] != u32::MAX {
            continue;
        }
        let mut call: Vec<(u32, Vec<u32>, usize)> = vec![(root, tau_succ(root), 0)];
        index[root as usize] = next;
        low[root as usize] = next;
        next += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some((v, succ, i)) = call.last_mut() {
            let v = *v;
            if *i < succ.len() {
                let w = succ[*i];
                *i += 1;
                if index[w as usize] == u32::MAX {
                    index[w as usize] = next;
                    low[w as usize] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, tau_succ(w), 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some((u, _, _)) = call.last() {
                    let u = *u as usize;
                    low[u] = low[u].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    let cyclic = comp.len() > 1 || lts.out(v).iter().any(|&(l, t)| l.is_tau() && t == v);
                    if cyclic {
                        for w in comp {
                            out[w as usize] = true;
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{compile, DefEnv, Expr, ProcessTerm, Symbols};

    #[test]
    fn stop_is_a_stable_deadlock() {
        let env = DefEnv::new(Symbols::plain(&["a"]));
        let l = compile(&env, &ProcessTerm::Stop, 10).unwrap();
        let info = stable_behaviours(&l);
        assert_eq!(info.acceptances[0], Some(Acceptance { events: EventSet::new(), tick: false }));
        assert!(!info.any_divergent());
    }

    #[test]
    fn internal_choice_has_two_stable_members() {
        let env = DefEnv::new(Symbols::plain(&["a", "b"]));
        let t = ProcessTerm::IntChoice(vec![
            ProcessTerm::prefix(Expr::event(0), ProcessTerm::Stop),
            ProcessTerm::prefix(Expr::event(1), ProcessTerm::Stop),
        ]);
        let l = compile(&env, &t, 10).unwrap();
        let info = stable_behaviours(&l);
        assert!(!info.is_stable(l.initial));
        let accs: Vec<EventSet> =
            info.stable_members(&l, l.initial).into_iter().map(|s| info.acceptances[s as usize].clone().unwrap().events).collect();
        assert_eq!(accs, vec![EventSet::singleton(0), EventSet::singleton(1)]);
    }

    #[test]
    fn hidden_loop_diverges() {
        let mut env = DefEnv::new(Symbols::plain(&["a"]));
        env.define("P", &[], ProcessTerm::prefix(Expr::event(0), ProcessTerm::call("P", vec![])));
        let t = ProcessTerm::hide(ProcessTerm::call("P", vec![]), Expr::events(&EventSet::singleton(0)));
        let l = compile(&env, &t, 10).unwrap();
        assert_eq!(l.len(), 1);
        let info = stable_behaviours(&l);
        assert!(info.divergent[0]);
        assert!(info.stable_members(&l, 0).is_empty());
    }
}
