//! Process terms and their compilation to labelled transition systems.

mod compile;
mod expr;
mod lts;
mod process;
mod sets;
mod symbols;

use std::fmt;

use serde::{Deserialize, Serialize};

pub(crate) use compile::eval_relation;
pub use compile::{compile, compile_with, CompileError, CompileOptions, DEFAULT_STATE_LIMIT};
pub use expr::{as_bool, as_int, BinOp, EvalError, Expr, Gen, Locals, UnOp, Value};
pub use lts::{hide_lts, parallel_lts, rename_lts, LtsError, Relation};
pub use process::{DefEnv, FunDef, ProcDef, ProcessTerm};
pub use sets::EventSet;
pub use symbols::{Channel, EventId, SymbolError, Symbols, SymbolsBuilder, MAX_EVENTS};

pub type StateId = u32;

/// Transition label. The derived order puts visible events first, then ✓, then τ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Vis(EventId),
    Tick,
    Tau,
}

impl Label {
    pub fn is_tau(self) -> bool {
        self == Label::Tau
    }

    pub fn event(self) -> Option<EventId> {
        match self {
            Label::Vis(e) => Some(e),
            _ => None,
        }
    }

    pub fn render(self, symbols: &Symbols) -> String {
        match self {
            Label::Vis(e) => symbols.name(e).to_string(),
            Label::Tick => "✓".into(),
            Label::Tau => "τ".into(),
        }
    }
}

/// Finite labelled transition system with dense state ids.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lts {
    pub initial: StateId,
    /// Outgoing transitions per state, sorted and duplicate-free.
    pub transitions: Vec<Vec<(Label, StateId)>>,
    /// Optional canonical term per state, for diagnostics.
    pub names: Option<Vec<String>>,
}

impl fmt::Debug for Lts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lts")
            .field("states", &self.len())
            .field("transitions", &self.transition_count())
            .field("initial", &self.initial)
            .finish()
    }
}

impl Lts {
    pub fn new(initial: StateId, mut transitions: Vec<Vec<(Label, StateId)>>) -> Self {
        for ts in &mut transitions {
            ts.sort_unstable();
            ts.dedup();
        }
        Lts { initial, transitions, names: None }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(|t| t.len()).sum()
    }

    pub fn out(&self, s: StateId) -> &[(Label, StateId)] {
        &self.transitions[s as usize]
    }

    pub fn is_stable(&self, s: StateId) -> bool {
        !self.out(s).iter().any(|(l, _)| *l == Label::Tau)
    }

    pub fn can_tick(&self, s: StateId) -> bool {
        self.out(s).iter().any(|(l, _)| *l == Label::Tick)
    }

    /// Visible events on reachable transitions.
    pub fn visible_events(&self) -> EventSet {
        self.transitions.iter().flatten().filter_map(|(l, _)| l.event()).collect()
    }

    /// Follow a sequence of visible labels, closing under τ between steps.
    /// Returns the set of states reachable after the trace.
    pub fn after(&self, trace: &[Label]) -> Vec<StateId> {
        let mut cur = self.tau_closure(&[self.initial]);
        for l in trace {
            let mut next: Vec<StateId> = cur.iter().flat_map(|&s| self.out(s).iter().filter(|(m, _)| m == l).map(|&(_, t)| t)).collect();
            next.sort_unstable();
            next.dedup();
            cur = self.tau_closure(&next);
        }
        cur
    }

    pub fn tau_closure(&self, seeds: &[StateId]) -> Vec<StateId> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<StateId> = Vec::new();
        for &s in seeds {
            if !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            out.push(s);
            for &(l, t) in self.out(s) {
                if l == Label::Tau && !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn state_name(&self, s: StateId) -> String {
        match &self.names {
            Some(n) => n[s as usize].clone(),
            None => format!("s{s}"),
        }
    }
}
