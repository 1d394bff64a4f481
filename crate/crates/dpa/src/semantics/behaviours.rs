//! Finite trace-indexed observations: failures, deadlocks and revivals.
//!
//! Refusal sets are bitmasks over event ids with one extra bit for ✓, and
//! are stored per trace as antichains of maximal sets. Subset closure is
//! implicit.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{EventId, EventSet, Label, Lts};

use super::initials;

pub type Mask = u128;

/// Largest alphabet the bitmask representation can hold (one bit is ✓).
pub const MAX_UNIVERSE: usize = 127;

/// Observations after one trace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceObs {
    /// Maximal refusals, ✓ bit included.
    pub refusals: Vec<Mask>,
    pub deadlock: bool,
    /// Per offered event, the maximal refusals (subsets of Σ) seen with it.
    pub revivals: BTreeMap<EventId, Vec<Mask>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviourSet {
    /// Number of events in Σ; bit `sigma_len` stands for ✓.
    pub sigma_len: u32,
    pub traces: BTreeMap<Vec<Label>, TraceObs>,
    /// Some recursion was cut off and replaced by divergence.
    pub truncated: bool,
}

pub(crate) fn bit(e: EventId) -> Mask {
    1u128 << e
}

/// Keep only the maximal elements, sorted.
pub(crate) fn maximize(mut v: Vec<Mask>) -> Vec<Mask> {
    v.sort_unstable();
    v.dedup();
    let keep: Vec<Mask> = v.iter().copied().filter(|&x| !v.iter().any(|&y| y != x && x & y == x)).collect();
    keep
}

/// Pairwise intersection of two downward-closed families.
pub(crate) fn meet(a: &[Mask], b: &[Mask]) -> Vec<Mask> {
    maximize(a.iter().flat_map(|&x| b.iter().map(move |&y| x & y)).collect())
}

pub(crate) fn join(a: &[Mask], b: &[Mask]) -> Vec<Mask> {
    maximize(a.iter().chain(b).copied().collect())
}

impl TraceObs {
    pub(crate) fn merge(&mut self, other: &TraceObs) {
        self.refusals = join(&self.refusals, &other.refusals);
        self.deadlock |= other.deadlock;
        for (&a, r) in &other.revivals {
            let e = self.revivals.entry(a).or_default();
            *e = join(e, r);
        }
    }

    /// The failures^b family: refusals witnessed by a deadlock or a revival.
    pub(crate) fn stable_refusals(&self, sigma: Mask) -> Vec<Mask> {
        let mut v: Vec<Mask> = self.revivals.values().flatten().copied().collect();
        if self.deadlock {
            v.push(sigma);
        }
        maximize(v)
    }

    fn normalized(&self) -> TraceObs {
        TraceObs {
            refusals: maximize(self.refusals.clone()),
            deadlock: self.deadlock,
            revivals: self.revivals.iter().filter(|(_, r)| !r.is_empty()).map(|(&a, r)| (a, maximize(r.clone()))).collect(),
        }
    }
}

impl BehaviourSet {
    pub fn tick_bit(&self) -> Mask {
        1u128 << self.sigma_len
    }

    pub fn sigma_mask(&self) -> Mask {
        self.tick_bit() - 1
    }

    pub fn mask(&self, events: &EventSet, tick: bool) -> Mask {
        let mut m = events.iter().fold(0, |m, e| m | bit(e));
        if tick {
            m |= self.tick_bit();
        }
        m
    }

    pub fn has_trace(&self, trace: &[Label]) -> bool {
        self.traces.contains_key(trace)
    }

    /// Is `(trace, X)` a stable failure, with `X` given by events plus an optional ✓?
    pub fn refuses(&self, trace: &[Label], events: &EventSet, tick: bool) -> bool {
        let m = self.mask(events, tick);
        self.traces.get(trace).is_some_and(|o| o.refusals.iter().any(|&r| r & m == m))
    }

    pub fn is_deadlock(&self, trace: &[Label]) -> bool {
        self.traces.get(trace).is_some_and(|o| o.deadlock)
    }

    pub fn has_revival(&self, trace: &[Label], refusal: &EventSet, event: EventId) -> bool {
        let m = self.mask(refusal, false);
        self.traces.get(trace).and_then(|o| o.revivals.get(&event)).is_some_and(|rs| rs.iter().any(|&r| r & m == m))
    }

    /// Drop traces of length `max_len` or more and canonicalise antichains.
    pub fn restrict(&self, max_len: usize) -> BehaviourSet {
        BehaviourSet {
            sigma_len: self.sigma_len,
            traces: self.traces.iter().filter(|(t, _)| t.len() < max_len).map(|(t, o)| (t.clone(), o.normalized())).collect(),
            truncated: self.truncated,
        }
    }

    /// First trace on which the two sets disagree, with a short reason.
    pub fn first_difference(&self, other: &BehaviourSet) -> Option<(Vec<Label>, &'static str)> {
        let a = self.restrict(usize::MAX);
        let b = other.restrict(usize::MAX);
        for t in a.traces.keys().chain(b.traces.keys()) {
            match (a.traces.get(t), b.traces.get(t)) {
                (Some(x), Some(y)) => {
                    if x.refusals != y.refusals {
                        return Some((t.clone(), "failures"));
                    }
                    if x.deadlock != y.deadlock {
                        return Some((t.clone(), "deadlocks"));
                    }
                    if x.revivals != y.revivals {
                        return Some((t.clone(), "revivals"));
                    }
                }
                _ => return Some((t.clone(), "traces")),
            }
        }
        None
    }
}

impl fmt::Display for BehaviourSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |m: Mask| -> String {
            let mut parts: Vec<String> = (0..self.sigma_len).filter(|&e| m & bit(e) != 0).map(|e| e.to_string()).collect();
            if m & self.tick_bit() != 0 {
                parts.push("✓".into());
            }
            format!("{{{}}}", parts.join(","))
        };
        for (t, o) in &self.traces {
            let tr: Vec<String> = t
                .iter()
                .map(|l| match l {
                    Label::Vis(e) => e.to_string(),
                    Label::Tick => "✓".into(),
                    Label::Tau => "τ".into(),
                })
                .collect();
            write!(f, "<{}>", tr.join(","))?;
            let refs: Vec<String> = o.refusals.iter().map(|&m| show(m)).collect();
            write!(f, " ref [{}]", refs.join(" "))?;
            if o.deadlock {
                write!(f, " dead")?;
            }
            for (a, rs) in &o.revivals {
                let refs: Vec<String> = rs.iter().map(|&m| show(m)).collect();
                write!(f, " rev {a}:[{}]", refs.join(" "))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Read the observations of `lts` off its stable states, for traces of
/// length at most `max_len`.
///
/// Panics if `sigma_len` exceeds [`MAX_UNIVERSE`].
pub fn operational_behaviours(lts: &Lts, sigma_len: usize, max_len: usize) -> BehaviourSet {
    assert!(sigma_len <= MAX_UNIVERSE, "alphabet too large for mask representation");
    let mut out = BehaviourSet { sigma_len: sigma_len as u32, traces: BTreeMap::new(), truncated: false };
    let sigma = out.sigma_mask();
    let full = sigma | out.tick_bit();
    let mut frontier: Vec<(Vec<Label>, Vec<u32>)> = vec![(Vec::new(), lts.tau_closure(&[lts.initial]))];
    while let Some((trace, states)) = frontier.pop() {
        if trace.last() == Some(&Label::Tick) {
            out.traces.insert(trace, TraceObs { refusals: vec![full], ..Default::default() });
            continue;
        }
        let mut obs = TraceObs::default();
        let mut succ: HashMap<Label, Vec<u32>> = HashMap::new();
        for &s in &states {
            for &(l, t) in lts.out(s) {
                if l != Label::Tau {
                    succ.entry(l).or_default().push(t);
                }
            }
            // s⌢✓ being a trace lets s refuse Σ, stable or not
            if lts.can_tick(s) {
                obs.refusals.push(sigma);
                continue;
            }
            if !lts.is_stable(s) {
                continue;
            }
            let acc = initials(lts, s);
            let offered = acc.events.iter().fold(0, |m, e| m | bit(e));
            obs.refusals.push(full & !offered);
            if acc.events.is_empty() {
                obs.deadlock = true;
            }
            for a in acc.events.iter() {
                obs.revivals.entry(a).or_default().push(sigma & !offered);
            }
        }
        out.traces.insert(trace.clone(), obs.normalized());
        if trace.len() < max_len {
            for (l, mut ts) in succ {
                ts.sort_unstable();
                ts.dedup();
                let mut t2 = trace.clone();
                t2.push(l);
                frontier.push((t2, lts.tau_closure(&ts)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antichain_helpers() {
        assert_eq!(maximize(vec![0b011, 0b001, 0b100, 0b011]), vec![0b011, 0b100]);
        assert_eq!(meet(&[0b110], &[0b011, 0b100]), vec![0b110 & 0b011, 0b100].into_iter().collect::<Vec<_>>());
        assert_eq!(join(&[0b01], &[0b11]), vec![0b11]);
    }

    #[test]
    fn prefix_observations() {
        // a -> STOP over Σ = {a, b}
        let l = Lts::new(0, vec![vec![(Label::Vis(0), 1)], vec![]]);
        let b = operational_behaviours(&l, 2, 3);
        assert!(b.refuses(&[], &EventSet::singleton(1), true));
        assert!(!b.refuses(&[], &EventSet::singleton(0), false));
        assert!(b.has_revival(&[], &EventSet::singleton(1), 0));
        assert!(b.is_deadlock(&[Label::Vis(0)]));
        assert!(!b.is_deadlock(&[]));
        assert_eq!(b.traces.len(), 2);
    }

    #[test]
    fn skip_refuses_sigma_but_not_tick() {
        let l = Lts::new(0, vec![vec![(Label::Tick, 1)], vec![]]);
        let b = operational_behaviours(&l, 2, 3);
        assert!(b.refuses(&[], &[0, 1].into_iter().collect(), false));
        assert!(!b.refuses(&[], &EventSet::new(), true));
        assert!(!b.is_deadlock(&[]));
        assert!(!b.is_deadlock(&[Label::Tick]));
        assert!(b.refuses(&[Label::Tick], &[0, 1].into_iter().collect(), true));
    }
}
