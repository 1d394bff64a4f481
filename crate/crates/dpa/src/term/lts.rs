//! Operators applied directly to compiled transition systems.

use std::collections::{BTreeMap, HashMap};

use super::{EventId, EventSet, Label, Lts, StateId};

/// One-to-many event renaming; events absent from the map keep their name.
pub type Relation = BTreeMap<EventId, Vec<EventId>>;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LtsError {
    #[error("state limit of {0} exceeded")]
    StateLimitExceeded(usize),
    #[error("event {event} performed outside the declared alphabet of operand {side}")]
    AlphabetViolation { event: EventId, side: usize },
}

fn check_alphabet(l: &Lts, alpha: &EventSet, side: usize) -> Result<(), LtsError> {
    for (lab, _) in l.transitions.iter().flatten() {
        if let Label::Vis(e) = lab {
            if !alpha.contains(*e) {
                return Err(LtsError::AlphabetViolation { event: *e, side });
            }
        }
    }
    Ok(())
}

/// Alphabetised parallel `a [alpha_a || alpha_b] b`, built over reachable pairs.
pub fn parallel_lts(a: &Lts, alpha_a: &EventSet, b: &Lts, alpha_b: &EventSet, limit: usize) -> Result<Lts, LtsError> {
    check_alphabet(a, alpha_a, 0)?;
    check_alphabet(b, alpha_b, 1)?;
    let mut index: HashMap<(StateId, StateId), StateId> = HashMap::new();
    let mut order = vec![(a.initial, b.initial)];
    index.insert((a.initial, b.initial), 0);
    let mut transitions = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let (s, t) = order[i];
        let mut out: Vec<(Label, (StateId, StateId))> = Vec::new();
        for &(l, s2) in a.out(s) {
            match l {
                Label::Tau => out.push((l, (s2, t))),
                Label::Vis(e) if !alpha_b.contains(e) => out.push((l, (s2, t))),
                Label::Vis(e) => {
                    for &(m, t2) in b.out(t) {
                        if m == Label::Vis(e) {
                            out.push((l, (s2, t2)));
                        }
                    }
                }
                Label::Tick => {
                    for &(m, t2) in b.out(t) {
                        if m == Label::Tick {
                            out.push((l, (s2, t2)));
                        }
                    }
                }
            }
        }
        for &(l, t2) in b.out(t) {
            match l {
                Label::Tau => out.push((l, (s, t2))),
                Label::Vis(e) if !alpha_a.contains(e) => out.push((l, (s, t2))),
                _ => {}
            }
        }
        let mut mapped = Vec::with_capacity(out.len());
        for (l, pair) in out {
            let id = match index.get(&pair) {
                Some(&id) => id,
                None => {
                    if order.len() >= limit {
                        return Err(LtsError::StateLimitExceeded(limit));
                    }
                    let id = order.len() as StateId;
                    index.insert(pair, id);
                    order.push(pair);
                    id
                }
            };
            mapped.push((l, id));
        }
        transitions.push(mapped);
        i += 1;
    }
    let mut lts = Lts::new(0, transitions);
    if let (Some(na), Some(nb)) = (&a.names, &b.names) {
        lts.names = Some(order.iter().map(|&(s, t)| format!("{} || {}", na[s as usize], nb[t as usize])).collect());
    }
    Ok(lts)
}

/// Relabel every visible event in `hidden` as τ.
pub fn hide_lts(l: &Lts, hidden: &EventSet) -> Lts {
    let transitions = l
        .transitions
        .iter()
        .map(|ts| {
            ts.iter()
                .map(|&(lab, t)| match lab {
                    Label::Vis(e) if hidden.contains(e) => (Label::Tau, t),
                    _ => (lab, t),
                })
                .collect()
        })
        .collect();
    let mut out = Lts::new(l.initial, transitions);
    out.names = l.names.clone();
    out
}

/// Apply a relational renaming, duplicating transitions per image.
pub fn rename_lts(l: &Lts, rel: &Relation) -> Lts {
    let transitions = l
        .transitions
        .iter()
        .map(|ts| {
            let mut out = Vec::with_capacity(ts.len());
            for &(lab, t) in ts {
                match lab {
                    Label::Vis(e) => match rel.get(&e) {
                        Some(images) => out.extend(images.iter().map(|&b| (Label::Vis(b), t))),
                        None => out.push((lab, t)),
                    },
                    _ => out.push((lab, t)),
                }
            }
            out
        })
        .collect();
    let mut out = Lts::new(l.initial, transitions);
    out.names = l.names.clone();
    out
}
