//! Brute-force ground truth: explicit exploration of the synchronised product,
//! snapshot graphs of ungranted requests and cycle detection.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::network::{Network, NetworkError};
use crate::par::par_map;
use crate::semantics::initials;
use crate::term::{EventId, EventSet, Label, Lts, StateId};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("global state is not stable: component {0} can move silently")]
    UnstableState(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalState {
    pub locals: Vec<StateId>,
    pub stable: bool,
    /// Visible events from the initial configuration.
    pub trace: Vec<Label>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotArc {
    pub from: usize,
    pub to: usize,
    /// What `from` offers to `to`, all of it refused.
    pub requested: EventSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotGraph {
    pub nodes: usize,
    pub arcs: Vec<SnapshotArc>,
}

impl SnapshotGraph {
    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.arcs.iter().any(|a| a.from == i && a.to == j)
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for a in &self.arcs {
            adj[a.from].push(a.to);
        }
        adj
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlockWitness {
    pub trace: Vec<String>,
    pub state: GlobalState,
    /// Name of each component's local state, when the compiler kept them.
    pub local_names: Vec<String>,
    pub snapshot: SnapshotGraph,
    pub cycle: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum OracleVerdict {
    DeadlockFree,
    Deadlock(Box<DeadlockWitness>),
    LimitReached { frontier: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub states: usize,
    pub transitions: usize,
    pub levels: usize,
    #[serde(with = "crate::duration_ms")]
    pub elapsed: Duration,
}

impl OracleReport {
    pub fn is_deadlock_free(&self) -> bool {
        self.verdict == OracleVerdict::DeadlockFree
    }

    pub fn witness(&self) -> Option<&DeadlockWitness> {
        match &self.verdict {
            OracleVerdict::Deadlock(w) => Some(w),
            _ => None,
        }
    }
}

/// Raw outcome of [`explore`], before names are attached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exploration {
    DeadlockFree,
    Deadlock { locals: Vec<StateId>, trace: Vec<Label> },
    LimitReached { frontier: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationStats {
    pub states: usize,
    pub transitions: usize,
    pub levels: usize,
}

/// Components indexed by event: who must take part.
fn participants(alphabets: &[EventSet]) -> HashMap<EventId, Vec<usize>> {
    let mut m: HashMap<EventId, Vec<usize>> = HashMap::new();
    for (i, a) in alphabets.iter().enumerate() {
        for e in a.iter() {
            m.entry(e).or_default().push(i);
        }
    }
    m
}

struct Product<'a> {
    ltss: &'a [Arc<Lts>],
    parts: HashMap<EventId, Vec<usize>>,
}

enum Expansion {
    Deadlock,
    Moves(Vec<(Label, Vec<StateId>)>),
}

impl Product<'_> {
    /// Successors in a fixed order: τ moves by component, then events ascending.
    fn expand(&self, g: &[StateId]) -> Expansion {
        let mut moves = Vec::new();
        for (i, l) in self.ltss.iter().enumerate() {
            for &(lab, t) in l.out(g[i]) {
                if lab == Label::Tau {
                    let mut h = g.to_vec();
                    h[i] = t;
                    moves.push((Label::Tau, h));
                }
            }
        }
        let stable = moves.is_empty();
        let mut candidates: Vec<EventId> = Vec::new();
        for (i, l) in self.ltss.iter().enumerate() {
            candidates.extend(l.out(g[i]).iter().filter_map(|&(lab, _)| lab.event()));
        }
        candidates.sort_unstable();
        candidates.dedup();
        for e in candidates {
            let Some(ps) = self.parts.get(&e) else { continue };
            let mut options: Vec<Vec<StateId>> = Vec::with_capacity(ps.len());
            for &i in ps {
                let ts: Vec<StateId> = self.ltss[i].out(g[i]).iter().filter(|&&(lab, _)| lab == Label::Vis(e)).map(|&(_, t)| t).collect();
                if ts.is_empty() {
                    break;
                }
                options.push(ts);
            }
            if options.len() < ps.len() {
                continue;
            }
            // every combination of the participants' nondeterministic targets
            let mut combos: Vec<Vec<StateId>> = vec![g.to_vec()];
            for (k, &i) in ps.iter().enumerate() {
                combos = combos
                    .into_iter()
                    .flat_map(|h| {
                        options[k].iter().map(move |&t| {
                            let mut h2 = h.clone();
                            h2[i] = t;
                            h2
                        })
                    })
                    .collect();
            }
            moves.extend(combos.into_iter().map(|h| (Label::Vis(e), h)));
        }
        let terminated = self.ltss.iter().enumerate().all(|(i, l)| l.can_tick(g[i]));
        if stable && moves.is_empty() && !terminated {
            Expansion::Deadlock
        } else {
            Expansion::Moves(moves)
        }
    }
}

/// Level-synchronous breadth-first search of the product. The first deadlock
/// met is reported, so its trace is as short as any.
pub fn explore(ltss: &[Arc<Lts>], alphabets: &[EventSet], limit: usize) -> (Exploration, ExplorationStats) {
    let product = Product { ltss, parts: participants(alphabets) };
    let init: Vec<StateId> = ltss.iter().map(|l| l.initial).collect();
    let mut index: HashMap<Vec<StateId>, u32> = HashMap::new();
    let mut states: Vec<Vec<StateId>> = vec![init.clone()];
    let mut parent: Vec<Option<(u32, Label)>> = vec![None];
    index.insert(init, 0);
    let mut frontier: Vec<u32> = vec![0];
    let mut stats = ExplorationStats { states: 1, transitions: 0, levels: 0 };
    while !frontier.is_empty() {
        stats.levels += 1;
        let expanded = par_map(&frontier, |&s| product.expand(&states[s as usize]));
        let mut next = Vec::new();
        for (&s, x) in frontier.iter().zip(expanded) {
            match x {
                Expansion::Deadlock => {
                    let mut trace = Vec::new();
                    let mut cur = s;
                    while let Some((p, l)) = parent[cur as usize] {
                        if l != Label::Tau {
                            trace.push(l);
                        }
                        cur = p;
                    }
                    trace.reverse();
                    stats.states = states.len();
                    return (Exploration::Deadlock { locals: states[s as usize].clone(), trace }, stats);
                }
                Expansion::Moves(moves) => {
                    stats.transitions += moves.len();
                    for (l, h) in moves {
                        if index.contains_key(&h) {
                            continue;
                        }
                        if states.len() >= limit {
                            stats.states = states.len();
                            return (Exploration::LimitReached { frontier: frontier.len() + next.len() }, stats);
                        }
                        let id = states.len() as u32;
                        index.insert(h.clone(), id);
                        states.push(h);
                        parent.push(Some((s, l)));
                        next.push(id);
                    }
                }
            }
        }
        frontier = next;
    }
    stats.states = states.len();
    (Exploration::DeadlockFree, stats)
}

/// Offers of every component at a global state; fails if any can move silently.
fn offers(ltss: &[Arc<Lts>], alphabets: &[EventSet], locals: &[StateId]) -> Result<Vec<EventSet>, OracleError> {
    ltss.iter()
        .enumerate()
        .map(|(i, l)| {
            if !l.is_stable(locals[i]) {
                return Err(OracleError::UnstableState(i));
            }
            Ok(initials(l, locals[i]).events.intersection(&alphabets[i]))
        })
        .collect()
}

/// Ungranted requests between every ordered pair of components.
pub fn snapshot_of(ltss: &[Arc<Lts>], alphabets: &[EventSet], voc: &EventSet, locals: &[StateId]) -> Result<SnapshotGraph, OracleError> {
    let off = offers(ltss, alphabets, locals)?;
    let n = ltss.len();
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let requested = off[i].intersection(&alphabets[j]);
            let request = !requested.is_empty();
            let ungranted = !off[i].intersects(&off[j]);
            let in_voc = off[i].union(&off[j]).is_subset(voc);
            if request && ungranted && in_voc {
                arcs.push(SnapshotArc { from: i, to: j, requested });
            }
        }
    }
    Ok(SnapshotGraph { nodes: n, arcs })
}

pub fn snapshot_graph(net: &Network, state: &GlobalState) -> Result<SnapshotGraph, OracleError> {
    let ltss = net.compile_all()?;
    let alphabets: Vec<EventSet> = net.components.iter().map(|c| c.alphabet.clone()).collect();
    snapshot_of(&ltss, &alphabets, &net.voc, &state.locals)
}

/// Some directed cycle, found by depth-first search from the lowest node.
pub fn find_ungranted_cycle(g: &SnapshotGraph) -> Option<Vec<usize>> {
    let adj = g.successors();
    // 0 unvisited, 1 on stack, 2 done
    let mut colour = vec![0u8; g.nodes];
    let mut stack_path: Vec<usize> = Vec::new();
    for root in 0..g.nodes {
        if colour[root] != 0 {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        colour[root] = 1;
        stack_path.push(root);
        while let Some(&mut (v, ref mut k)) = work.last_mut() {
            if *k < adj[v].len() {
                let w = adj[v][*k];
                *k += 1;
                match colour[w] {
                    0 => {
                        colour[w] = 1;
                        stack_path.push(w);
                        work.push((w, 0));
                    }
                    1 => {
                        let from = stack_path.iter().position(|&x| x == w).unwrap();
                        return Some(stack_path[from..].to_vec());
                    }
                    _ => {}
                }
            } else {
                colour[v] = 2;
                stack_path.pop();
                work.pop();
            }
        }
    }
    None
}

/// Explore the network's product for deadlocks, attaching a snapshot graph
/// and a cycle of ungranted requests to any witness found.
pub fn explore_global(net: &Network, limit: usize) -> Result<OracleReport, OracleError> {
    let t0 = Instant::now();
    let ltss = net.compile_all()?;
    let alphabets: Vec<EventSet> = net.components.iter().map(|c| c.alphabet.clone()).collect();
    let (x, stats) = explore(&ltss, &alphabets, limit);
    let verdict = match x {
        Exploration::DeadlockFree => OracleVerdict::DeadlockFree,
        Exploration::LimitReached { frontier } => OracleVerdict::LimitReached { frontier },
        Exploration::Deadlock { locals, trace } => {
            let snapshot = snapshot_of(&ltss, &alphabets, &net.voc, &locals)?;
            let cycle = find_ungranted_cycle(&snapshot).unwrap_or_default();
            if cycle.is_empty() {
                log::warn!("deadlock without a cycle of ungranted requests; is the network live?");
            }
            let local_names = locals.iter().zip(&ltss).map(|(&s, l)| l.state_name(s)).collect();
            OracleVerdict::Deadlock(Box::new(DeadlockWitness {
                trace: net.render_trace(&trace),
                state: GlobalState { locals, stable: true, trace },
                local_names,
                snapshot,
                cycle,
            }))
        }
    };
    Ok(OracleReport { verdict, states: stats.states, transitions: stats.transitions, levels: stats.levels, elapsed: t0.elapsed() })
}

/// Replay a visible trace on the product and report every global state it can reach.
pub fn replay_trace(ltss: &[Arc<Lts>], alphabets: &[EventSet], trace: &[Label]) -> Vec<Vec<StateId>> {
    let product = Product { ltss, parts: participants(alphabets) };
    let closure = |set: Vec<Vec<StateId>>| {
        let mut seen: Vec<Vec<StateId>> = Vec::new();
        let mut todo = set;
        while let Some(g) = todo.pop() {
            if seen.contains(&g) {
                continue;
            }
            if let Expansion::Moves(m) = product.expand(&g) {
                todo.extend(m.into_iter().filter(|(l, _)| *l == Label::Tau).map(|(_, h)| h));
            }
            seen.push(g);
        }
        seen
    };
    let mut cur = closure(vec![ltss.iter().map(|l| l.initial).collect()]);
    for &e in trace {
        let mut next = Vec::new();
        for g in &cur {
            if let Expansion::Moves(m) = product.expand(g) {
                next.extend(m.into_iter().filter(|(l, _)| *l == e).map(|(_, h)| h));
            }
        }
        cur = closure(next);
    }
    cur
}
