//! First phase of the analysis: remove conflict-free bridges from the
//! communication graph and collect the essential subnetworks left behind.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::network::{check_live, diverges, CommGraph, LivenessReport, Network, NetworkError};
use crate::par::par_map;
use crate::semantics::{normalize, refines_with_limit, Counterexample, Model, NormalError, NormalSpec, Outcome, RefineError};
use crate::term::{compile, parallel_lts, rename_lts, CompileError, DefEnv, EventSet, Expr, Lts, LtsError, ProcessTerm, Relation};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DecompError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("network is not live: {}", .0.reasons().join("; "))]
    NotLive(Box<LivenessReport>),
    #[error("context: {0}")]
    Context(#[from] LtsError),
    #[error("conflict-freedom specification: {0}")]
    Spec(#[from] CompileError),
    #[error(transparent)]
    Normal(#[from] NormalError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Bridges of an undirected graph, as sorted `(a, b)` pairs with `a < b`.
///
/// Iterative lowlink search, linear in nodes plus edges.
pub fn bridges(g: &CommGraph) -> Vec<(usize, usize)> {
    let n = g.nodes;
    // adjacency carrying edge ids so a parallel edge is not mistaken for the tree edge
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in g.edges.iter().enumerate() {
        adj[e.a].push((e.b, k));
        adj[e.b].push((e.a, k));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut time = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        // (node, edge used to enter it, next neighbour index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        while let Some(&mut (v, via, ref mut i)) = stack.last_mut() {
            if *i < adj[v].len() {
                let (w, k) = adj[v][*i];
                *i += 1;
                if k == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = time;
                    low[w] = time;
                    time += 1;
                    stack.push((w, k, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(u, _, _)) = stack.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] > disc[u] {
                        out.push((u.min(v), u.max(v)));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// The two abstracted components side by side, each offering `req`
/// alongside every event they share.
pub fn build_context(net: &Network, i: usize, j: usize) -> Result<Lts, DecompError> {
    let (ai, aj) = (&net.component(i)?.alphabet, &net.component(j)?.alphabet);
    let shared = ai.intersection(aj);
    if shared.is_empty() {
        return Err(NetworkError::NotAnEdge(i, j).into());
    }
    let req = net.env.symbols.req();
    let rel: Relation = shared.iter().map(|x| (x, vec![x, req])).collect();
    let ei = rename_lts(&net.abs(i)?, &rel);
    let ej = rename_lts(&net.abs(j)?, &rel);
    let r = EventSet::singleton(req);
    Ok(parallel_lts(&ei, &ai.union(&r), &ej, &aj.union(&r), net.state_limit)?)
}

/// The conflict-freedom specification for edge `(i, j)` as a closed term in
/// an extension of the network's environment.
pub fn conflict_free_spec_term(net: &Network, i: usize, j: usize) -> Result<(DefEnv, ProcessTerm), DecompError> {
    let (ai, aj) = (&net.component(i)?.alphabet, &net.component(j)?.alphabet);
    let inter = ai.intersection(aj);
    if inter.is_empty() {
        return Err(NetworkError::NotAnEdge(i, j).into());
    }
    let union = ai.union(aj);
    let req = net.env.symbols.req();
    let mut env = (*net.env).clone();
    let cf = env.fresh_name("CF");
    let chaos = env.fresh_name("CHAOS");
    let ev = || Expr::var("ev");
    let chaos_body = ProcessTerm::IntChoice(vec![
        ProcessTerm::Skip,
        ProcessTerm::Stop,
        ProcessTerm::repl_int(
            "ev",
            Expr::events(&union.union(&EventSet::singleton(req))),
            ProcessTerm::prefix(ev(), ProcessTerm::call(&chaos, vec![])),
        ),
    ]);
    let cf_body = ProcessTerm::IntChoice(vec![
        ProcessTerm::ExtChoice(vec![
            ProcessTerm::repl_int("ev", Expr::events(&inter), ProcessTerm::prefix(ev(), ProcessTerm::call(&cf, vec![]))),
            ProcessTerm::prefix(Expr::event(req), ProcessTerm::call(&chaos, vec![])),
        ]),
        ProcessTerm::repl_int("ev", Expr::events(&union), ProcessTerm::prefix(ev(), ProcessTerm::call(&cf, vec![]))),
    ]);
    env.define(&chaos, &[], chaos_body);
    env.define(&cf, &[], cf_body);
    Ok((env, ProcessTerm::call(&cf, vec![])))
}

pub fn build_conflict_free_spec(net: &Network, i: usize, j: usize) -> Result<NormalSpec, DecompError> {
    let (env, t) = conflict_free_spec_term(net, i, j)?;
    Ok(normalize(&compile(&env, &t, net.state_limit)?)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ConflictFree,
    /// The check failed; the pair may conflict, or abstraction lost precision.
    PossibleConflict(Counterexample),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictCheck {
    pub edge: (usize, usize),
    pub verdict: Verdict,
    pub context_states: usize,
    #[serde(with = "crate::duration_ms")]
    pub elapsed: Duration,
}

impl ConflictCheck {
    pub fn is_conflict_free(&self) -> bool {
        self.verdict == Verdict::ConflictFree
    }
}

pub fn check_conflict_free(net: &Network, i: usize, j: usize) -> Result<ConflictCheck, DecompError> {
    let start = Instant::now();
    let ctx = build_context(net, i, j)?;
    let spec = build_conflict_free_spec(net, i, j)?;
    let verdict = match refines_with_limit(&spec, &ctx, Model::Revivals, net.state_limit)? {
        Outcome::Holds => Verdict::ConflictFree,
        Outcome::Violated(c) => Verdict::PossibleConflict(c),
    };
    Ok(ConflictCheck { edge: (i.min(j), i.max(j)), verdict, context_states: ctx.len(), elapsed: start.elapsed() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub bridges: Vec<(usize, usize)>,
    pub removed_edges: Vec<(usize, usize)>,
    /// Connected components of the residual graph, ordered by least member.
    pub essential_subnetworks: Vec<Vec<usize>>,
    pub all_singular: bool,
    pub checks: Vec<ConflictCheck>,
    /// Components whose abstraction can diverge. Only stable states matter for
    /// deadlock, so these are informational.
    pub warnings: Vec<String>,
    #[serde(with = "crate::duration_ms")]
    pub bridges_time: Duration,
    #[serde(with = "crate::duration_ms")]
    pub conflicts_time: Duration,
}

/// Connected components of `g` without the edges in `removed`.
pub fn residual_components(g: &CommGraph, removed: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.nodes];
    for e in &g.edges {
        if removed.binary_search(&(e.a, e.b)).is_err() {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
    }
    let mut seen = vec![false; g.nodes];
    let mut out = Vec::new();
    for s in 0..g.nodes {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Abstractions that diverge, as warnings.
pub fn divergence_warnings(net: &Network) -> Result<Vec<String>, DecompError> {
    let idx: Vec<usize> = (0..net.len()).collect();
    let abs: Vec<Result<bool, NetworkError>> = par_map(&idx, |&i| net.abs(i).map(|l| diverges(&l)));
    let mut out = Vec::new();
    for (i, d) in abs.into_iter().enumerate() {
        if d? {
            out.push(format!("abstraction of {} can diverge on private events; only its stable states are checked", net.name(i)));
        }
    }
    Ok(out)
}

/// Requires a live network. Bridges are computed once, on the original graph:
/// removing a bridge never turns another edge into one.
pub fn decompose(net: &Network) -> Result<DecompositionResult, DecompError> {
    let live = check_live(net)?;
    if !live.is_live() {
        return Err(DecompError::NotLive(Box::new(live)));
    }
    decompose_unchecked(net)
}

/// As [`decompose`] without the liveness gate.
pub fn decompose_unchecked(net: &Network) -> Result<DecompositionResult, DecompError> {
    let warnings = divergence_warnings(net)?;
    let t0 = Instant::now();
    let g = net.comm_graph();
    let br = bridges(&g);
    let bridges_time = t0.elapsed();
    let t1 = Instant::now();
    let checks: Result<Vec<ConflictCheck>, DecompError> = par_map(&br, |&(i, j)| check_conflict_free(net, i, j)).into_iter().collect();
    let checks = checks?;
    let conflicts_time = t1.elapsed();
    let removed: Vec<(usize, usize)> = checks.iter().filter(|c| c.is_conflict_free()).map(|c| c.edge).collect();
    let essential = residual_components(&g, &removed);
    let all_singular = essential.iter().all(|c| c.len() == 1);
    Ok(DecompositionResult {
        bridges: br,
        removed_edges: removed,
        essential_subnetworks: essential,
        all_singular,
        checks,
        warnings,
        bridges_time,
        conflicts_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Component, Edge};
    use crate::semantics::ViolationKind;
    use crate::term::{Label, Symbols};
    use std::sync::Arc;

    fn graph(n: usize, edges: &[(usize, usize)]) -> CommGraph {
        CommGraph { nodes: n, edges: edges.iter().map(|&(a, b)| Edge { a, b, shared: EventSet::new() }).collect() }
    }

    #[test]
    fn bridges_of_small_graphs() {
        assert_eq!(bridges(&graph(4, &[(0, 1), (0, 2), (0, 3)])), vec![(0, 1), (0, 2), (0, 3)]);
        let ring: Vec<(usize, usize)> = (0..6).map(|i| (i.min((i + 1) % 6), i.max((i + 1) % 6))).collect();
        assert!(bridges(&graph(6, &ring)).is_empty());
        let two = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3)];
        assert_eq!(bridges(&graph(6, &two)), vec![(0, 3)]);
    }

    fn pair(p: ProcessTerm, q: ProcessTerm) -> Network {
        let mut env = DefEnv::new(Symbols::plain(&["a", "b"]));
        env.define("P", &[], p);
        env.define("Q", &[], q);
        let ab: EventSet = [0, 1].into_iter().collect();
        Network::new(
            Arc::new(env),
            vec![Component::new("P", ab.clone(), ProcessTerm::call("P", vec![])), Component::new("Q", ab, ProcessTerm::call("Q", vec![]))],
        )
    }

    fn pre(e: u32, k: ProcessTerm) -> ProcessTerm {
        ProcessTerm::prefix(Expr::event(e), k)
    }

    #[test]
    fn agreeing_pair_is_conflict_free() {
        let net = pair(pre(0, ProcessTerm::call("P", vec![])), pre(0, ProcessTerm::call("Q", vec![])));
        let ctx = build_context(&net, 0, 1).unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx.out(0).len(), 2);
        assert!(check_conflict_free(&net, 0, 1).unwrap().is_conflict_free());
    }

    #[test]
    fn crossed_pair_conflicts_at_start() {
        let net = pair(pre(0, pre(1, ProcessTerm::call("P", vec![]))), pre(1, pre(0, ProcessTerm::call("Q", vec![]))));
        let c = check_conflict_free(&net, 0, 1).unwrap();
        let Verdict::PossibleConflict(cex) = c.verdict else { panic!("expected conflict") };
        assert_eq!(cex.trace, Vec::<Label>::new());
        let req = net.env.symbols.req();
        assert_eq!(cex.kind, ViolationKind::RevivalViolation { acceptance: EventSet::singleton(req), event: req });
    }

    #[test]
    fn spec_is_one_recurrent_state_before_req() {
        let net = pair(pre(0, ProcessTerm::call("P", vec![])), pre(0, ProcessTerm::call("Q", vec![])));
        let spec = build_conflict_free_spec(&net, 0, 1).unwrap();
        let s0 = spec.state(NormalSpec::INITIAL);
        assert!(!s0.deadlock_allowed);
        let req = net.env.symbols.req();
        assert_eq!(s0.after(0), Some(NormalSpec::INITIAL));
        assert_eq!(s0.after(1), Some(NormalSpec::INITIAL));
        for a in &s0.min_acceptances {
            if a.events.contains(req) {
                assert!(a.events.contains(0) || a.events.contains(1));
            }
        }
        // past req the specification is chaotic and permits deadlock
        let after_req = spec.state(s0.after(req).unwrap());
        assert!(after_req.deadlock_allowed);
    }
}
