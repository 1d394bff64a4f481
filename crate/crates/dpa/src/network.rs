//! Networks of components: liveness side conditions, vocabulary, abstraction
//! and the communication graph.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::par::par_map;
use crate::semantics::{tau_cycle_states, Counterexample};
use crate::term::{compile, hide_lts, CompileError, DefEnv, EventId, EventSet, Label, Lts, ProcessTerm, DEFAULT_STATE_LIMIT};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("component `{component}`: {source}")]
    Compile { component: String, source: CompileError },
    #[error("component `{component}` performs `{event}` outside its alphabet")]
    AlphabetViolation { component: String, event: String },
    #[error("no component with index {0}")]
    UnknownComponent(usize),
    #[error("components {0} and {1} share no events")]
    NotAnEdge(usize, usize),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub alphabet: EventSet,
    pub behaviour: ProcessTerm,
    #[serde(skip)]
    compiled: OnceLock<Result<Arc<Lts>, NetworkError>>,
}

impl Clone for Component {
    fn clone(&self) -> Self {
        Component {
            name: self.name.clone(),
            alphabet: self.alphabet.clone(),
            behaviour: self.behaviour.clone(),
            compiled: self.compiled.clone(),
        }
    }
}

impl Component {
    pub fn new(name: impl Into<String>, alphabet: EventSet, behaviour: ProcessTerm) -> Self {
        Component { name: name.into(), alphabet, behaviour, compiled: OnceLock::new() }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    pub env: Arc<DefEnv>,
    pub components: Vec<Component>,
    /// Every declared event.
    pub sigma: EventSet,
    /// Events shared by at least two components.
    pub voc: EventSet,
    pub state_limit: usize,
}

impl Network {
    pub fn new(env: Arc<DefEnv>, components: Vec<Component>) -> Self {
        let sigma = env.symbols.sigma();
        let mut voc = EventSet::new();
        for (i, a) in components.iter().enumerate() {
            for b in &components[i + 1..] {
                voc = voc.union(&a.alphabet.intersection(&b.alphabet));
            }
        }
        Network { env, components, sigma, voc, state_limit: DEFAULT_STATE_LIMIT }
    }

    pub fn with_state_limit(mut self, limit: usize) -> Self {
        self.state_limit = limit;
        for c in &mut self.components {
            c.compiled = OnceLock::new();
        }
        self
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, i: usize) -> Result<&Component, NetworkError> {
        self.components.get(i).ok_or(NetworkError::UnknownComponent(i))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.components[i].name
    }

    pub fn event_name(&self, e: EventId) -> &str {
        self.env.symbols.name(e)
    }

    pub fn fmt_events(&self, es: &EventSet) -> String {
        self.env.symbols.fmt_events(es.iter())
    }

    pub fn render_trace(&self, trace: &[Label]) -> Vec<String> {
        trace.iter().map(|l| l.render(&self.env.symbols)).collect()
    }

    /// Compiled behaviour of component `i`, cached after the first call.
    /// What a failed refinement check saw, in event names.
    pub fn describe_violation(&self, c: &Counterexample) -> String {
        use crate::semantics::ViolationKind::*;
        match &c.kind {
            TraceViolation(l) => format!("performs {}", l.render(&self.env.symbols)),
            RefusalViolation(a) => {
                let mut s = self.fmt_events(&a.events);
                if a.tick {
                    s.push_str(" with ✓");
                }
                format!("may offer only {s}")
            }
            RevivalViolation { acceptance, event } => {
                format!("offers {} while refusing all but {}", self.event_name(*event), self.fmt_events(acceptance))
            }
            DeadlockViolation => "may deadlock".into(),
        }
    }

    pub fn compiled(&self, i: usize) -> Result<Arc<Lts>, NetworkError> {
        let c = self.component(i)?;
        c.compiled
            .get_or_init(|| {
                let lts = compile(&self.env, &c.behaviour, self.state_limit)
                    .map_err(|source| NetworkError::Compile { component: c.name.clone(), source })?;
                if let Some(e) = lts.visible_events().iter().find(|&e| !c.alphabet.contains(e)) {
                    return Err(NetworkError::AlphabetViolation { component: c.name.clone(), event: self.event_name(e).to_string() });
                }
                Ok(Arc::new(lts))
            })
            .clone()
    }

    /// Compile every component, in parallel when enabled.
    pub fn compile_all(&self) -> Result<Vec<Arc<Lts>>, NetworkError> {
        let idx: Vec<usize> = (0..self.len()).collect();
        par_map(&idx, |&i| self.compiled(i)).into_iter().collect()
    }

    /// Component `i` with every event outside the vocabulary hidden.
    pub fn abs(&self, i: usize) -> Result<Lts, NetworkError> {
        let l = self.compiled(i)?;
        Ok(hide_lts(&l, &self.sigma.difference(&self.voc)))
    }

    pub fn comm_graph(&self) -> CommGraph {
        let n = self.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let shared = self.components[i].alphabet.intersection(&self.components[j].alphabet);
                if !shared.is_empty() {
                    edges.push(Edge { a: i, b: j, shared });
                }
            }
        }
        CommGraph { nodes: n, edges }
    }
}

/// Whether hiding introduced a τ cycle.
pub fn diverges(l: &Lts) -> bool {
    tau_cycle_states(l).into_iter().any(|d| d)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub shared: EventSet,
}

/// Undirected communication graph; edges are sorted with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommGraph {
    pub nodes: usize,
    pub edges: Vec<Edge>,
}

impl CommGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        self.edges.iter().any(|e| e.a == a && e.b == b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub component: String,
    pub pass: bool,
    /// Shortest trace to the offending state, rendered.
    pub witness: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleViolation {
    pub event: String,
    pub components: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LivenessReport {
    pub busy: Vec<ComponentCheck>,
    pub non_terminating: Vec<ComponentCheck>,
    pub triple_disjoint: Option<TripleViolation>,
}

impl LivenessReport {
    pub fn is_live(&self) -> bool {
        self.busy.iter().all(|c| c.pass) && self.non_terminating.iter().all(|c| c.pass) && self.triple_disjoint.is_none()
    }

    pub fn reasons(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.busy {
            if let Some(w) = &c.witness {
                out.push(format!("{} can deadlock after <{}>", c.component, w.join(", ")));
            }
        }
        for c in &self.non_terminating {
            if let Some(w) = &c.witness {
                out.push(format!("{} can terminate: <{}>", c.component, w.join(", ")));
            }
        }
        if let Some(t) = &self.triple_disjoint {
            out.push(format!("event {} is shared by components {:?}", t.event, t.components));
        }
        out
    }
}

/// Shortest visible trace to a state satisfying `bad`, not passing through ✓.
fn find(l: &Lts, bad: impl Fn(u32) -> bool) -> Option<(Vec<Label>, u32)> {
    let mut parent: Vec<Option<(u32, Label)>> = vec![None; l.len()];
    let mut seen = vec![false; l.len()];
    let mut q = VecDeque::new();
    seen[l.initial as usize] = true;
    q.push_back(l.initial);
    while let Some(s) = q.pop_front() {
        if bad(s) {
            let mut trace = Vec::new();
            let mut cur = s;
            while let Some((p, lab)) = parent[cur as usize] {
                if lab != Label::Tau {
                    trace.push(lab);
                }
                cur = p;
            }
            trace.reverse();
            return Some((trace, s));
        }
        for &(lab, t) in l.out(s) {
            if lab != Label::Tick && !seen[t as usize] {
                seen[t as usize] = true;
                parent[t as usize] = Some((s, lab));
                q.push_back(t);
            }
        }
    }
    None
}

pub fn check_live(net: &Network) -> Result<LivenessReport, NetworkError> {
    let ltss = net.compile_all()?;
    let mut busy = Vec::new();
    let mut non_terminating = Vec::new();
    for (i, l) in ltss.iter().enumerate() {
        let name = net.name(i).to_string();
        let dead = find(l, |s| l.out(s).is_empty());
        busy.push(ComponentCheck { component: name.clone(), pass: dead.is_none(), witness: dead.map(|(t, _)| net.render_trace(&t)) });
        let tick = find(l, |s| l.can_tick(s)).map(|(mut t, _)| {
            t.push(Label::Tick);
            t
        });
        non_terminating.push(ComponentCheck { component: name, pass: tick.is_none(), witness: tick.map(|t| net.render_trace(&t)) });
    }
    Ok(LivenessReport { busy, non_terminating, triple_disjoint: triple_disjointness(net) })
}

/// First event (by id) lying in three or more alphabets.
pub fn triple_disjointness(net: &Network) -> Option<TripleViolation> {
    let mut owners: std::collections::BTreeMap<EventId, Vec<usize>> = Default::default();
    for (i, c) in net.components.iter().enumerate() {
        for e in c.alphabet.iter() {
            owners.entry(e).or_default().push(i);
        }
    }
    owners
        .into_iter()
        .find(|(_, v)| v.len() >= 3)
        .map(|(e, v)| TripleViolation { event: net.event_name(e).to_string(), components: [v[0], v[1], v[2]] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Expr, Symbols};

    fn net(names: &[&str], comps: Vec<(&str, &[u32], ProcessTerm)>, defs: Vec<(&str, ProcessTerm)>) -> Network {
        let mut env = DefEnv::new(Symbols::plain(names));
        for (n, b) in defs {
            env.define(n, &[], b);
        }
        let comps = comps.into_iter().map(|(n, a, b)| Component::new(n, a.iter().copied().collect(), b)).collect();
        Network::new(Arc::new(env), comps)
    }

    fn looping(name: &str, e: u32) -> (&str, ProcessTerm) {
        (name, ProcessTerm::prefix(Expr::event(e), ProcessTerm::call(name, vec![])))
    }

    #[test]
    fn stop_component_is_not_busy() {
        let n = net(&["a"], vec![("P", &[0], ProcessTerm::call("P", vec![])), ("S", &[0], ProcessTerm::Stop)], vec![looping("P", 0)]);
        let r = check_live(&n).unwrap();
        assert!(r.busy[0].pass);
        assert!(!r.busy[1].pass);
        assert_eq!(r.busy[1].witness, Some(vec![]));
        assert!(!r.is_live());
    }

    #[test]
    fn triple_sharing_detected() {
        let p = ProcessTerm::call("P", vec![]);
        let n = net(&["x"], vec![("A", &[0], p.clone()), ("B", &[0], p.clone()), ("C", &[0], p)], vec![looping("P", 0)]);
        let r = check_live(&n).unwrap();
        assert_eq!(r.triple_disjoint, Some(TripleViolation { event: "x".into(), components: [0, 1, 2] }));
    }

    #[test]
    fn vocabulary_abstraction_and_graph() {
        // A does a then b, B does b then c; only b is shared.
        let a = ProcessTerm::prefix(Expr::event(0), ProcessTerm::prefix(Expr::event(1), ProcessTerm::call("A", vec![])));
        let b = ProcessTerm::prefix(Expr::event(1), ProcessTerm::prefix(Expr::event(2), ProcessTerm::call("B", vec![])));
        let n = net(
            &["a", "b", "c"],
            vec![
                ("A", &[0, 1], ProcessTerm::call("A", vec![])),
                ("B", &[1, 2], ProcessTerm::call("B", vec![])),
                ("L", &[], ProcessTerm::Stop),
            ],
            vec![("A", a), ("B", b)],
        );
        assert_eq!(n.voc, EventSet::singleton(1));
        let g = n.comm_graph();
        assert_eq!(g.edges.len(), 1);
        assert!(g.has_edge(1, 0));
        let abs = n.abs(0).unwrap();
        assert_eq!(abs.visible_events(), EventSet::singleton(1));
        assert!(!diverges(&abs));
    }

    #[test]
    fn alphabet_violation_reported() {
        let n = net(&["a", "b"], vec![("P", &[0], ProcessTerm::prefix(Expr::event(1), ProcessTerm::Stop))], vec![]);
        assert!(matches!(n.compiled(0), Err(NetworkError::AlphabetViolation { .. })));
    }
}
