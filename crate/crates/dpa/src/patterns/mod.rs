//! Second phase of the analysis: adherence of an essential subnetwork to a
//! behavioural pattern.
//!
//! Each pattern has a descriptor naming the roles components play and the
//! events that carry them, structural predicates decided on alphabets alone,
//! and per-component specifications checked by refinement against the
//! abstracted component. A subnetwork that passes everything is deadlock free.

pub mod ad;
pub mod cs;
pub mod ra;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::network::{Network, NetworkError};
use crate::par::par_map;
use crate::semantics::{normalize_with_limit, refines_with_limit, Counterexample, Model, NormalError, Outcome, RefineError};
use crate::term::{compile, hide_lts, CompileError, DefEnv, EventId, EventSet, Expr, Lts, ProcessTerm};

pub use ad::{AdDescriptor, AdLink};
pub use cs::{CsConnection, CsDescriptor};
pub use ra::{RaConnection, RaDescriptor};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("descriptor refers to component {0} outside the subnetwork")]
    UnknownComponent(usize),
    #[error("`{0}` is not ranked by the order")]
    UnknownElement(String),
    #[error("no {what} defined for {pair}")]
    Undefined { what: &'static str, pair: String },
    #[error("structural predicates failed: {0}")]
    StructuralFailure(String),
    #[error("specification for `{component}`: {source}")]
    Spec { component: String, source: CompileError },
    #[error("specification for `{component}`: {source}")]
    Normal { component: String, source: NormalError },
    #[error(transparent)]
    Refine(#[from] RefineError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum PatternDescriptor {
    ResourceAllocation(RaDescriptor),
    ClientServer(CsDescriptor),
    AsyncDynamic(AdDescriptor),
}

impl PatternDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            PatternDescriptor::ResourceAllocation(_) => "resource-allocation",
            PatternDescriptor::ClientServer(_) => "client-server",
            PatternDescriptor::AsyncDynamic(_) => "async-dynamic",
        }
    }

    /// Every component the descriptor assigns a role to, sorted.
    pub fn components(&self) -> Vec<usize> {
        let mut v = match self {
            PatternDescriptor::ResourceAllocation(d) => d.users.iter().chain(&d.resources).copied().collect(),
            PatternDescriptor::ClientServer(d) => d.components(),
            PatternDescriptor::AsyncDynamic(d) => {
                let mut v = d.participants();
                v.extend(d.transport_entities());
                v
            }
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Component roles with a generated specification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    User,
    Resource,
    ServerRequests,
    RequestsResponses,
    Transport,
    Participant,
}

impl Role {
    pub fn spec_name(self) -> &'static str {
        match self {
            Role::User => "UserSpec",
            Role::Resource => "ResourceSpec",
            Role::ServerRequests => "ServerRequestsSpec",
            Role::RequestsResponses => "RequestsResponsesSpec",
            Role::Transport => "TransportSpec",
            Role::Participant => "ParticipantSpec",
        }
    }

    /// The semantic model the check for this role is carried out in.
    pub fn model(self) -> Model {
        match self {
            Role::ServerRequests => Model::Revivals,
            _ => Model::Failures,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateResult {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

impl PredicateResult {
    pub(crate) fn check(name: impl Into<String>, witness: Option<String>) -> Self {
        PredicateResult { name: name.into(), pass: witness.is_none(), witness }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BehaviourOutcome {
    Ok,
    Counterexample {
        trace: Vec<String>,
        description: String,
        #[serde(skip)]
        raw: Option<Counterexample>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviourResult {
    pub component: String,
    pub spec: String,
    pub model: Model,
    pub outcome: BehaviourOutcome,
    pub spec_states: usize,
    pub impl_states: usize,
}

impl BehaviourResult {
    pub fn is_ok(&self) -> bool {
        self.outcome == BehaviourOutcome::Ok
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternVerdict {
    pub pattern: String,
    pub structural: Vec<PredicateResult>,
    pub behavioural: Vec<BehaviourResult>,
    /// Order and schedule conditions that accompany the refinements.
    pub conditions: Vec<PredicateResult>,
    pub adherent: bool,
    #[serde(with = "crate::duration_ms")]
    pub structural_time: Duration,
    #[serde(with = "crate::duration_ms")]
    pub behavioural_time: Duration,
}

impl PatternVerdict {
    /// One line per failed obligation.
    pub fn failures(&self) -> Vec<String> {
        let mut v = Vec::new();
        for p in self.structural.iter().chain(&self.conditions).filter(|p| !p.pass) {
            match &p.witness {
                Some(w) => v.push(format!("{} fails: {w}", p.name)),
                None => v.push(format!("{} fails", p.name)),
            }
        }
        for b in &self.behavioural {
            if let BehaviourOutcome::Counterexample { trace, description, .. } = &b.outcome {
                v.push(format!("{} fails: {description} after <{}>", b.spec, trace.join(", ")));
            }
        }
        v
    }
}

/// Sub-network view used by every pattern: the scope and its own vocabulary.
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    pub net: &'a Network,
    pub members: Vec<usize>,
    /// Events shared by at least two members.
    pub voc: EventSet,
}

impl<'a> Scope<'a> {
    pub fn new(net: &'a Network, members: &[usize]) -> Result<Self, PatternError> {
        let mut members = members.to_vec();
        members.sort_unstable();
        members.dedup();
        for &m in &members {
            net.component(m)?;
        }
        let mut voc = EventSet::new();
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                voc = voc.union(&net.components[a].alphabet.intersection(&net.components[b].alphabet));
            }
        }
        Ok(Scope { net, members, voc })
    }

    pub fn whole(net: &'a Network) -> Self {
        Scope { net, members: (0..net.len()).collect(), voc: net.voc.clone() }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    /// `A_i ∩ Voc` within the scope.
    pub fn controlled(&self, i: usize) -> EventSet {
        self.net.components[i].alphabet.intersection(&self.voc)
    }

    /// The component with every event outside the scope's vocabulary hidden.
    pub fn abs(&self, i: usize) -> Result<Lts, NetworkError> {
        let l = self.net.compiled(i)?;
        Ok(hide_lts(&l, &self.net.sigma.difference(&self.voc)))
    }

    pub fn name(&self, i: usize) -> &str {
        self.net.name(i)
    }

    pub fn require(&self, i: usize) -> Result<(), PatternError> {
        if self.contains(i) {
            Ok(())
        } else {
            Err(PatternError::UnknownComponent(i))
        }
    }
}

/// Compare `A_i ∩ Voc` against the expected controlled events.
pub(crate) fn alpha_mismatch(scope: &Scope, i: usize, expected: &EventSet) -> Option<String> {
    let actual = scope.controlled(i);
    if actual == *expected {
        return None;
    }
    let extra = actual.difference(expected);
    let missing = expected.difference(&actual);
    let mut parts = Vec::new();
    if !extra.is_empty() {
        parts.push(format!("uncontrolled {}", scope.net.fmt_events(&extra)));
    }
    if !missing.is_empty() {
        parts.push(format!("missing {}", scope.net.fmt_events(&missing)));
    }
    Some(format!("{}: {}", scope.name(i), parts.join(", ")))
}

/// Partition check shared by the resource-allocation and async-dynamic patterns.
pub(crate) fn partition_witness(scope: &Scope, left: &[usize], right: &[usize]) -> Option<String> {
    if let Some(&x) = left.iter().find(|x| right.contains(x)) {
        return Some(format!("{} has both roles", scope.name(x)));
    }
    if let Some(&x) = scope.members.iter().find(|x| !left.contains(x) && !right.contains(x)) {
        return Some(format!("{} has no role", scope.name(x)));
    }
    None
}

/// Strictly descending under `order`, which lists elements greatest first.
pub fn respects_order<T: PartialEq + std::fmt::Debug>(seq: &[T], order: &[T]) -> Result<bool, PatternError> {
    let rank = |x: &T| order.iter().position(|y| y == x).ok_or_else(|| PatternError::UnknownElement(format!("{x:?}")));
    for w in seq.windows(2) {
        if rank(&w[0])? >= rank(&w[1])? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Specification terms built in an extension of the network's environment.
pub(crate) struct SpecBuilder {
    pub env: DefEnv,
}

impl SpecBuilder {
    pub fn new(net: &Network) -> Self {
        SpecBuilder { env: (*net.env).clone() }
    }

    /// Reserve a fresh definition name; the body must be supplied with `define`
    /// before the next call.
    pub fn fresh(&mut self, stem: &str) -> String {
        let n = self.env.fresh_name(stem);
        // placeholder so later fresh names differ
        self.env.define(&n, &[], ProcessTerm::Stop);
        n
    }

    pub fn define(&mut self, name: &str, body: ProcessTerm) {
        self.env.define(name, &[], body);
    }

    pub fn finish(self, top: ProcessTerm) -> (DefEnv, ProcessTerm) {
        (self.env, top)
    }
}

pub(crate) fn pre(e: EventId, k: ProcessTerm) -> ProcessTerm {
    ProcessTerm::prefix(Expr::event(e), k)
}

pub(crate) fn call(n: &str) -> ProcessTerm {
    ProcessTerm::call(n, vec![])
}

/// Binary-style choice over a list that may hold a single branch.
pub(crate) fn ext(mut v: Vec<ProcessTerm>) -> ProcessTerm {
    match v.len() {
        0 => ProcessTerm::Stop,
        1 => v.pop().unwrap(),
        _ => ProcessTerm::ExtChoice(v),
    }
}

pub(crate) fn int(mut v: Vec<ProcessTerm>) -> ProcessTerm {
    assert!(!v.is_empty(), "internal choice over nothing");
    if v.len() == 1 {
        v.pop().unwrap()
    } else {
        ProcessTerm::IntChoice(v)
    }
}

/// `e1 -> e2 -> ... -> SKIP`
pub(crate) fn chain(events: &[EventId]) -> ProcessTerm {
    events.iter().rev().fold(ProcessTerm::Skip, |k, &e| pre(e, k))
}

/// `[] ev : evs @ ev -> P`, spelled out.
pub(crate) fn run(evs: &EventSet, name: &str) -> ProcessTerm {
    ext(evs.iter().map(|e| pre(e, call(name))).collect())
}

/// A pending behavioural obligation.
pub(crate) struct Obligation {
    pub component: usize,
    pub role: Role,
    pub spec: (DefEnv, ProcessTerm),
}

pub(crate) fn discharge(scope: &Scope, obligations: Vec<Obligation>) -> Result<Vec<BehaviourResult>, PatternError> {
    let limit = scope.net.state_limit;
    let results = par_map(&obligations, |o| -> Result<BehaviourResult, PatternError> {
        let component = scope.name(o.component).to_string();
        let (env, term) = &o.spec;
        let spec_lts = compile(env, term, limit).map_err(|source| PatternError::Spec { component: component.clone(), source })?;
        let spec =
            normalize_with_limit(&spec_lts, limit).map_err(|source| PatternError::Normal { component: component.clone(), source })?;
        let imp = scope.abs(o.component)?;
        let model = o.role.model();
        let outcome = match refines_with_limit(&spec, &imp, model, limit)? {
            Outcome::Holds => BehaviourOutcome::Ok,
            Outcome::Violated(c) => BehaviourOutcome::Counterexample {
                trace: scope.net.render_trace(&c.trace),
                description: scope.net.describe_violation(&c),
                raw: Some(c),
            },
        };
        Ok(BehaviourResult {
            component,
            spec: format!("{}({})", o.role.spec_name(), scope.name(o.component)),
            model,
            outcome,
            spec_states: spec.len(),
            impl_states: imp.len(),
        })
    });
    results.into_iter().collect()
}

/// Structural predicates of the descriptor's pattern over `scope`.
pub fn check_structural(desc: &PatternDescriptor, scope: &Scope) -> Result<Vec<PredicateResult>, PatternError> {
    for c in desc.components() {
        scope.require(c)?;
    }
    Ok(match desc {
        PatternDescriptor::ResourceAllocation(d) => ra::structural(d, scope),
        PatternDescriptor::ClientServer(d) => cs::structural(d, scope),
        PatternDescriptor::AsyncDynamic(d) => ad::structural(d, scope),
    })
}

/// The specification a component in `role` must refine to, as a closed term.
pub fn generate_spec(desc: &PatternDescriptor, scope: &Scope, role: Role, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    scope.require(i)?;
    match (desc, role) {
        (PatternDescriptor::ResourceAllocation(d), Role::User) => ra::user_spec(d, scope, i),
        (PatternDescriptor::ResourceAllocation(d), Role::Resource) => ra::resource_spec(d, scope, i),
        (PatternDescriptor::ClientServer(d), Role::ServerRequests) => cs::server_requests_spec(d, scope, i),
        (PatternDescriptor::ClientServer(d), Role::RequestsResponses) => cs::requests_responses_spec(d, scope, i),
        (PatternDescriptor::AsyncDynamic(d), Role::Transport) => ad::transport_spec(d, scope, i),
        (PatternDescriptor::AsyncDynamic(d), Role::Participant) => ad::participant_spec(d, scope, i),
        _ => Err(PatternError::Undefined { what: "role", pair: format!("{role:?} in {}", desc.name()) }),
    }
}

/// Refinement obligations and side conditions. Structural predicates must hold.
pub fn check_behavioural(desc: &PatternDescriptor, scope: &Scope) -> Result<(Vec<BehaviourResult>, Vec<PredicateResult>), PatternError> {
    let structural = check_structural(desc, scope)?;
    let failed: Vec<&str> = structural.iter().filter(|p| !p.pass).map(|p| p.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(PatternError::StructuralFailure(failed.join(", ")));
    }
    let (obligations, conditions) = match desc {
        PatternDescriptor::ResourceAllocation(d) => ra::obligations(d, scope)?,
        PatternDescriptor::ClientServer(d) => cs::obligations(d, scope)?,
        PatternDescriptor::AsyncDynamic(d) => ad::obligations(d, scope)?,
    };
    Ok((discharge(scope, obligations)?, conditions))
}

/// Run every check of the pattern and aggregate into a verdict.
pub fn check_pattern(desc: &PatternDescriptor, scope: &Scope) -> Result<PatternVerdict, PatternError> {
    let t0 = Instant::now();
    let structural = check_structural(desc, scope)?;
    let structural_time = t0.elapsed();
    let t1 = Instant::now();
    let (behavioural, conditions) =
        if structural.iter().all(|p| p.pass) { check_behavioural(desc, scope)? } else { (Vec::new(), Vec::new()) };
    let behavioural_time = t1.elapsed();
    let adherent = structural.iter().all(|p| p.pass) && conditions.iter().all(|p| p.pass) && behavioural.iter().all(BehaviourResult::is_ok);
    log::info!("{} over {} components: adherent = {adherent}", desc.name(), scope.members.len());
    Ok(PatternVerdict {
        pattern: desc.name().to_string(),
        structural,
        behavioural,
        conditions,
        adherent,
        structural_time,
        behavioural_time,
    })
}
