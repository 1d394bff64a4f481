//! Resource allocation: users acquire resources in a fixed global order and
//! release them before starting over.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    alpha_mismatch, call, chain, ext, partition_witness, pre, respects_order, Obligation, PatternError, PredicateResult, Role, Scope,
    SpecBuilder,
};
use crate::term::{DefEnv, EventId, EventSet, ProcessTerm};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaConnection {
    pub user: usize,
    pub resource: usize,
    pub acquire: EventId,
    pub release: EventId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaDescriptor {
    pub users: Vec<usize>,
    pub resources: Vec<usize>,
    pub connections: Vec<RaConnection>,
    /// Acquisition sequence per user.
    pub order: BTreeMap<usize, Vec<usize>>,
    /// Resources from greatest to least.
    pub ra_order: Vec<usize>,
}

impl RaDescriptor {
    pub fn connection(&self, user: usize, resource: usize) -> Option<&RaConnection> {
        self.connections.iter().find(|c| c.user == user && c.resource == resource)
    }

    pub fn users_of(&self, resource: usize) -> Vec<usize> {
        self.connections.iter().filter(|c| c.resource == resource).map(|c| c.user).collect()
    }

    pub fn resources_of(&self, user: usize) -> Vec<usize> {
        self.connections.iter().filter(|c| c.user == user).map(|c| c.resource).collect()
    }

    fn sequence(&self, user: usize) -> Result<&[usize], PatternError> {
        self.order.get(&user).map(Vec::as_slice).ok_or(PatternError::Undefined { what: "order", pair: format!("user {user}") })
    }

    fn events(&self, user: usize, seq: &[usize]) -> Result<(Vec<EventId>, Vec<EventId>), PatternError> {
        let mut acq = Vec::with_capacity(seq.len());
        let mut rel = Vec::with_capacity(seq.len());
        for &r in seq {
            let c = self.connection(user, r).ok_or(PatternError::Undefined { what: "acquire", pair: format!("({user}, {r})") })?;
            acq.push(c.acquire);
            rel.push(c.release);
        }
        Ok((acq, rel))
    }
}

pub(crate) fn structural(d: &RaDescriptor, scope: &Scope) -> Vec<PredicateResult> {
    let net = scope.net;
    let mut partitioned = partition_witness(scope, &d.users, &d.resources);
    if partitioned.is_none() {
        partitioned = d
            .connections
            .iter()
            .find(|c| !d.users.contains(&c.user) || !d.resources.contains(&c.resource))
            .map(|c| format!("connection {} to {} crosses roles", scope.name(c.user), scope.name(c.resource)));
    }
    let acquires: EventSet = d.connections.iter().map(|c| c.acquire).collect();
    let disjoint = d
        .connections
        .iter()
        .find(|c| acquires.contains(c.release))
        .map(|c| format!("{} both acquires and releases", net.event_name(c.release)));
    let users = d.users.iter().find_map(|&u| {
        let expected: EventSet = d.connections.iter().filter(|c| c.user == u).flat_map(|c| [c.acquire, c.release]).collect();
        alpha_mismatch(scope, u, &expected)
    });
    let resources = d.resources.iter().find_map(|&r| {
        let expected: EventSet = d.connections.iter().filter(|c| c.resource == r).flat_map(|c| [c.acquire, c.release]).collect();
        alpha_mismatch(scope, r, &expected)
    });
    vec![
        PredicateResult::check("partitioned", partitioned),
        PredicateResult::check("mutually_disjoint_events", disjoint),
        PredicateResult::check("controlled_alpha_users", users),
        PredicateResult::check("controlled_alpha_resources", resources),
    ]
}

/// `Acquire(s); Release(s); User(s)` with `s = order(i)`.
pub(crate) fn user_spec(d: &RaDescriptor, scope: &Scope, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let (acq, rel) = d.events(i, d.sequence(i)?)?;
    let mut b = SpecBuilder::new(scope.net);
    let user = b.fresh("User");
    b.define(&user, ProcessTerm::seq(ProcessTerm::seq(chain(&acq), chain(&rel)), call(&user)));
    Ok(b.finish(call(&user)))
}

/// `[] j : users(i) @ acquire(j,i) -> release(j,i) -> ResourceSpec(i)`
pub(crate) fn resource_spec(d: &RaDescriptor, scope: &Scope, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let mut b = SpecBuilder::new(scope.net);
    let res = b.fresh("Resource");
    let branches = d.connections.iter().filter(|c| c.resource == i).map(|c| pre(c.acquire, pre(c.release, call(&res)))).collect();
    b.define(&res, ext(branches));
    Ok(b.finish(call(&res)))
}

pub(crate) fn obligations(d: &RaDescriptor, scope: &Scope) -> Result<(Vec<Obligation>, Vec<PredicateResult>), PatternError> {
    let mut obs = Vec::new();
    let mut conds = Vec::new();
    for &u in &d.users {
        obs.push(Obligation { component: u, role: Role::User, spec: user_spec(d, scope, u)? });
        let seq = d.sequence(u)?;
        let name = format!("respects_order({})", scope.name(u));
        let names = |s: &[usize]| s.iter().map(|&r| scope.name(r).to_string()).collect::<Vec<_>>().join(", ");
        let witness = match respects_order(seq, &d.ra_order) {
            Ok(true) => None,
            Ok(false) => Some(format!("acquires <{}> against the order <{}>", names(seq), names(&d.ra_order))),
            Err(_) => Some(format!("<{}> uses a resource the order does not rank", names(seq))),
        };
        conds.push(PredicateResult::check(name, witness));
    }
    for &r in &d.resources {
        obs.push(Obligation { component: r, role: Role::Resource, spec: resource_spec(d, scope, r)? });
    }
    Ok((obs, conds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Component, Network};
    use crate::patterns::{check_pattern, check_structural, PatternDescriptor};
    use crate::term::Symbols;
    use std::sync::Arc;

    /// One user taking two resources; `a0 r0 a1 r1` are acquire/release events.
    fn tiny(user_body: ProcessTerm) -> (Network, RaDescriptor) {
        let mut env = DefEnv::new(Symbols::plain(&["a0", "r0", "a1", "r1", "think"]));
        env.define("U", &[], user_body);
        env.define("R0", &[], pre(0, pre(1, call("R0"))));
        env.define("R1", &[], pre(2, pre(3, call("R1"))));
        let set = |v: &[u32]| v.iter().copied().collect::<EventSet>();
        let net = Network::new(
            Arc::new(env),
            vec![
                Component::new("U", set(&[0, 1, 2, 3, 4]), call("U")),
                Component::new("R0", set(&[0, 1]), call("R0")),
                Component::new("R1", set(&[2, 3]), call("R1")),
            ],
        );
        let d = RaDescriptor {
            users: vec![0],
            resources: vec![1, 2],
            connections: vec![
                RaConnection { user: 0, resource: 1, acquire: 0, release: 1 },
                RaConnection { user: 0, resource: 2, acquire: 2, release: 3 },
            ],
            order: [(0, vec![2, 1])].into_iter().collect(),
            ra_order: vec![2, 1],
        };
        (net, d)
    }

    fn well_behaved() -> ProcessTerm {
        pre(4, pre(2, pre(0, pre(3, pre(1, call("U"))))))
    }

    #[test]
    fn compliant_user_is_adherent() {
        let (net, d) = tiny(well_behaved());
        let v = check_pattern(&PatternDescriptor::ResourceAllocation(d), &Scope::whole(&net)).unwrap();
        assert!(v.adherent, "{:?}", v.failures());
        assert_eq!(v.behavioural.len(), 3);
    }

    #[test]
    fn resource_spec_offers_every_user() {
        let (net, mut d) = tiny(well_behaved());
        d.connections.push(RaConnection { user: 0, resource: 1, acquire: 4, release: 1 });
        let (env, t) = resource_spec(&d, &Scope::whole(&net), 1).unwrap();
        let l = crate::term::compile(&env, &t, 100).unwrap();
        assert_eq!(l.out(l.initial).len(), 2);
    }

    #[test]
    fn shared_acquire_and_release_is_reported() {
        let (net, mut d) = tiny(well_behaved());
        d.connections[1].release = 0;
        let r = check_structural(&PatternDescriptor::ResourceAllocation(d), &Scope::whole(&net)).unwrap();
        assert!(!r[1].pass);
        assert_eq!(r[1].witness.as_deref(), Some("a0 both acquires and releases"));
    }

    #[test]
    fn double_role_breaks_partition() {
        let (net, mut d) = tiny(well_behaved());
        d.resources.push(0);
        let r = check_structural(&PatternDescriptor::ResourceAllocation(d), &Scope::whole(&net)).unwrap();
        assert!(!r[0].pass);
        assert_eq!(r[0].witness.as_deref(), Some("U has both roles"));
    }

    #[test]
    fn wrong_order_fails_condition_only() {
        let (net, mut d) = tiny(pre(0, pre(2, pre(1, pre(3, call("U"))))));
        d.order.insert(0, vec![1, 2]);
        let v = check_pattern(&PatternDescriptor::ResourceAllocation(d), &Scope::whole(&net)).unwrap();
        assert!(v.behavioural.iter().all(|b| b.is_ok()));
        assert!(!v.conditions[0].pass);
        assert!(!v.adherent);
    }

    #[test]
    fn releasing_out_of_order_is_a_counterexample() {
        let (net, d) = tiny(pre(2, pre(0, pre(1, pre(3, call("U"))))));
        let v = check_pattern(&PatternDescriptor::ResourceAllocation(d), &Scope::whole(&net)).unwrap();
        let user = &v.behavioural[0];
        assert!(!user.is_ok());
        assert!(!v.adherent);
    }
}
