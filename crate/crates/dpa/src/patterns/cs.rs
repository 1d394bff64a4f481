//! Client/server: requests flow down a strict order on components, servers
//! offer all of their requests at once, and every request is answered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{alpha_mismatch, call, ext, int, pre, Obligation, PatternError, PredicateResult, Role, Scope, SpecBuilder};
use crate::term::{DefEnv, EventId, EventSet, ProcessTerm};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsConnection {
    pub client: usize,
    pub server: usize,
    pub requests: EventSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsDescriptor {
    pub connections: Vec<CsConnection>,
    /// Expected responses per request event; absent means none.
    pub responses: BTreeMap<EventId, EventSet>,
    /// Components from greatest to least.
    pub cs_order: Vec<usize>,
}

impl CsDescriptor {
    pub fn components(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.connections.iter().flat_map(|c| [c.client, c.server]).chain(self.cs_order.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn responses_to(&self, k: EventId) -> EventSet {
        self.responses.get(&k).cloned().unwrap_or_default()
    }

    pub fn client_request(&self, i: usize) -> EventSet {
        self.connections.iter().filter(|c| c.client == i).fold(EventSet::new(), |a, c| a.union(&c.requests))
    }

    pub fn server_request(&self, i: usize) -> EventSet {
        self.connections.iter().filter(|c| c.server == i).fold(EventSet::new(), |a, c| a.union(&c.requests))
    }

    fn responses_of(&self, reqs: &EventSet) -> EventSet {
        reqs.iter().fold(EventSet::new(), |a, k| a.union(&self.responses_to(k)))
    }

    pub fn client_response(&self, i: usize) -> EventSet {
        self.responses_of(&self.client_request(i))
    }

    pub fn server_response(&self, i: usize) -> EventSet {
        self.responses_of(&self.server_request(i))
    }
}

pub(crate) fn structural(d: &CsDescriptor, scope: &Scope) -> Vec<PredicateResult> {
    let net = scope.net;
    let requests = d.connections.iter().fold(EventSet::new(), |a, c| a.union(&c.requests));
    let responses = d.responses_of(&requests);
    let clash = requests.intersection(&responses);
    let disjoint = (!clash.is_empty()).then(|| format!("{} both request and respond", net.fmt_events(&clash)));
    let alpha = scope.members.iter().find_map(|&i| {
        let expected = d.server_request(i).union(&d.client_request(i)).union(&d.server_response(i)).union(&d.client_response(i));
        alpha_mismatch(scope, i, &expected)
    });
    let rank = |x: usize| d.cs_order.iter().position(|&y| y == x);
    let ordered = d.connections.iter().find_map(|c| match (rank(c.client), rank(c.server)) {
        (Some(a), Some(b)) if a < b => None,
        (Some(_), Some(_)) => Some(format!("{} is a client of {} but not above it", scope.name(c.client), scope.name(c.server))),
        (None, _) => Some(format!("{} is not ranked", scope.name(c.client))),
        (_, None) => Some(format!("{} is not ranked", scope.name(c.server))),
    });
    vec![
        PredicateResult::check("disjoint_events", disjoint),
        PredicateResult::check("controlled_alpha", alpha),
        PredicateResult::check("ordered", ordered),
    ]
}

/// Either all server requests are offered or an internal choice of another event.
pub(crate) fn server_requests_spec(d: &CsDescriptor, scope: &Scope, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let s_evts = d.server_request(i);
    let other = scope.controlled(i).difference(&s_evts);
    let mut b = SpecBuilder::new(scope.net);
    let top = if other.is_empty() {
        let run = b.fresh("RUN");
        b.define(&run, super::run(&s_evts, &run));
        run
    } else {
        let server = b.fresh("Server");
        let internal = int(other.iter().map(|e| pre(e, ProcessTerm::Skip)).collect());
        let offers = ext(s_evts.iter().map(|e| pre(e, ProcessTerm::Skip)).collect());
        b.define(&server, ProcessTerm::seq(ProcessTerm::IntChoice(vec![internal, offers]), call(&server)));
        server
    };
    Ok(b.finish(call(&top)))
}

pub(crate) fn requests_responses_spec(d: &CsDescriptor, scope: &Scope, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let c_evts = d.client_request(i);
    let s_evts = d.server_request(i);
    let answer = |ev: EventId, choose: fn(Vec<ProcessTerm>) -> ProcessTerm| {
        let res = d.responses_to(ev);
        if res.is_empty() {
            ProcessTerm::Skip
        } else {
            choose(res.iter().map(|r| pre(r, ProcessTerm::Skip)).collect())
        }
    };
    // the client waits for any response, the server picks one
    let client = || int(c_evts.iter().map(|ev| pre(ev, answer(ev, ext))).collect());
    let server = || int(s_evts.iter().map(|ev| pre(ev, answer(ev, int))).collect());
    let mut b = SpecBuilder::new(scope.net);
    let body = match (c_evts.is_empty(), s_evts.is_empty()) {
        (true, true) => {
            log::warn!("{} neither requests nor serves; its specification is STOP", scope.name(i));
            return Ok(b.finish(ProcessTerm::Stop));
        }
        (true, false) => server(),
        (false, true) => client(),
        (false, false) => ProcessTerm::IntChoice(vec![client(), server()]),
    };
    let n = b.fresh("CS");
    b.define(&n, ProcessTerm::seq(body, call(&n)));
    Ok(b.finish(call(&n)))
}

pub(crate) fn obligations(d: &CsDescriptor, scope: &Scope) -> Result<(Vec<Obligation>, Vec<PredicateResult>), PatternError> {
    let mut obs = Vec::new();
    for &i in &scope.members {
        obs.push(Obligation { component: i, role: Role::ServerRequests, spec: server_requests_spec(d, scope, i)? });
        obs.push(Obligation { component: i, role: Role::RequestsResponses, spec: requests_responses_spec(d, scope, i)? });
    }
    Ok((obs, Vec::new()))
}
