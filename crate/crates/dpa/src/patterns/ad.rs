//! Async dynamic: participants talk through one-way transport entities that
//! buffer the last datum and notice when the sender leaves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    alpha_mismatch, call, chain, ext, int, partition_witness, pre, Obligation, PatternError, PredicateResult, Role, Scope, SpecBuilder,
};
use crate::term::{DefEnv, EventId, EventSet, ProcessTerm};

/// One connection `(sender, receiver)` and the transport entity serving it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdLink {
    pub sender: usize,
    pub receiver: usize,
    pub entity: usize,
    /// Indexed by datum; `send[d]` and `receive[d]` carry the same value.
    pub send: Vec<EventId>,
    pub receive: Vec<EventId>,
    pub on: EventId,
    pub off: EventId,
    pub timeout: EventId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdDescriptor {
    pub links: Vec<AdLink>,
    /// Order in which each participant visits its peers.
    pub schedule: BTreeMap<usize, Vec<usize>>,
}

impl AdDescriptor {
    pub fn participants(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.links.iter().flat_map(|l| [l.sender, l.receiver]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn transport_entities(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.links.iter().map(|l| l.entity).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn link_of(&self, entity: usize) -> Option<&AdLink> {
        self.links.iter().find(|l| l.entity == entity)
    }

    fn schedule_of(&self, i: usize) -> Result<&[usize], PatternError> {
        self.schedule.get(&i).map(Vec::as_slice).ok_or(PatternError::Undefined { what: "schedule", pair: format!("participant {i}") })
    }

    /// Links with `i` as sender (or receiver), in schedule order of the peer.
    fn scheduled(&self, i: usize, outgoing: bool) -> Result<Vec<&AdLink>, PatternError> {
        let s = self.schedule_of(i)?;
        Ok(s.iter()
            .filter_map(|&p| {
                self.links.iter().find(|l| if outgoing { l.sender == i && l.receiver == p } else { l.receiver == i && l.sender == p })
            })
            .collect())
    }
}

pub(crate) fn structural(d: &AdDescriptor, scope: &Scope) -> Vec<PredicateResult> {
    let net = scope.net;
    let participants = d.participants();
    let entities = d.transport_entities();
    let partitioned = partition_witness(scope, &participants, &entities);
    let unique = d.links.iter().enumerate().find_map(|(k, l)| {
        d.links[k + 1..]
            .iter()
            .find(|m| m.entity == l.entity || (m.sender, m.receiver) == (l.sender, l.receiver))
            .map(|_| format!("{} serves more than one connection", scope.name(l.entity)))
    });
    let family = |f: &dyn Fn(&AdLink) -> Vec<EventId>| d.links.iter().flat_map(f).collect::<EventSet>();
    let families = [
        ("send", family(&|l| l.send.clone())),
        ("receive", family(&|l| l.receive.clone())),
        ("on", family(&|l| vec![l.on])),
        ("off", family(&|l| vec![l.off])),
        ("timeout", family(&|l| vec![l.timeout])),
    ];
    let mut disjoint = None;
    'outer: for (a, (na, xa)) in families.iter().enumerate() {
        for (nb, xb) in &families[a + 1..] {
            let both = xa.intersection(xb);
            if !both.is_empty() {
                disjoint = Some(format!("{} used for {na} and {nb}", net.fmt_events(&both)));
                break 'outer;
            }
        }
    }
    let alpha_p = participants.iter().find_map(|&i| {
        let mut expected = EventSet::new();
        for l in &d.links {
            if l.sender == i {
                expected = expected.union(&l.send.iter().copied().collect());
                expected.insert(l.on);
                expected.insert(l.off);
            }
            if l.receiver == i {
                expected = expected.union(&l.receive.iter().copied().collect());
                // the receiver is the one told that its peer has gone
                expected.insert(l.timeout);
            }
        }
        alpha_mismatch(scope, i, &expected)
    });
    let alpha_t = d.links.iter().find_map(|l| {
        let mut expected: EventSet = l.send.iter().chain(&l.receive).copied().collect();
        for e in [l.on, l.off, l.timeout] {
            expected.insert(e);
        }
        alpha_mismatch(scope, l.entity, &expected)
    });
    vec![
        PredicateResult::check("partitioned", partitioned),
        PredicateResult::check("unique_links", unique),
        PredicateResult::check("mutually_disjoint_events", disjoint),
        PredicateResult::check("controlled_alpha_participant", alpha_p),
        PredicateResult::check("controlled_alpha_transport_entity", alpha_t),
    ]
}

/// The overwritable one-place buffer with presence detection.
pub(crate) fn transport_spec(d: &AdDescriptor, scope: &Scope, k: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let l = d.link_of(k).ok_or(PatternError::Undefined { what: "link", pair: format!("entity {k}") })?;
    if l.send.is_empty() || l.send.len() != l.receive.len() {
        return Err(PatternError::Undefined { what: "matching send/receive data", pair: format!("entity {k}") });
    }
    let mut b = SpecBuilder::new(scope.net);
    let off = b.fresh("Off");
    let on = b.fresh("On");
    let onf: Vec<String> = (0..l.send.len()).map(|_| b.fresh("OnF")).collect();
    let sends = || ext(l.send.iter().zip(&onf).map(|(&e, n)| pre(e, call(n))).collect());
    b.define(&off, ProcessTerm::ExtChoice(vec![pre(l.on, call(&on)), pre(l.timeout, call(&off))]));
    b.define(&on, ProcessTerm::ExtChoice(vec![pre(l.off, call(&off)), sends()]));
    for (dv, n) in onf.iter().enumerate() {
        b.define(n, ProcessTerm::ExtChoice(vec![pre(l.off, call(&off)), sends(), pre(l.receive[dv], call(&on))]));
    }
    Ok(b.finish(call(&off)))
}

/// `OnDetect; (SendReceive /\ (SKIP |~| STOP)); OffDetect; ParticipantSpec`
pub(crate) fn participant_spec(d: &AdDescriptor, scope: &Scope, i: usize) -> Result<(DefEnv, ProcessTerm), PatternError> {
    let out = d.scheduled(i, true)?;
    let inc = d.scheduled(i, false)?;
    if out.iter().any(|l| l.send.is_empty()) {
        return Err(PatternError::Undefined { what: "send data", pair: format!("participant {i}") });
    }
    let steps = |v: Vec<ProcessTerm>| v.into_iter().rev().fold(ProcessTerm::Skip, |k, p| ProcessTerm::seq(p, k));
    let on_detect = chain(&out.iter().map(|l| l.on).collect::<Vec<_>>());
    let off_detect = chain(&out.iter().map(|l| l.off).collect::<Vec<_>>());
    // the participant picks what to send, but must take whatever arrives
    let send = steps(out.iter().map(|l| int(l.send.iter().map(|&e| pre(e, ProcessTerm::Skip)).collect())).collect());
    let receive = steps(
        inc.iter()
            .map(|l| {
                let mut alts: Vec<ProcessTerm> = l.receive.iter().map(|&e| pre(e, ProcessTerm::Skip)).collect();
                alts.push(pre(l.timeout, ProcessTerm::Skip));
                ext(alts)
            })
            .collect(),
    );
    let mut b = SpecBuilder::new(scope.net);
    let sr = b.fresh("SendReceive");
    b.define(&sr, ProcessTerm::seq(send, ProcessTerm::seq(receive, call(&sr))));
    let ps = b.fresh("Participant");
    let leave = ProcessTerm::IntChoice(vec![ProcessTerm::Skip, ProcessTerm::Stop]);
    b.define(
        &ps,
        ProcessTerm::seq(on_detect, ProcessTerm::seq(ProcessTerm::interrupt(call(&sr), leave), ProcessTerm::seq(off_detect, call(&ps)))),
    );
    Ok(b.finish(call(&ps)))
}

pub(crate) fn obligations(d: &AdDescriptor, scope: &Scope) -> Result<(Vec<Obligation>, Vec<PredicateResult>), PatternError> {
    let mut obs = Vec::new();
    let mut conds = Vec::new();
    for k in d.transport_entities() {
        obs.push(Obligation { component: k, role: Role::Transport, spec: transport_spec(d, scope, k)? });
    }
    for i in d.participants() {
        obs.push(Obligation { component: i, role: Role::Participant, spec: participant_spec(d, scope, i)? });
        let s = d.schedule_of(i)?;
        let dup = s.iter().enumerate().find(|(k, x)| s[k + 1..].contains(x)).map(|(_, &x)| format!("{} appears twice", scope.name(x)));
        conds.push(PredicateResult::check(format!("distinct_schedule({})", scope.name(i)), dup));
    }
    Ok((obs, conds))
}
