//! `.pattern.json` descriptors.
//!
//! Components are named as in the model (`Phil.0`); a trailing `.*` matches
//! every component with that prefix, in network order. Events are dotted
//! names (`pickup.0.1`); where a set is expected a channel prefix (`req.0`)
//! stands for all its completions. Any string may embed `{expr}`, evaluated
//! against the model's constants and functions. Inside these the numeric
//! suffix of the component being described is bound: `u` and `r` for users
//! and resources, `s` and `r` for senders and receivers, `d` for a datum.
//! Lists may also be given as one expression string yielding a set or
//! sequence.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{Map, Value as Json};

use super::parse_expr;
use crate::network::Network;
use crate::patterns::{AdDescriptor, AdLink, CsConnection, CsDescriptor, PatternDescriptor, RaConnection, RaDescriptor};
use crate::term::{EventId, EventSet, Value};

pub const DESCRIPTOR_VERSION: i64 = 1;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DescriptorError {
    #[error("malformed descriptor: {0}")]
    Json(String),
    #[error("unsupported descriptor version {0}")]
    Version(i64),
    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("field `{field}` should be {expected}")]
    Shape { field: String, expected: &'static str },
    #[error("no component matches `{0}`")]
    UnknownComponent(String),
    #[error("`{0}` is not an event of the model")]
    UnknownEvent(String),
    #[error("`{map}` has no entry for {key}")]
    NonTotalMap { map: &'static str, key: String },
    #[error("schedule of {participant} lists {peer} more than once")]
    DuplicateInSchedule { participant: String, peer: String },
    #[error("`{field}` lists {name} more than once")]
    Duplicate { field: &'static str, name: String },
    #[error("in `{template}`: {message}")]
    Template { template: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

type DResult<T> = Result<T, DescriptorError>;
type Locals = Vec<(String, Value)>;

pub fn parse_descriptor(doc: &str, net: &Network) -> DResult<PatternDescriptor> {
    let json: Json = serde_json::from_str(doc).map_err(|e| DescriptorError::Json(e.to_string()))?;
    let obj = json.as_object().ok_or(DescriptorError::Shape { field: "descriptor".into(), expected: "an object" })?;
    match obj.get("version") {
        None => return Err(DescriptorError::Missing("version")),
        Some(v) => match v.as_i64() {
            Some(DESCRIPTOR_VERSION) => {}
            Some(other) => return Err(DescriptorError::Version(other)),
            None => return Err(DescriptorError::Shape { field: "version".into(), expected: "an integer" }),
        },
    }
    let r = Resolver { net };
    let pattern = str_field(obj, "pattern")?;
    match pattern {
        "resource-allocation" => r.ra(obj).map(PatternDescriptor::ResourceAllocation),
        "client-server" => r.cs(obj).map(PatternDescriptor::ClientServer),
        "async-dynamic" => r.ad(obj).map(PatternDescriptor::AsyncDynamic),
        other => Err(DescriptorError::UnknownPattern(other.to_string())),
    }
}

fn field<'a>(obj: &'a Map<String, Json>, name: &'static str) -> DResult<&'a Json> {
    obj.get(name).ok_or(DescriptorError::Missing(name))
}

fn str_field<'a>(obj: &'a Map<String, Json>, name: &'static str) -> DResult<&'a str> {
    field(obj, name)?.as_str().ok_or(DescriptorError::Shape { field: name.into(), expected: "a string" })
}

fn obj_field<'a>(obj: &'a Map<String, Json>, name: &'static str) -> DResult<&'a Map<String, Json>> {
    field(obj, name)?.as_object().ok_or(DescriptorError::Shape { field: name.into(), expected: "an object" })
}

fn as_str<'a>(v: &'a Json, name: &str) -> DResult<&'a str> {
    v.as_str().ok_or(DescriptorError::Shape { field: name.into(), expected: "a string" })
}

fn dedup_ordered(v: Vec<usize>) -> Vec<usize> {
    let mut seen = std::collections::BTreeSet::new();
    v.into_iter().filter(|x| seen.insert(*x)).collect()
}

/// `Phil.3` binds 3, `T.0.1` binds the pair.
fn id_value(name: &str) -> Option<Value> {
    let ints: Option<Vec<i64>> = name.split('.').skip(1).map(|s| s.parse().ok()).collect();
    match ints?.as_slice() {
        [] => None,
        [i] => Some(Value::Int(*i)),
        vs => Some(Value::Tuple(vs.iter().map(|&i| Value::Int(i)).collect())),
    }
}

struct Resolver<'a> {
    net: &'a Network,
}

impl Resolver<'_> {
    fn locals(&self, binds: &[(&str, usize)]) -> Locals {
        binds.iter().filter_map(|(n, c)| id_value(self.net.name(*c)).map(|v| (n.to_string(), v))).collect()
    }

    fn render(&self, v: &Value) -> Option<String> {
        Some(match v {
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Event(e) => self.net.event_name(*e).to_string(),
            Value::Comp(a, i) => format!("{a}.{i}"),
            Value::Tuple(vs) => vs.iter().map(|x| self.render(x)).collect::<Option<Vec<_>>>()?.join("."),
            _ => return None,
        })
    }

    fn eval(&self, src: &str, locals: &Locals) -> DResult<Value> {
        let tmpl = |message: String| DescriptorError::Template { template: src.to_string(), message };
        let e = parse_expr(src).map_err(|ds| tmpl(ds[0].message.clone()))?;
        self.net.env.eval(&e, locals).map_err(|e| tmpl(e.to_string()))
    }

    fn interpolate(&self, s: &str, locals: &Locals) -> DResult<String> {
        let mut out = String::new();
        let mut rest = s;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let mut depth = 0;
            let mut close = None;
            for (k, c) in rest[open..].char_indices() {
                match c {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(open + k);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| DescriptorError::Template { template: s.into(), message: "unbalanced `{`".into() })?;
            let v = self.eval(&rest[open + 1..close], locals)?;
            let text = self.render(&v).ok_or_else(|| DescriptorError::Template {
                template: s.into(),
                message: format!("a {} cannot appear in a name", v.kind()),
            })?;
            out.push_str(&text);
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    fn components(&self, pat: &str, locals: &Locals) -> DResult<Vec<usize>> {
        let name = self.interpolate(pat, locals)?;
        if let Some(prefix) = name.strip_suffix('*') {
            let v: Vec<usize> = (0..self.net.len()).filter(|&i| self.net.name(i).starts_with(prefix)).collect();
            if v.is_empty() {
                return Err(DescriptorError::UnknownComponent(name));
            }
            return Ok(v);
        }
        self.net.index_of(&name).map(|i| vec![i]).ok_or(DescriptorError::UnknownComponent(name))
    }

    fn component(&self, pat: &str, locals: &Locals) -> DResult<usize> {
        let v = self.components(pat, locals)?;
        match v.as_slice() {
            [i] => Ok(*i),
            _ => Err(DescriptorError::Invalid(format!("`{pat}` must name exactly one component"))),
        }
    }

    /// A list of component patterns, or one expression yielding components.
    fn component_list(&self, v: &Json, what: &str, locals: &Locals) -> DResult<Vec<usize>> {
        let mut out = Vec::new();
        match v {
            Json::Array(items) => {
                for it in items {
                    out.extend(self.components(as_str(it, what)?, locals)?);
                }
            }
            Json::String(src) => {
                let val = self.eval(src, locals)?;
                let elems = val.elements().map_err(|e| DescriptorError::Template { template: src.clone(), message: e.to_string() })?;
                for x in elems {
                    let name = self.render(&x).ok_or_else(|| DescriptorError::Template {
                        template: src.clone(),
                        message: format!("a {} is not a component", x.kind()),
                    })?;
                    out.push(self.net.index_of(&name).ok_or(DescriptorError::UnknownComponent(name))?);
                }
            }
            _ => return Err(DescriptorError::Shape { field: what.into(), expected: "a list of components" }),
        }
        Ok(out)
    }

    fn event(&self, pat: &str, locals: &Locals) -> DResult<EventId> {
        let name = self.interpolate(pat, locals)?;
        self.net.env.symbols.lookup(&name).ok_or(DescriptorError::UnknownEvent(name))
    }

    /// An event, or a channel prefix standing for its completions.
    fn events(&self, pat: &str, locals: &Locals) -> DResult<EventSet> {
        let name = self.interpolate(pat, locals)?;
        let sy = &self.net.env.symbols;
        if let Some(e) = sy.lookup(&name) {
            return Ok(std::iter::once(e).collect());
        }
        let mut parts = name.split('.');
        let head = parts.next().unwrap_or_default();
        let prefix: Option<Vec<i64>> = parts.map(|p| p.parse().ok()).collect();
        if let (Some(ch), Some(prefix)) = (sy.channel_index(head), prefix) {
            let ext = sy.extension(ch, &prefix);
            if !ext.is_empty() {
                return Ok(ext.into_iter().collect());
            }
        }
        Err(DescriptorError::UnknownEvent(name))
    }

    fn event_set(&self, v: &Json, what: &str, locals: &Locals) -> DResult<EventSet> {
        let items = v.as_array().ok_or(DescriptorError::Shape { field: what.into(), expected: "a list of events" })?;
        let mut out = EventSet::new();
        for it in items {
            out = out.union(&self.events(as_str(it, what)?, locals)?);
        }
        Ok(out)
    }

    fn pair(&self, a: usize, b: usize) -> String {
        format!("({}, {})", self.net.name(a), self.net.name(b))
    }

    // ---- resource allocation ----

    fn ra(&self, obj: &Map<String, Json>) -> DResult<RaDescriptor> {
        let users = dedup_ordered(self.component_list(field(obj, "users")?, "users", &Vec::new())?);
        let resources = dedup_ordered(self.component_list(field(obj, "resources")?, "resources", &Vec::new())?);
        let acquire = self.ra_map(field(obj, "acquire")?, "acquire", &users, &resources, None)?;
        let pairs: Vec<(usize, usize)> = acquire.keys().copied().collect();
        let release = self.ra_map(field(obj, "release")?, "release", &users, &resources, Some(&pairs))?;
        for p in &pairs {
            if !release.contains_key(p) {
                return Err(DescriptorError::NonTotalMap { map: "release", key: self.pair(p.0, p.1) });
            }
        }
        if let Some(p) = release.keys().find(|p| !acquire.contains_key(p)) {
            return Err(DescriptorError::NonTotalMap { map: "acquire", key: self.pair(p.0, p.1) });
        }
        let connections = pairs
            .iter()
            .map(|&(u, r)| RaConnection { user: u, resource: r, acquire: acquire[&(u, r)], release: release[&(u, r)] })
            .collect();

        let orders = obj_field(obj, "order")?;
        let mut order = BTreeMap::new();
        for &u in &users {
            let name = self.net.name(u);
            let entry = orders
                .get(name)
                .or_else(|| orders.iter().find(|(k, _)| k.strip_suffix('*').is_some_and(|p| name.starts_with(p))).map(|(_, v)| v));
            let entry = entry.ok_or_else(|| DescriptorError::NonTotalMap { map: "order", key: name.to_string() })?;
            let seq = self.component_list(entry, "order", &self.locals(&[("u", u)]))?;
            for &r in &seq {
                if !acquire.contains_key(&(u, r)) {
                    return Err(DescriptorError::NonTotalMap { map: "acquire", key: self.pair(u, r) });
                }
            }
            order.insert(u, seq);
        }
        let ra_order = self.component_list(field(obj, "ra_order")?, "ra_order", &Vec::new())?;
        if let Some((k, _)) = ra_order.iter().enumerate().find(|(k, x)| ra_order[k + 1..].contains(x)) {
            return Err(DescriptorError::Duplicate { field: "ra_order", name: self.net.name(ra_order[k]).to_string() });
        }
        if let Some(&r) = resources.iter().find(|r| !ra_order.contains(r)) {
            return Err(DescriptorError::NonTotalMap { map: "ra_order", key: self.net.name(r).to_string() });
        }
        Ok(RaDescriptor { users, resources, connections, order, ra_order })
    }

    /// Either `{user: {resource: event}}` or a template over `u` and `r`.
    /// A template defines the pairs whose event both alphabets contain,
    /// unless `pairs` fixes them.
    fn ra_map(
        &self,
        v: &Json,
        what: &'static str,
        users: &[usize],
        resources: &[usize],
        pairs: Option<&[(usize, usize)]>,
    ) -> DResult<BTreeMap<(usize, usize), EventId>> {
        let mut out = BTreeMap::new();
        match v {
            Json::String(t) => {
                let candidates: Vec<(usize, usize)> = match pairs {
                    Some(p) => p.to_vec(),
                    None => users.iter().flat_map(|&u| resources.iter().map(move |&r| (u, r))).collect(),
                };
                for (u, r) in candidates {
                    let locals = self.locals(&[("u", u), ("r", r)]);
                    let ev = match self.event(t, &locals) {
                        Ok(ev) => ev,
                        Err(DescriptorError::UnknownEvent(_)) if pairs.is_none() => continue,
                        Err(e) => return Err(e),
                    };
                    let shared = self.net.components[u].alphabet.contains(ev) && self.net.components[r].alphabet.contains(ev);
                    if shared || pairs.is_some() {
                        out.insert((u, r), ev);
                    }
                }
            }
            Json::Object(m) => {
                for (uk, inner) in m {
                    let u = self.component(uk, &Vec::new())?;
                    if !users.contains(&u) {
                        return Err(DescriptorError::Invalid(format!("`{what}` names {uk}, which is not a user")));
                    }
                    let inner = inner.as_object().ok_or(DescriptorError::Shape { field: format!("{what}.{uk}"), expected: "an object" })?;
                    for (rk, ev) in inner {
                        let r = self.component(rk, &Vec::new())?;
                        if !resources.contains(&r) {
                            return Err(DescriptorError::Invalid(format!("`{what}` names {rk}, which is not a resource")));
                        }
                        let locals = self.locals(&[("u", u), ("r", r)]);
                        out.insert((u, r), self.event(as_str(ev, what)?, &locals)?);
                    }
                }
            }
            _ => return Err(DescriptorError::Shape { field: what.into(), expected: "a template string or an object" }),
        }
        Ok(out)
    }

    // ---- client/server ----

    fn cs(&self, obj: &Map<String, Json>) -> DResult<CsDescriptor> {
        let conns =
            field(obj, "connections")?.as_array().ok_or(DescriptorError::Shape { field: "connections".into(), expected: "a list" })?;
        let mut connections = Vec::new();
        for c in conns {
            let c = c.as_object().ok_or(DescriptorError::Shape { field: "connections".into(), expected: "a list of objects" })?;
            let client = self.component(str_field(c, "client")?, &Vec::new())?;
            let server = self.component(str_field(c, "server")?, &Vec::new())?;
            let locals = self.locals(&[("c", client), ("s", server)]);
            let requests = self.event_set(field(c, "requests")?, "requests", &locals)?;
            connections.push(CsConnection { client, server, requests });
        }
        let all_requests = connections.iter().fold(EventSet::new(), |a, c| a.union(&c.requests));
        let mut responses = BTreeMap::new();
        if let Some(m) = obj.get("responses") {
            let m = m.as_object().ok_or(DescriptorError::Shape { field: "responses".into(), expected: "an object" })?;
            for (k, v) in m {
                let res = self.event_set(v, "responses", &Vec::new())?;
                for req in self.events(k, &Vec::new())?.iter() {
                    if !all_requests.contains(req) {
                        return Err(DescriptorError::Invalid(format!(
                            "`responses` answers {}, which no connection requests",
                            self.net.event_name(req)
                        )));
                    }
                    responses.insert(req, res.clone());
                }
            }
        }
        let cs_order = self.component_list(field(obj, "cs_order")?, "cs_order", &Vec::new())?;
        for c in &connections {
            for x in [c.client, c.server] {
                if !cs_order.contains(&x) {
                    return Err(DescriptorError::NonTotalMap { map: "cs_order", key: self.net.name(x).to_string() });
                }
            }
        }
        Ok(CsDescriptor { connections, responses, cs_order })
    }

    // ---- async dynamic ----

    fn ad(&self, obj: &Map<String, Json>) -> DResult<AdDescriptor> {
        let data: Option<Vec<Value>> = match obj.get("data") {
            None => None,
            Some(Json::Array(xs)) => Some(
                xs.iter()
                    .map(|x| {
                        x.as_i64().map(Value::Int).ok_or(DescriptorError::Shape { field: "data".into(), expected: "a list of integers" })
                    })
                    .collect::<DResult<_>>()?,
            ),
            Some(Json::String(src)) => {
                let v = self.eval(src, &Vec::new())?;
                Some(v.elements().map_err(|e| DescriptorError::Template { template: src.clone(), message: e.to_string() })?)
            }
            Some(_) => return Err(DescriptorError::Shape { field: "data".into(), expected: "a list of integers" }),
        };
        // either a list of links, or one link template instantiated per pair
        let shape = || DescriptorError::Shape { field: "links".into(), expected: "a list of links or a template with `pairs`" };
        let mut raw: Vec<(&Map<String, Json>, Locals)> = Vec::new();
        match field(obj, "links")? {
            Json::Array(xs) => {
                for l in xs {
                    raw.push((l.as_object().ok_or_else(shape)?, Vec::new()));
                }
            }
            Json::Object(t) => {
                let src = str_field(t, "pairs")?;
                let pairs = self.eval(src, &Vec::new())?;
                let pairs = pairs.elements().map_err(|e| DescriptorError::Template { template: src.into(), message: e.to_string() })?;
                for p in pairs {
                    match p {
                        Value::Tuple(v) if v.len() == 2 => raw.push((t, vec![("s".into(), v[0].clone()), ("r".into(), v[1].clone())])),
                        other => {
                            return Err(DescriptorError::Template {
                                template: src.into(),
                                message: format!("expected pairs, found a {}", other.kind()),
                            })
                        }
                    }
                }
            }
            _ => return Err(shape()),
        }
        let mut links = Vec::new();
        for (l, base) in raw {
            let sender = self.component(str_field(l, "sender")?, &base)?;
            let receiver = self.component(str_field(l, "receiver")?, &base)?;
            let mut locals = base.clone();
            locals.extend(self.locals(&[("s", sender), ("r", receiver)]));
            let entity = self.component(str_field(l, "entity")?, &locals)?;
            let data_events = |name: &'static str| -> DResult<Vec<EventId>> {
                match field(l, name)? {
                    Json::Array(xs) => xs.iter().map(|x| self.event(as_str(x, name)?, &locals)).collect(),
                    Json::String(t) => {
                        let data = data.as_ref().ok_or(DescriptorError::Missing("data"))?;
                        data.iter()
                            .map(|d| {
                                let mut loc = locals.clone();
                                loc.push(("d".into(), d.clone()));
                                self.event(t, &loc)
                            })
                            .collect()
                    }
                    _ => Err(DescriptorError::Shape { field: name.into(), expected: "a list of events or a template" }),
                }
            };
            let send = data_events("send")?;
            let receive = data_events("receive")?;
            if send.len() != receive.len() {
                return Err(DescriptorError::Invalid(format!(
                    "link {} has {} send and {} receive events",
                    self.pair(sender, receiver),
                    send.len(),
                    receive.len()
                )));
            }
            let on = self.event(str_field(l, "on")?, &locals)?;
            let off = self.event(str_field(l, "off")?, &locals)?;
            let timeout = self.event(str_field(l, "timeout")?, &locals)?;
            links.push(AdLink { sender, receiver, entity, send, receive, on, off, timeout });
        }
        let d0 = AdDescriptor { links, schedule: BTreeMap::new() };
        let sched = obj_field(obj, "schedule")?;
        let mut schedule = BTreeMap::new();
        for i in d0.participants() {
            let name = self.net.name(i);
            let entry = sched
                .get(name)
                .or_else(|| sched.iter().find(|(k, _)| k.strip_suffix('*').is_some_and(|p| name.starts_with(p))).map(|(_, v)| v));
            let entry = entry.ok_or_else(|| DescriptorError::NonTotalMap { map: "schedule", key: name.to_string() })?;
            let peers = self.component_list(entry, "schedule", &self.locals(&[("s", i)]))?;
            if let Some((k, _)) = peers.iter().enumerate().find(|(k, x)| peers[k + 1..].contains(x)) {
                return Err(DescriptorError::DuplicateInSchedule {
                    participant: name.to_string(),
                    peer: self.net.name(peers[k]).to_string(),
                });
            }
            schedule.insert(i, peers);
        }
        for l in &d0.links {
            for (a, b) in [(l.sender, l.receiver), (l.receiver, l.sender)] {
                if !schedule[&a].contains(&b) {
                    return Err(DescriptorError::NonTotalMap {
                        map: "schedule",
                        key: format!("{} visiting {}", self.net.name(a), self.net.name(b)),
                    });
                }
            }
        }
        Ok(AdDescriptor { links: d0.links, schedule })
    }
}

/// Human-readable listing of a resolved descriptor, for review.
pub fn echo_descriptor(d: &PatternDescriptor, net: &Network) -> String {
    let n = |i: &usize| net.name(*i).to_string();
    let set = |v: &[usize]| format!("{{{}}}", v.iter().map(n).collect::<Vec<_>>().join(", "));
    let seq = |v: &[usize]| format!("<{}>", v.iter().map(n).collect::<Vec<_>>().join(", "));
    let evs = |v: &[EventId]| format!("<{}>", v.iter().map(|&e| net.event_name(e)).collect::<Vec<_>>().join(", "));
    let mut out = format!("pattern {}\n", d.name());
    match d {
        PatternDescriptor::ResourceAllocation(d) => {
            writeln!(out, "Users = {}", set(&d.users)).unwrap();
            writeln!(out, "Resources = {}", set(&d.resources)).unwrap();
            for c in &d.connections {
                writeln!(out, "acquire({}, {}) = {}", n(&c.user), n(&c.resource), net.event_name(c.acquire)).unwrap();
                writeln!(out, "release({}, {}) = {}", n(&c.user), n(&c.resource), net.event_name(c.release)).unwrap();
            }
            for (u, s) in &d.order {
                writeln!(out, "order({}) = {}", n(u), seq(s)).unwrap();
            }
            writeln!(out, "resource order = {}", seq(&d.ra_order)).unwrap();
        }
        PatternDescriptor::ClientServer(d) => {
            for c in &d.connections {
                writeln!(out, "requests({}, {}) = {}", n(&c.client), n(&c.server), net.fmt_events(&c.requests)).unwrap();
            }
            for (k, r) in &d.responses {
                writeln!(out, "responses({}) = {}", net.event_name(*k), net.fmt_events(r)).unwrap();
            }
            writeln!(out, "component order = {}", seq(&d.cs_order)).unwrap();
        }
        PatternDescriptor::AsyncDynamic(d) => {
            writeln!(out, "Participants = {}", set(&d.participants())).unwrap();
            writeln!(out, "TransportEntities = {}", set(&d.transport_entities())).unwrap();
            for l in &d.links {
                writeln!(out, "link({}, {}) via {}", n(&l.sender), n(&l.receiver), n(&l.entity)).unwrap();
                writeln!(out, "  send = {}, receive = {}", evs(&l.send), evs(&l.receive)).unwrap();
                writeln!(out, "  on = {}, off = {}, timeout = {}", net.event_name(l.on), net.event_name(l.off), net.event_name(l.timeout))
                    .unwrap();
            }
            for (i, s) in &d.schedule {
                writeln!(out, "schedule({}) = {}", n(i), seq(s)).unwrap();
            }
        }
    }
    out
}
