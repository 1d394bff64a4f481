//! Channel declarations and event interning.
//!
//! Every event of every declared channel is enumerated up front, so ids are
//! dense and stable for the lifetime of a [`Symbols`] value. One extra event,
//! the fresh `req` used by conflict contexts, is allocated after the declared
//! universe and is never a member of it.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub type EventId = u32;

/// Largest number of events a universe may declare.
pub const MAX_EVENTS: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    /// Finite value domain of each field, in declaration order.
    pub fields: Vec<Vec<i64>>,
}

impl Channel {
    fn count(&self) -> usize {
        self.fields.iter().map(|f| f.len()).product()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SymbolError {
    #[error("channel `{0}` declared twice")]
    DuplicateChannel(String),
    #[error("channel `{0}` has an empty field domain")]
    EmptyDomain(String),
    #[error("declared event universe exceeds {MAX_EVENTS} events")]
    RangeOverflow,
}

#[derive(Default)]
pub struct SymbolsBuilder {
    channels: Vec<Channel>,
}

impl SymbolsBuilder {
    pub fn channel(mut self, name: &str, fields: Vec<Vec<i64>>) -> Self {
        self.channels.push(Channel { name: name.to_string(), fields });
        self
    }

    pub fn add_channel(&mut self, name: &str, fields: Vec<Vec<i64>>) {
        self.channels.push(Channel { name: name.to_string(), fields });
    }

    pub fn build(self) -> Result<Symbols, SymbolError> {
        let mut chan_index = HashMap::new();
        let mut offsets = Vec::with_capacity(self.channels.len());
        let mut total = 0usize;
        for (i, c) in self.channels.iter().enumerate() {
            if chan_index.insert(c.name.clone(), i).is_some() {
                return Err(SymbolError::DuplicateChannel(c.name.clone()));
            }
            if c.fields.iter().any(|f| f.is_empty()) {
                return Err(SymbolError::EmptyDomain(c.name.clone()));
            }
            offsets.push(total);
            total = total.checked_add(c.count()).ok_or(SymbolError::RangeOverflow)?;
            if total > MAX_EVENTS {
                return Err(SymbolError::RangeOverflow);
            }
        }
        let mut names = Vec::with_capacity(total + 1);
        let mut by_name = HashMap::with_capacity(total + 1);
        let mut owner = Vec::with_capacity(total);
        for (ci, c) in self.channels.iter().enumerate() {
            for k in 0..c.count() {
                let values = decode(c, k);
                let name = dotted(&c.name, &values);
                by_name.insert(name.clone(), names.len() as EventId);
                names.push(name);
                owner.push(ci as u32);
            }
        }
        let mut req_name = String::from("req");
        while by_name.contains_key(&req_name) || chan_index.contains_key(&req_name) {
            req_name.push('\'');
        }
        let req = names.len() as EventId;
        by_name.insert(req_name.clone(), req);
        names.push(req_name);
        Ok(Symbols { channels: self.channels, chan_index, offsets, names, by_name, owner, req })
    }
}

/// Mixed-radix decoding of the `k`-th event of a channel, last field fastest.
fn decode(c: &Channel, mut k: usize) -> Vec<i64> {
    let mut out = vec![0; c.fields.len()];
    for (pos, f) in c.fields.iter().enumerate().rev() {
        out[pos] = f[k % f.len()];
        k /= f.len();
    }
    out
}

fn dotted(head: &str, values: &[i64]) -> String {
    let mut s = head.to_string();
    for v in values {
        s.push('.');
        s.push_str(&v.to_string());
    }
    s
}

/// Immutable event universe.
pub struct Symbols {
    channels: Vec<Channel>,
    chan_index: HashMap<String, usize>,
    offsets: Vec<usize>,
    names: Vec<String>,
    by_name: HashMap<String, EventId>,
    owner: Vec<u32>,
    req: EventId,
}

impl fmt::Debug for Symbols {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbols").field("channels", &self.channels.len()).field("events", &self.sigma_len()).finish()
    }
}

impl Symbols {
    pub fn builder() -> SymbolsBuilder {
        SymbolsBuilder::default()
    }

    /// Universe of plain events with no fields, handy for tests.
    pub fn plain(names: &[&str]) -> Symbols {
        let mut b = Symbols::builder();
        for n in names {
            b.add_channel(n, vec![]);
        }
        b.build().expect("plain universe")
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.chan_index.get(name).copied()
    }

    pub fn channel(&self, idx: usize) -> &Channel {
        &self.channels[idx]
    }

    /// Number of declared events (the size of Σ).
    pub fn sigma_len(&self) -> usize {
        self.req as usize
    }

    /// All declared events, in id order.
    pub fn sigma(&self) -> super::EventSet {
        super::EventSet::from_sorted((0..self.req).collect())
    }

    /// The fresh event reserved for conflict contexts.
    pub fn req(&self) -> EventId {
        self.req
    }

    pub fn name(&self, e: EventId) -> &str {
        &self.names[e as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<EventId> {
        self.by_name.get(name).copied()
    }

    pub fn event(&self, chan: usize, values: &[i64]) -> Option<EventId> {
        let c = &self.channels[chan];
        if values.len() != c.fields.len() {
            return None;
        }
        let mut id = 0usize;
        for (v, f) in values.iter().zip(&c.fields) {
            let k = f.iter().position(|x| x == v)?;
            id = id * f.len() + k;
        }
        Some((self.offsets[chan] + id) as EventId)
    }

    pub fn channel_of(&self, e: EventId) -> Option<usize> {
        self.owner.get(e as usize).map(|&c| c as usize)
    }

    /// Field values of a declared event.
    pub fn fields_of(&self, e: EventId) -> Vec<i64> {
        let ci = self.owner[e as usize] as usize;
        decode(&self.channels[ci], e as usize - self.offsets[ci])
    }

    /// Every event of `chan` whose leading fields equal `prefix`.
    pub fn extension(&self, chan: usize, prefix: &[i64]) -> Vec<EventId> {
        let c = &self.channels[chan];
        let start = self.offsets[chan];
        (start..start + c.count()).map(|e| e as EventId).filter(|&e| self.fields_of(e).iter().zip(prefix).all(|(a, b)| a == b)).collect()
    }

    pub fn fmt_events(&self, events: impl IntoIterator<Item = EventId>) -> String {
        let parts: Vec<&str> = events.into_iter().map(|e| self.name(e)).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_named() {
        let s = Symbols::builder().channel("a", vec![]).channel("pickup", vec![vec![0, 1], vec![0, 1, 2]]).build().unwrap();
        assert_eq!(s.sigma_len(), 7);
        assert_eq!(s.name(0), "a");
        assert_eq!(s.name(1), "pickup.0.0");
        assert_eq!(s.name(6), "pickup.1.2");
        assert_eq!(s.lookup("pickup.1.0"), Some(4));
        assert_eq!(s.event(1, &[1, 0]), Some(4));
        assert_eq!(s.fields_of(4), vec![1, 0]);
        assert_eq!(s.extension(1, &[1]), vec![4, 5, 6]);
        assert_eq!(s.name(s.req()), "req");
    }

    #[test]
    fn req_avoids_declared_names() {
        let s = Symbols::plain(&["req", "a"]);
        assert_eq!(s.name(s.req()), "req'");
        assert!(s.req() as usize >= s.sigma_len());
    }

    #[test]
    fn duplicate_channel_rejected() {
        let r = Symbols::builder().channel("a", vec![]).channel("a", vec![]).build();
        assert!(matches!(r, Err(SymbolError::DuplicateChannel(_))));
    }
}
