use std::fmt;

use serde::{Deserialize, Serialize};

use super::EventId;

/// Sorted, duplicate-free set of event ids.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSet(Vec<EventId>);

impl fmt::Debug for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

impl EventSet {
    pub fn new() -> Self {
        EventSet(Vec::new())
    }

    pub fn from_sorted(v: Vec<EventId>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        EventSet(v)
    }

    pub fn singleton(e: EventId) -> Self {
        EventSet(vec![e])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: EventId) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = EventId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[EventId] {
        &self.0
    }

    pub fn insert(&mut self, e: EventId) -> bool {
        match self.0.binary_search(&e) {
            Ok(_) => false,
            Err(p) => {
                self.0.insert(p, e);
                true
            }
        }
    }

    pub fn union(&self, other: &EventSet) -> EventSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        EventSet(out)
    }

    pub fn intersection(&self, other: &EventSet) -> EventSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        EventSet(out)
    }

    pub fn difference(&self, other: &EventSet) -> EventSet {
        EventSet(self.0.iter().copied().filter(|e| !other.contains(*e)).collect())
    }

    pub fn intersects(&self, other: &EventSet) -> bool {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn is_subset(&self, other: &EventSet) -> bool {
        self.0.iter().all(|e| other.contains(*e))
    }
}

impl FromIterator<EventId> for EventSet {
    fn from_iter<I: IntoIterator<Item = EventId>>(iter: I) -> Self {
        let mut v: Vec<EventId> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        EventSet(v)
    }
}

impl<'a> IntoIterator for &'a EventSet {
    type Item = EventId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, EventId>>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}
