//! Deadlock-freedom analysis for networks of communicating finite-state processes.
//!
//! A network is first decomposed by removing communication-graph bridges whose
//! endpoints provably cannot conflict. Every remaining essential subnetwork with
//! more than one component must then adhere to a behavioural pattern
//! (resource allocation, client/server or async dynamic). Both kinds of
//! obligation reduce to refinement checks on single components or pairs, decided
//! here in the stable failures and stable revivals models. A brute-force global
//! explorer is included to cross-check verdicts on small instances.

pub mod decomposition;
pub mod dsl;
pub mod network;
pub mod oracle;
pub mod par;
pub mod patterns;
pub mod report;
pub mod semantics;
pub mod term;

/// Durations in reports are plain milliseconds.
pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1000.0))
    }
}
