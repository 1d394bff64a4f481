//! Random live networks: every local state offers something, nothing
//! terminates, and each event belongs to one component or one pair.

use std::sync::Arc;

use dpa::network::{Component, Network};
use dpa::term::{DefEnv, EventSet, Expr, ProcessTerm, Symbols};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct NetGen {
    rng: ChaCha8Rng,
    pub max_components: usize,
    pub max_states: usize,
}

impl NetGen {
    pub fn new(seed: u64) -> Self {
        NetGen { rng: ChaCha8Rng::seed_from_u64(seed), max_components: 4, max_states: 5 }
    }

    pub fn network(&mut self) -> Network {
        let r = &mut self.rng;
        let n = r.random_range(2..=self.max_components);
        let mut names: Vec<String> = Vec::new();
        // events owned by each component, by name
        let mut owned: Vec<Vec<String>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if r.random_bool(0.6) {
                    for k in 0..r.random_range(1..=2) {
                        let e = format!("s{i}{j}_{k}");
                        owned[i].push(e.clone());
                        owned[j].push(e.clone());
                        names.push(e);
                    }
                }
            }
            if r.random_bool(0.4) {
                let e = format!("p{i}");
                owned[i].push(e.clone());
                names.push(e);
            }
        }
        // a component with nothing to do gets a private event
        for (i, evs) in owned.iter_mut().enumerate() {
            if evs.is_empty() {
                let e = format!("p{i}");
                evs.push(e.clone());
                names.push(e);
            }
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let symbols = Arc::new(Symbols::plain(&refs));
        let ev = |s: &str| symbols.lookup(s).unwrap();
        let mut env = DefEnv::with_symbols(symbols.clone());
        let mut comps = Vec::new();
        for (i, evs) in owned.iter().enumerate() {
            let states = r.random_range(1..=self.max_states);
            for s in 0..states {
                let k = r.random_range(1..=2);
                let branches: Vec<ProcessTerm> = (0..k)
                    .map(|_| {
                        let e = &evs[r.random_range(0..evs.len())];
                        let t = r.random_range(0..states);
                        ProcessTerm::prefix(Expr::event(ev(e)), ProcessTerm::call(&format!("C{i}_{t}"), vec![]))
                    })
                    .collect();
                let body = if k > 1 && r.random_bool(0.3) { ProcessTerm::IntChoice(branches) } else { ProcessTerm::ExtChoice(branches) };
                env.define(&format!("C{i}_{s}"), &[], body);
            }
            let alphabet: EventSet = evs.iter().map(|e| ev(e)).collect();
            comps.push(Component::new(format!("C{i}"), alphabet, ProcessTerm::call(&format!("C{i}_0"), vec![])));
        }
        Network::new(Arc::new(env), comps)
    }
}
