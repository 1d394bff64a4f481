//! Random small process terms over three events.
#![allow(dead_code)]

pub mod nets;

use dpa::term::{BinOp, DefEnv, EventSet, Expr, ProcessTerm, Symbols};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EVENTS: &[&str] = &["a", "b", "c"];

pub struct Gen {
    rng: ChaCha8Rng,
}

#[derive(Clone, Copy)]
struct Ctx {
    calls: bool,
    in_body: bool,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn event(&mut self) -> Expr {
        Expr::event(self.rng.random_range(0..EVENTS.len() as u32))
    }

    fn call(&mut self, ctx: Ctx) -> ProcessTerm {
        let arg = if ctx.in_body && self.rng.random_bool(0.5) {
            Expr::bin(BinOp::Mod, Expr::bin(BinOp::Add, Expr::var("n"), Expr::int(1)), Expr::int(2))
        } else {
            Expr::int(self.rng.random_range(0..2))
        };
        ProcessTerm::call("P", vec![arg])
    }

    fn leaf(&mut self) -> ProcessTerm {
        match self.rng.random_range(0..10) {
            0..=3 => ProcessTerm::Stop,
            4..=7 => ProcessTerm::Skip,
            _ => ProcessTerm::Div,
        }
    }

    fn term(&mut self, depth: usize, ctx: Ctx) -> ProcessTerm {
        if depth <= 1 {
            return self.leaf();
        }
        let d = depth - 1;
        let no_calls = Ctx { calls: false, ..ctx };
        match self.rng.random_range(0..11) {
            0 | 1 => {
                let e = self.event();
                let k = if ctx.calls && self.rng.random_bool(0.4) { self.call(ctx) } else { self.term(d, ctx) };
                ProcessTerm::prefix(e, k)
            }
            2 => ProcessTerm::ExtChoice(vec![self.term(d, ctx), self.term(d, ctx)]),
            3 => ProcessTerm::IntChoice(vec![self.term(d, ctx), self.term(d, ctx)]),
            4 => ProcessTerm::seq(self.term(d, no_calls), self.term(d, ctx)),
            5 => ProcessTerm::interrupt(self.term(d, no_calls), self.term(d, ctx)),
            6 => {
                let e = self.rng.random_range(0..EVENTS.len() as u32);
                ProcessTerm::hide(self.term(d, no_calls), Expr::events(&EventSet::singleton(e)))
            }
            7 => {
                let a = self.event();
                let mut pairs = vec![(a.clone(), self.event())];
                if self.rng.random_bool(0.3) {
                    pairs.push((a, self.event()));
                }
                ProcessTerm::Rename(Box::new(self.term(d, ctx)), pairs)
            }
            8 if ctx.in_body => {
                let c = Expr::bin(BinOp::Eq, Expr::var("n"), Expr::int(0));
                ProcessTerm::guard(c, self.term(d, ctx))
            }
            9 => {
                let e = self.event();
                ProcessTerm::prefix(e, self.leaf())
            }
            _ => {
                let e = self.event();
                let k = self.term(d, ctx);
                ProcessTerm::prefix(e, k)
            }
        }
    }

    /// An environment with one recursive definition `P(n)` and a top-level term.
    pub fn program(&mut self, depth: usize) -> (DefEnv, ProcessTerm) {
        let mut env = DefEnv::new(Symbols::plain(EVENTS));
        let body = self.term(depth, Ctx { calls: true, in_body: true });
        env.define("P", &["n"], body);
        let top = if self.rng.random_bool(0.3) {
            ProcessTerm::call("P", vec![Expr::int(0)])
        } else {
            self.term(depth, Ctx { calls: true, in_body: false })
        };
        (env, top)
    }

    /// A call-free term.
    pub fn plain(&mut self, depth: usize) -> ProcessTerm {
        self.term(depth, Ctx { calls: false, in_body: false })
    }
}

pub fn plain_env() -> DefEnv {
    DefEnv::new(Symbols::plain(EVENTS))
}
