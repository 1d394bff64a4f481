mod common;

use common::{plain_env, Gen};
use dpa::semantics::{denotational_oracle, normalize, operational_behaviours, refines, replay, Model};
use dpa::term::{compile, ProcessTerm};
use proptest::prelude::*;

const DEPTH: usize = 4;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn operational_matches_denotational(seed in any::<u64>()) {
        let (env, top) = Gen::new(seed).program(DEPTH);
        let d = 6;
        // recursion through renaming or interrupt can be infinite-state
        let lts = compile(&env, &top, 10_000);
        prop_assume!(lts.is_ok());
        let lts = lts.unwrap();
        let op = operational_behaviours(&lts, env.symbols.sigma_len(), d).restrict(d);
        let den = denotational_oracle(&env, &top, d).unwrap().restrict(d);
        let diff = op.first_difference(&den);
        prop_assert!(diff.is_none(), "term {top}\nP(n) = {}\ndiff {diff:?}\nop:\n{op}\nden:\n{den}",
            env.def("P", 1).unwrap().body);
    }

    #[test]
    fn refinement_is_reflexive(seed in any::<u64>()) {
        let env = plain_env();
        let t = Gen::new(seed).plain(DEPTH);
        let l = compile(&env, &t, 10_000).unwrap();
        let Ok(n) = normalize(&l) else { return Ok(()) };
        prop_assert!(refines(&n, &l, Model::Failures).unwrap().holds());
        prop_assert!(refines(&n, &l, Model::Revivals).unwrap().holds());
    }

    #[test]
    fn refinement_is_transitive(seed in any::<u64>()) {
        let env = plain_env();
        let mut g = Gen::new(seed);
        let (x, y, z) = (g.plain(DEPTH), g.plain(DEPTH), g.plain(DEPTH));
        // nested internal choices give a chain that must refine in order
        let chain = [
            ProcessTerm::IntChoice(vec![x.clone(), ProcessTerm::IntChoice(vec![y.clone(), z.clone()])]),
            ProcessTerm::IntChoice(vec![y.clone(), z.clone()]),
            z.clone(),
        ];
        let ls: Vec<_> = chain.iter().map(|t| compile(&env, t, 10_000).unwrap()).collect();
        let Ok(n0) = normalize(&ls[0]) else { return Ok(()) };
        let Ok(n1) = normalize(&ls[1]) else { return Ok(()) };
        for m in [Model::Failures, Model::Revivals] {
            prop_assert!(refines(&n0, &ls[1], m).unwrap().holds());
            prop_assert!(refines(&n1, &ls[2], m).unwrap().holds());
            prop_assert!(refines(&n0, &ls[2], m).unwrap().holds());
        }
        // arbitrary triples: whenever two links hold, the composite must too
        let ls: Vec<_> = [x, y, z].iter().map(|t| compile(&env, t, 10_000).unwrap()).collect();
        let ns: Vec<_> = ls.iter().map(normalize).collect();
        if let (Ok(a), Ok(b)) = (&ns[0], &ns[1]) {
            for m in [Model::Failures, Model::Revivals] {
                if refines(a, &ls[1], m).unwrap().holds() && refines(b, &ls[2], m).unwrap().holds() {
                    prop_assert!(refines(a, &ls[2], m).unwrap().holds());
                }
            }
        }
    }

    #[test]
    fn revivals_refinement_implies_failures_refinement(seed in any::<u64>()) {
        let env = plain_env();
        let mut g = Gen::new(seed);
        let (s, i) = (g.plain(DEPTH), g.plain(DEPTH));
        let sl = compile(&env, &s, 10_000).unwrap();
        let il = compile(&env, &i, 10_000).unwrap();
        let Ok(n) = normalize(&sl) else { return Ok(()) };
        if refines(&n, &il, Model::Revivals).unwrap().holds() {
            prop_assert!(refines(&n, &il, Model::Failures).unwrap().holds());
        }
    }

    #[test]
    fn counterexamples_replay(seed in any::<u64>()) {
        let env = plain_env();
        let mut g = Gen::new(seed);
        let (s, i) = (g.plain(DEPTH), g.plain(DEPTH));
        let sl = compile(&env, &s, 10_000).unwrap();
        let il = compile(&env, &i, 10_000).unwrap();
        let Ok(n) = normalize(&sl) else { return Ok(()) };
        for m in [Model::Failures, Model::Revivals] {
            if let Some(c) = refines(&n, &il, m).unwrap().counterexample() {
                prop_assert!(replay(&il, c), "{c:?}");
            }
        }
    }
}
