use dpa::decomposition::{bridges, residual_components};
use dpa::network::{CommGraph, Edge};
use dpa::term::EventSet;
use proptest::prelude::*;

fn graph(nodes: usize, pairs: &[(usize, usize)]) -> CommGraph {
    let mut edges: Vec<(usize, usize)> = pairs.iter().filter(|(a, b)| a != b).map(|&(a, b)| (a.min(b), a.max(b))).collect();
    edges.sort_unstable();
    edges.dedup();
    CommGraph { nodes, edges: edges.into_iter().map(|(a, b)| Edge { a, b, shared: EventSet::new() }).collect() }
}

/// An edge is a bridge iff deleting it adds a connected component.
fn reference(g: &CommGraph) -> Vec<(usize, usize)> {
    let base = residual_components(g, &[]).len();
    g.edges.iter().map(|e| (e.a, e.b)).filter(|&e| residual_components(g, &[e]).len() > base).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn bridges_match_the_definition(nodes in 1usize..12, pairs in prop::collection::vec((0usize..12, 0usize..12), 0..24)) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().map(|(a, b)| (a % nodes, b % nodes)).collect();
        let g = graph(nodes, &pairs);
        prop_assert_eq!(bridges(&g), reference(&g));
    }

    #[test]
    fn removing_every_bridge_of_a_tree_isolates_all_nodes(nodes in 1usize..16, seed in any::<u64>()) {
        let pairs: Vec<(usize, usize)> = (1..nodes).map(|v| ((seed as usize).wrapping_mul(v + 7) % v, v)).collect();
        let g = graph(nodes, &pairs);
        let b = bridges(&g);
        prop_assert_eq!(b.len(), nodes - 1);
        prop_assert!(residual_components(&g, &b).iter().all(|c| c.len() == 1));
    }
}

#[test]
fn cycles_have_no_bridges() {
    let g = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
    assert!(bridges(&g).is_empty());
    let g = graph(6, &[(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 5), (5, 3)]);
    assert_eq!(bridges(&g), [(0, 3)]);
}
