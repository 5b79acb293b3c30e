mod common;

use adql_core::acyclicity::DEFAULT_BR_TOL;
use adql_core::{build_br_graph, is_equilibrium, is_weakly_acyclic};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn graph_invariants(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let game = common::small_random_game(&mut rng);
        let graph = build_br_graph(&game, DEFAULT_BR_TOL).unwrap();

        for e in &graph.edges {
            let (a, b) = (&graph.nodes[e.from], &graph.nodes[e.to]);
            let changed: Vec<_> = (0..game.players).filter(|&i| a.get(i) != b.get(i)).collect();
            prop_assert_eq!(changed, vec![e.deviator]);
        }
        for (k, node) in graph.nodes.iter().enumerate() {
            let eq = is_equilibrium(&game, node, 0.0, DEFAULT_BR_TOL).unwrap();
            prop_assert_eq!(eq, graph.is_equilibrium(k));
            prop_assert_eq!(graph.path_len[k] == Some(0), eq);
            // Bellman consistency of shortest path lengths
            if !eq {
                let best = graph.out_edges(k).filter_map(|e| graph.path_len[e.to]).min();
                prop_assert_eq!(graph.path_len[k], best.map(|l| l + 1));
            }
        }

        if is_weakly_acyclic(&graph) {
            let l_star = graph.path_len.iter().flatten().copied().max().unwrap();
            for start in 0..graph.nodes.len() {
                // follow edges that decrease the path length
                let mut node = start;
                let mut steps = 0;
                while !graph.is_equilibrium(node) {
                    let here = graph.path_len[node].unwrap();
                    node = graph.out_edges(node).find(|e| graph.path_len[e.to] == Some(here - 1)).unwrap().to;
                    steps += 1;
                }
                prop_assert!(steps <= l_star);
            }
        }
    }
}
