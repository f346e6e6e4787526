use std::collections::BTreeSet;
use std::time::Duration;

use proptest::prelude::*;

use abscon_core::concretize::{brute_force, solve, SolveStatus};
use abscon_core::evaluation::{exact_match, majority_vote, soft_prf, token_overlap};
use abscon_core::graph::normalize_label;
use abscon_core::matching::{exhaustive_match, match_graphs, CostModel};
use abscon_core::synth::{self, Noise};
use abscon_core::{abstract_candidates, build_problem, isomorphic, BuiltinEmbedder, Domain, DomainProfile};

const DOMAINS: [Domain; 3] = [Domain::Flowchart, Domain::Taxonomy, Domain::Clevr];

fn domain() -> impl Strategy<Value = Domain> {
    prop::sample::select(DOMAINS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exhaustive_never_worse_than_heuristic(seed in any::<u64>(), d in domain()) {
        let mut rng = synth::rng(seed);
        let (base, pool) = synth::candidate_pool(d, &mut rng, 1, 7, Noise::default());
        let cand = &pool[0];
        prop_assume!(cand.node_count() <= 8 && base.node_count() <= 8);
        let profile = DomainProfile::new(d);
        let cost = CostModel::from_profile(&profile, &BuiltinEmbedder);
        let best = exhaustive_match(cand, &base, &cost).unwrap();
        let fast = match_graphs(cand, &base, &cost, Duration::from_secs(5)).unwrap();
        prop_assert!(best.total_cost <= fast.total_cost + 1e-9, "{} > {}", best.total_cost, fast.total_cost);
        let targets: BTreeSet<_> = fast.node_map.values().collect();
        prop_assert_eq!(targets.len(), fast.node_map.len());
    }

    #[test]
    fn abstraction_conserves_counts(seed in any::<u64>(), d in domain(), n in 1usize..6) {
        let mut rng = synth::rng(seed);
        let (_, pool) = synth::candidate_pool(d, &mut rng, n, 6, Noise::default());
        let profile = DomainProfile::new(d);
        let pm = abstract_candidates(&pool, &profile, &BuiltinEmbedder).unwrap();
        prop_assert_eq!(pm.n_candidates(), n);
        prop_assert!(pm.invariant_violations().is_empty(), "{:?}", pm.invariant_violations());
        let nodes: usize = pm.nodes().map(|(_, p)| p.count).sum();
        let edges: usize = pm.edges().map(|(_, p)| p.count).sum();
        prop_assert_eq!(nodes, pool.iter().map(|g| g.node_count()).sum::<usize>());
        prop_assert_eq!(edges, pool.iter().map(|g| g.edge_count()).sum::<usize>());
    }

    #[test]
    fn solver_matches_brute_force(seed in any::<u64>(), d in domain()) {
        let mut rng = synth::rng(seed);
        let pm = synth::random_partial_model(d, &mut rng, 14);
        let problem = build_problem(&pm, &DomainProfile::new(d));
        let fast = solve(&problem, Duration::from_secs(10));
        let slow = brute_force(&problem).unwrap();
        prop_assert_eq!(fast.status, slow.status);
        if fast.status == SolveStatus::Optimal {
            prop_assert!((fast.objective - slow.objective).abs() <= 1e-9);
            prop_assert!(problem.satisfies(&fast.assignment));
        }
    }

    #[test]
    fn soft_prf_swaps_precision_and_recall(seed in any::<u64>(), d in domain()) {
        let mut rng = synth::rng(seed);
        let (reference, pool) = synth::candidate_pool(d, &mut rng, 1, 6, Noise::default());
        for sim in [exact_match as fn(&_, &_) -> f64, token_overlap] {
            let ab = soft_prf(&pool[0], &reference, &sim);
            let ba = soft_prf(&reference, &pool[0], &sim);
            prop_assert!((ab.precision - ba.recall).abs() <= 1e-12);
            prop_assert!((ab.recall - ba.precision).abs() <= 1e-12);
            prop_assert!((ab.f1 - ba.f1).abs() <= 1e-12);
            for v in [ab.precision, ab.recall, ab.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn majority_vote_of_identical_candidates_is_identity(seed in any::<u64>(), d in domain(), n in 1usize..5) {
        let mut rng = synth::rng(seed);
        let g = synth::consistent_graph(d, &mut rng, 6);
        // voting identifies nodes by label, so repeated labels merge
        let labels: BTreeSet<String> = g.nodes().map(|x| normalize_label(&x.display_label())).collect();
        prop_assume!(labels.len() == g.node_count());
        let voted = majority_vote(&vec![g.clone(); n]);
        prop_assert!(isomorphic(&voted, &g));
    }

    #[test]
    fn majority_vote_keeps_only_majority_relations(seed in any::<u64>(), d in domain(), n in 1usize..6) {
        let mut rng = synth::rng(seed);
        let (_, pool) = synth::candidate_pool(d, &mut rng, n, 6, Noise::default());
        let voted = majority_vote(&pool);
        let triples = abscon_core::evaluation::relation_triples;
        for t in triples(&voted) {
            let support = pool.iter().filter(|g| triples(g).contains(&t)).count();
            prop_assert!(2 * support > n, "{t:?} has support {support}/{n}");
        }
    }
}
