use easg_core::{canonicalize, validate_graph, validate_graph_against, Taxonomy};
use easg_testkit::gen::{mutate, random_graph, MUTATIONS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tax() -> &'static Taxonomy {
    Taxonomy::ego4d_easg()
}

proptest! {
    #[test]
    fn constructed_graphs_are_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, tax(), 6);
        let r = validate_graph_against(&g, tax());
        prop_assert!(r.is_valid(), "{r}");
    }

    #[test]
    fn each_mutation_is_reported(seed in any::<u64>(), which in 0..MUTATIONS.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, tax(), 5);
        let code = MUTATIONS[which];
        let m = mutate(&mut rng, &g, code);
        let r = validate_graph_against(&m, tax());
        prop_assert!(r.has(code), "{code:?} not in {r}");
        prop_assert!(!r.is_valid());
    }

    #[test]
    fn canonicalize_is_idempotent_and_order_free(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, tax(), 6);
        let c = canonicalize(&g);
        prop_assert_eq!(&canonicalize(&c), &c);
        let mut shuffled = g.clone();
        shuffled.nodes.reverse();
        shuffled.edges.reverse();
        prop_assert_eq!(canonicalize(&shuffled), c.clone());
        prop_assert_eq!(validate_graph(&c).codes(), validate_graph(&g).codes());
    }
}
