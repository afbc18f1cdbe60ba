use easg_core::eval::{
    apply_constraint, graph_recalls, gt_triplets, random_baseline_with, recall_at_k, EvalConfig,
    GraphPredictions, LabelScore, PairPrediction, PredictionSet, Slot, Task, KS,
};
use easg_core::formats::parse_triplet_string;
use easg_core::Taxonomy;
use easg_testkit::gen::random_instance;
use easg_testkit::oracle::brute_force_matched;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tax() -> &'static Taxonomy {
    Taxonomy::ego4d_easg()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, p) = random_instance(&mut rng, tax(), 4);
        let gt = gt_triplets(&g, true);
        let cfg = EvalConfig::default();
        for task in Task::ALL {
            for constrained in [true, false] {
                let got = graph_recalls(Some(&p), &g, task, constrained, &KS, &cfg, tax()).unwrap();
                for (r, k) in got.iter().zip(KS) {
                    prop_assert_eq!(r.matched, brute_force_matched(&p, &gt, task, constrained, k, tax()));
                    prop_assert_eq!(r.total, gt.len());
                }
            }
        }
    }

    #[test]
    fn monotone_in_k_and_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, p) = random_instance(&mut rng, tax(), 4);
        let cfg = EvalConfig::default();
        for task in Task::ALL {
            for constrained in [true, false] {
                let ks = [1, 5, 10, 20, 50, 200];
                let r = graph_recalls(Some(&p), &g, task, constrained, &ks, &cfg, tax()).unwrap();
                for w in r.windows(2) {
                    prop_assert!(w[0].matched <= w[1].matched);
                }
                prop_assert!(r.iter().all(|x| x.matched <= x.total));
            }
        }
    }

    #[test]
    fn constraint_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, p) = random_instance(&mut rng, tax(), 4);
        let set = PredictionSet { graphs: vec![p] };
        let once = apply_constraint(&set, tax());
        prop_assert_eq!(apply_constraint(&once, tax()), once);
    }
}

/// With global score ranking, keeping only each pair's best relation can let
/// a pair's top candidate climb into the top K that the other pair's
/// runners-up held without the constraint.
#[test]
fn constraint_can_raise_recall() {
    let g = parse_triplet_string(
        "CW - verb - wash; wash - direct object - car; wash - with - sponge",
        tax(),
    )
    .unwrap()
    .graph;
    let rel = |pairs: &[(&str, f64)]| pairs.iter().map(|(l, s)| LabelScore::new(*l, *s)).collect();
    let mut p = GraphPredictions::empty("", 1);
    // verb -> car: every wrong relation outscores verb -> sponge's best
    let wrong: Vec<(&str, f64)> = [
        "on", "in", "to", "from", "into", "onto", "under", "up", "out", "through", "around",
    ]
    .iter()
    .map(|l| (*l, 0.95))
    .collect();
    let mut car = wrong.clone();
    car.push(("direct object", 0.99));
    p.relations = vec![
        PairPrediction {
            src: Slot::Verb,
            dst: Slot::Object(0),
            relations: rel(&car),
        },
        PairPrediction {
            src: Slot::Verb,
            dst: Slot::Object(1),
            relations: rel(&[("with", 0.9), ("on", 0.1)]),
        },
    ];
    let cfg = EvalConfig::default();
    let free = recall_at_k(&p, &g, 10, Task::EdgeCls, false, &cfg, tax()).unwrap();
    let constrained = recall_at_k(&p, &g, 10, Task::EdgeCls, true, &cfg, tax()).unwrap();
    assert_eq!(free, Some(0.5));
    assert_eq!(constrained, Some(1.0));
}

#[test]
fn saturates_with_few_candidates() {
    // one edge per graph: constrained recall is the same at every k
    let graphs: Vec<_> = ["take", "wash", "cut"]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut g = parse_triplet_string(
                &format!("CW - verb - {v}; {v} - direct object - bowl"),
                tax(),
            )
            .unwrap()
            .graph;
            g.clip_id = format!("c{i}");
            g
        })
        .collect();
    let t = random_baseline_with(
        &graphs,
        tax(),
        tax().relations(),
        3,
        50,
        &EvalConfig::default(),
    )
    .unwrap();
    for task in Task::ALL {
        let v: Vec<f64> = KS.iter().map(|&k| t.get(true, task, k).unwrap()).collect();
        assert!(v.iter().all(|x| *x == v[0]), "{task}: {v:?}");
    }
    assert_eq!(t.get(false, Task::EdgeCls, 50), Some(1.0));
}
