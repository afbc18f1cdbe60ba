use easg_core::eval::nlg::{bleu, cider, corpus_bleu, rouge_l, rouge_n};
use easg_testkit::fixtures::{nlg_expected, NLG_FIXTURE};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

#[test]
fn hand_computed_fixture() {
    let e = nlg_expected();
    let c = NLG_FIXTURE.candidates;
    let r = NLG_FIXTURE.references;
    assert!((bleu(c[0], &[r[0]], 1) - e.bleu1_item1).abs() < TOL);
    assert!((bleu(c[0], &[r[0]], 2) - e.bleu2_item1).abs() < TOL);
    let refs: Vec<Vec<&str>> = r.iter().map(|x| vec![*x]).collect();
    assert!((corpus_bleu(&c, &refs, 2) - e.corpus_bleu2).abs() < TOL);
    for i in 0..3 {
        assert!(
            (rouge_l(c[i], &[r[i]]) - e.rouge_l[i]).abs() < TOL,
            "item {i}"
        );
    }
    assert!((rouge_n(c[1], &[r[1]], 1) - e.rouge1_item2).abs() < TOL);
    let s = cider(&c, &refs);
    for i in 0..3 {
        assert!(
            (s.per_item[i] - e.cider[i]).abs() < TOL,
            "item {i}: {} vs {}",
            s.per_item[i],
            e.cider[i]
        );
    }
    assert!((s.score - e.cider_corpus).abs() < TOL);
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            "the", "a", "car", "bowl", "wash", "take", "dough", "with", "hose",
        ]),
        0..9,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn bounded_and_order_free(cand in sentence(), refs in prop::collection::vec(sentence(), 1..4), other in sentence()) {
        let mut rev = refs.clone();
        rev.reverse();
        for n in 1..=4 {
            let b = bleu(&cand, &refs, n);
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert_eq!(b, bleu(&cand, &rev, n));
        }
        let r = rouge_l(&cand, &refs);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r, rouge_l(&cand, &rev));
        prop_assert_eq!(rouge_n(&cand, &refs, 2), rouge_n(&cand, &rev, 2));
        let a = cider(&[cand.clone(), other.clone()], &[refs.clone(), vec![other.clone()]]);
        let b = cider(&[cand.clone(), other.clone()], &[rev, vec![other]]);
        prop_assert_eq!(&a, &b);
        prop_assert!((0.0..=10.0).contains(&a.score));
    }
}
