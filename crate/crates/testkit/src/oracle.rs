//! Brute-force reference implementations.
//!
//! These enumerate everything and sort, sharing no code with the library
//! beyond its data types and the ground-truth triplet extraction.

use std::cmp::Ordering;

use easg_core::eval::{GraphPredictions, GtTriplet, LabelScore, Slot, Task, TopKHits};
use easg_core::formats::{ActionPair, ActionPrediction};
use easg_core::{LabelKind, Taxonomy};

#[derive(Debug, Clone)]
struct Cand {
    src: Slot,
    dst: Slot,
    labels: Vec<(u32, String)>,
    scores: Vec<f64>,
    score: f64,
    src_label: Option<String>,
    dst_label: Option<String>,
    relation: String,
}

fn order(a: &Cand, b: &Cand) -> Ordering {
    if a.score != b.score {
        return b.score.partial_cmp(&a.score).unwrap();
    }
    for i in 0..a.scores.len().min(b.scores.len()) {
        if a.scores[i] != b.scores[i] {
            return b.scores[i].partial_cmp(&a.scores[i]).unwrap();
        }
    }
    if a.scores.len() != b.scores.len() {
        return b.scores.len().cmp(&a.scores.len());
    }
    (a.src, a.dst, &a.labels).cmp(&(b.src, b.dst, &b.labels))
}

fn keyed(items: &[LabelScore], kind: LabelKind, tax: &Taxonomy) -> Vec<(u32, String, f64)> {
    items
        .iter()
        .map(|l| {
            (
                tax.id(kind, &l.label).unwrap_or(u32::MAX),
                l.label.clone(),
                l.score,
            )
        })
        .collect()
}

fn argmax(items: &[LabelScore], kind: LabelKind, tax: &Taxonomy) -> Vec<LabelScore> {
    let mut best: Option<(u32, String, f64)> = None;
    for (id, l, s) in keyed(items, kind, tax) {
        let better = match &best {
            None => true,
            Some((bid, bl, bs)) => s > *bs || (s == *bs && (id, &l) < (*bid, bl)),
        };
        if better {
            best = Some((id, l, s));
        }
    }
    best.into_iter()
        .map(|(_, l, s)| LabelScore::new(l, s))
        .collect()
}

/// Every candidate of every pair, fully sorted, cut at `k`.
fn enumerate(
    p: &GraphPredictions,
    task: Task,
    constrained: bool,
    k: usize,
    tax: &Taxonomy,
) -> Vec<Cand> {
    let cut = |items: &[LabelScore], kind| -> Vec<LabelScore> {
        if constrained {
            argmax(items, kind, tax)
        } else {
            items.to_vec()
        }
    };
    let mut all = Vec::new();
    for pair in &p.relations {
        let endpoint = |s: Slot| -> Option<Vec<(u32, String, f64)>> {
            match (task, s) {
                (Task::EdgeCls, _) | (Task::SgCls, Slot::Verb) => None,
                (Task::EasgCls, Slot::Verb) => {
                    Some(keyed(&cut(&p.verbs, LabelKind::Verb), LabelKind::Verb, tax))
                }
                (_, Slot::Object(i)) => Some(keyed(
                    &cut(
                        p.objects.get(i as usize).map(Vec::as_slice).unwrap_or(&[]),
                        LabelKind::Noun,
                    ),
                    LabelKind::Noun,
                    tax,
                )),
            }
        };
        let rels = keyed(
            &cut(&pair.relations, LabelKind::Relation),
            LabelKind::Relation,
            tax,
        );
        let none = vec![(0u32, String::new(), 1.0)];
        let srcs = endpoint(pair.src);
        let dsts = endpoint(pair.dst);
        for r in &rels {
            for s in srcs.as_ref().unwrap_or(&none) {
                for d in dsts.as_ref().unwrap_or(&none) {
                    let mut scores = vec![r.2];
                    let mut labels = vec![(r.0, r.1.clone())];
                    if srcs.is_some() {
                        scores.push(s.2);
                        labels.push((s.0, s.1.clone()));
                    }
                    if dsts.is_some() {
                        scores.push(d.2);
                        labels.push((d.0, d.1.clone()));
                    }
                    let mut score = 1.0;
                    for x in &scores {
                        score *= x;
                    }
                    all.push(Cand {
                        src: pair.src,
                        dst: pair.dst,
                        labels,
                        scores,
                        score,
                        src_label: srcs.as_ref().map(|_| s.1.clone()),
                        dst_label: dsts.as_ref().map(|_| d.1.clone()),
                        relation: r.1.clone(),
                    });
                }
            }
        }
    }
    all.sort_by(order);
    all.truncate(k);
    all
}

/// Matched ground-truth triplets among the top `k` candidates.
pub fn brute_force_matched(
    p: &GraphPredictions,
    gt: &[GtTriplet],
    task: Task,
    constrained: bool,
    k: usize,
    tax: &Taxonomy,
) -> usize {
    let top = enumerate(p, task, constrained, k, tax);
    gt.iter()
        .filter(|t| {
            top.iter().any(|c| {
                c.src == t.src
                    && c.dst == t.dst
                    && c.relation == t.relation
                    && c.src_label.as_ref().is_none_or(|l| l == &t.src_label)
                    && c.dst_label.as_ref().is_none_or(|l| l == &t.dst_label)
            })
        })
        .count()
}

/// Recall of one graph, `None` without ground-truth triplets.
pub fn brute_force_recall(
    p: &GraphPredictions,
    gt: &[GtTriplet],
    task: Task,
    constrained: bool,
    k: usize,
    tax: &Taxonomy,
) -> Option<f64> {
    if gt.is_empty() {
        return None;
    }
    Some(brute_force_matched(p, gt, task, constrained, k, tax) as f64 / gt.len() as f64)
}

pub fn topk_hits(preds: &ActionPrediction, gt: &ActionPair, k: usize) -> TopKHits {
    let mut h = TopKHits::default();
    for (i, p) in preds.pairs.iter().enumerate() {
        if i >= k {
            break;
        }
        h.verb |= p.verb == gt.verb;
        h.noun |= p.noun == gt.noun;
        h.action |= p.verb == gt.verb && p.noun == gt.noun;
    }
    h
}
