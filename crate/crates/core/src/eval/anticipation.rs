//! Top-k accuracy for action anticipation.

use serde::{Deserialize, Serialize};

use crate::formats::{ActionPair, ActionPrediction};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKHits {
    pub verb: bool,
    pub noun: bool,
    pub action: bool,
}

/// Hits among the first `k` predicted pairs. An action hit needs a single
/// pair matching both verb and noun.
pub fn anticipation_topk(preds: &ActionPrediction, gt: &ActionPair, k: usize) -> TopKHits {
    let top = &preds.pairs[..k.min(preds.pairs.len())];
    TopKHits {
        verb: top.iter().any(|p| p.verb == gt.verb),
        noun: top.iter().any(|p| p.noun == gt.noun),
        action: top.iter().any(|p| p == gt),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub verb: f64,
    pub noun: f64,
    pub action: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnticipationReport {
    pub cases: usize,
    pub top1: Accuracy,
    pub top5: Accuracy,
}

fn accuracy(cases: &[(ActionPrediction, ActionPair)], k: usize) -> Accuracy {
    if cases.is_empty() {
        return Accuracy::default();
    }
    let (mut v, mut n, mut a) = (0usize, 0usize, 0usize);
    for (p, gt) in cases {
        let h = anticipation_topk(p, gt, k);
        v += h.verb as usize;
        n += h.noun as usize;
        a += h.action as usize;
    }
    let total = cases.len() as f64;
    Accuracy {
        verb: v as f64 / total,
        noun: n as f64 / total,
        action: a as f64 / total,
    }
}

/// Top-1 and top-5 accuracies over (prediction, ground truth) cases.
pub fn evaluate_anticipation(cases: &[(ActionPrediction, ActionPair)]) -> AnticipationReport {
    AnticipationReport {
        cases: cases.len(),
        top1: accuracy(cases, 1),
        top5: accuracy(cases, 5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(pairs: &[(&str, &str)]) -> ActionPrediction {
        ActionPrediction {
            pairs: pairs.iter().map(|(v, n)| ActionPair::new(*v, *n)).collect(),
        }
    }

    #[test]
    fn hits() {
        let gt = ActionPair::new("remove", "dough");
        let all = TopKHits {
            verb: true,
            noun: true,
            action: true,
        };
        assert_eq!(
            anticipation_topk(&preds(&[("remove", "dough")]), &gt, 1),
            all
        );
        let p = preds(&[("take", "bowl"), ("remove", "dough")]);
        assert_eq!(anticipation_topk(&p, &gt, 1), TopKHits::default());
        assert_eq!(anticipation_topk(&p, &gt, 5), all);
    }

    #[test]
    fn action_needs_one_pair() {
        let gt = ActionPair::new("remove", "dough");
        let p = preds(&[("remove", "bowl"), ("take", "dough")]);
        let h = anticipation_topk(&p, &gt, 5);
        assert!(h.verb && h.noun && !h.action);
    }

    #[test]
    fn report_averages() {
        let gt = ActionPair::new("remove", "dough");
        let cases = vec![
            (preds(&[("remove", "dough")]), gt.clone()),
            (preds(&[("take", "bowl"), ("remove", "dough")]), gt.clone()),
        ];
        let r = evaluate_anticipation(&cases);
        assert_eq!(r.top1.action, 0.5);
        assert_eq!(r.top5.action, 1.0);
        assert_eq!(evaluate_anticipation(&[]).top1, Accuracy::default());
    }
}
