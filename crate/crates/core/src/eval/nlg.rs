//! Text metrics for activity summaries: BLEU, ROUGE-N, ROUGE-L and CIDEr.
//!
//! All metrics share [`tokenize`]: lowercase, drop every character that is
//! neither alphanumeric nor whitespace, split on whitespace. The tokenizer is
//! versioned by [`TOKENIZER_VERSION`] so stored scores can be traced to it.
//!
//! Candidates without tokens score 0. N-gram vectors are kept in ordered maps
//! and per-reference terms are summed in sorted order, so scores do not
//! depend on the order of the reference list.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const TOKENIZER_VERSION: u32 = 1;

/// Highest n-gram order used by CIDEr.
pub const CIDER_MAX_N: usize = 4;
/// CIDEr is reported multiplied by this factor.
pub const CIDER_SCALE: f64 = 10.0;

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

type Counts<'a> = BTreeMap<&'a [String], usize>;

fn ngrams(tokens: &[String], n: usize) -> Counts<'_> {
    let mut m = Counts::new();
    if n > 0 {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn overlap(a: &Counts, b: &Counts) -> usize {
    a.iter()
        .map(|(g, c)| (*c).min(b.get(g).copied().unwrap_or(0)))
        .sum()
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Clipped n-gram matches and candidate n-gram count at each order 1..=n.
fn bleu_counts(cand: &[String], refs: &[Vec<String>], n: usize) -> Vec<(usize, usize)> {
    (1..=n)
        .map(|i| {
            let c = ngrams(cand, i);
            let mut max_ref = Counts::new();
            for r in refs {
                for (g, k) in ngrams(r, i) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(k);
                }
            }
            (overlap(&c, &max_ref), cand.len().saturating_sub(i - 1))
        })
        .collect()
}

/// Reference length closest to `c`, the shorter one on ties.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn bleu_from(counts: &[(usize, usize)], c: usize, r: usize) -> f64 {
    if c == 0 || counts.iter().any(|&(m, t)| m == 0 || t == 0) {
        return 0.0;
    }
    let log_p: f64 = counts
        .iter()
        .map(|&(m, t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / counts.len() as f64;
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * log_p.exp()
}

/// Sentence BLEU-n: geometric mean of clipped n-gram precisions for orders
/// 1..=n, times the brevity penalty against the closest reference length.
/// No smoothing, so any order without matches gives 0.
pub fn bleu<S: AsRef<str>>(candidate: &str, references: &[S], n: usize) -> f64 {
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();
    if refs.is_empty() || n == 0 {
        return 0.0;
    }
    bleu_from(
        &bleu_counts(&cand, &refs, n),
        cand.len(),
        closest_ref_len(cand.len(), &refs),
    )
}

/// Corpus BLEU-n: counts and lengths pooled over all items before the
/// precisions and brevity penalty are taken.
pub fn corpus_bleu<S: AsRef<str>>(candidates: &[S], references: &[Vec<S>], n: usize) -> f64 {
    if n == 0 || candidates.is_empty() {
        return 0.0;
    }
    let mut totals = vec![(0usize, 0usize); n];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        let cand = tokenize(cand.as_ref());
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r.as_ref())).collect();
        if refs.is_empty() {
            continue;
        }
        for (t, (m, k)) in totals.iter_mut().zip(bleu_counts(&cand, &refs, n)) {
            t.0 += m;
            t.1 += k;
        }
        c_len += cand.len();
        r_len += closest_ref_len(cand.len(), &refs);
    }
    bleu_from(&totals, c_len, r_len)
}

/// ROUGE-N F1, best over references.
pub fn rouge_n<S: AsRef<str>>(candidate: &str, references: &[S], n: usize) -> f64 {
    let cand = tokenize(candidate);
    let c = ngrams(&cand, n);
    let c_total: usize = c.values().sum();
    references
        .iter()
        .map(|r| {
            let r = tokenize(r.as_ref());
            let rg = ngrams(&r, n);
            let r_total: usize = rg.values().sum();
            if c_total == 0 || r_total == 0 {
                return 0.0;
            }
            let m = overlap(&c, &rg) as f64;
            f1(m / c_total as f64, m / r_total as f64)
        })
        .fold(0.0, f64::max)
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence, best over references.
pub fn rouge_l<S: AsRef<str>>(candidate: &str, references: &[S]) -> f64 {
    let cand = tokenize(candidate);
    references
        .iter()
        .map(|r| {
            let r = tokenize(r.as_ref());
            if cand.is_empty() || r.is_empty() {
                return 0.0;
            }
            let l = lcs(&cand, &r) as f64;
            f1(l / cand.len() as f64, l / r.len() as f64)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CiderScore {
    /// Mean over items.
    pub score: f64,
    pub per_item: Vec<f64>,
}

type Vector = BTreeMap<Vec<String>, f64>;

fn tfidf(tokens: &[String], n: usize, df: &BTreeMap<Vec<String>, usize>, docs: f64) -> Vector {
    ngrams(tokens, n)
        .into_iter()
        .map(|(g, tf)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g.to_vec(), tf as f64 * (docs / d).ln())
        })
        .collect()
}

fn norm(v: &Vector) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// CIDEr over a corpus of (candidate, references) items.
///
/// For each order n in 1..=4, every sentence becomes a vector of
/// `count(g) * ln(N / max(1, df(g)))`, where N is the number of items and
/// df(g) the number of items whose references contain g. An item scores
/// `10 * mean_n mean_refs cos(candidate, reference)`.
pub fn cider<S: AsRef<str>>(candidates: &[S], references: &[Vec<S>]) -> CiderScore {
    let items = candidates.len().min(references.len());
    if items == 0 {
        return CiderScore::default();
    }
    let cands: Vec<Vec<String>> = candidates[..items]
        .iter()
        .map(|c| tokenize(c.as_ref()))
        .collect();
    let refs: Vec<Vec<Vec<String>>> = references[..items]
        .iter()
        .map(|rs| rs.iter().map(|r| tokenize(r.as_ref())).collect())
        .collect();
    let docs = items as f64;
    let mut df: Vec<BTreeMap<Vec<String>, usize>> = vec![BTreeMap::new(); CIDER_MAX_N];
    for rs in &refs {
        for (n, table) in df.iter_mut().enumerate() {
            let seen: BTreeSet<&[String]> = rs
                .iter()
                .flat_map(|r| ngrams(r, n + 1).into_keys())
                .collect();
            for g in seen {
                *table.entry(g.to_vec()).or_insert(0) += 1;
            }
        }
    }
    let per_item: Vec<f64> = cands
        .iter()
        .zip(&refs)
        .map(|(c, rs)| {
            if c.is_empty() || rs.is_empty() {
                return 0.0;
            }
            let per_n: f64 = (0..CIDER_MAX_N)
                .map(|n| {
                    let cv = tfidf(c, n + 1, &df[n], docs);
                    let sims = rs
                        .iter()
                        .map(|r| cosine(&cv, &tfidf(r, n + 1, &df[n], docs)))
                        .collect();
                    sorted_sum(sims) / rs.len() as f64
                })
                .sum();
            CIDER_SCALE * per_n / CIDER_MAX_N as f64
        })
        .collect();
    CiderScore {
        score: per_item.iter().sum::<f64>() / items as f64,
        per_item,
    }
}

/// All summary metrics of one candidate set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryScores {
    pub cider: f64,
    pub rouge_l: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub items: usize,
}

/// Corpus CIDEr and BLEU, mean ROUGE-L.
pub fn summary_scores<S: AsRef<str>>(candidates: &[S], references: &[Vec<S>]) -> SummaryScores {
    let items = candidates.len().min(references.len());
    let rouge = if items == 0 {
        0.0
    } else {
        candidates
            .iter()
            .zip(references)
            .map(|(c, r)| rouge_l(c.as_ref(), r))
            .sum::<f64>()
            / items as f64
    };
    SummaryScores {
        cider: cider(candidates, references).score,
        rouge_l: rouge,
        bleu1: corpus_bleu(candidates, references, 1),
        bleu2: corpus_bleu(candidates, references, 2),
        bleu3: corpus_bleu(candidates, references, 3),
        bleu4: corpus_bleu(candidates, references, 4),
        items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: &str = "Camera wearer is washing a car with a water hose.";

    #[test]
    fn tokenizer() {
        assert_eq!(
            tokenize("  The CAR, washed! "),
            vec!["the", "car", "washed"]
        );
        assert!(tokenize(" .,; ").is_empty());
    }

    #[test]
    fn identity() {
        assert_eq!(bleu(S, &[S], 4), 1.0);
        assert_eq!(rouge_l(S, &[S]), 1.0);
        assert_eq!(rouge_n(S, &[S], 2), 1.0);
        assert_eq!(cider(&[S], &[vec![S]]).score, 0.0);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        assert_eq!(bleu("", &[S], 4), 0.0);
        assert_eq!(rouge_l("", &[S]), 0.0);
        assert_eq!(rouge_n("...", &[S], 1), 0.0);
        assert_eq!(
            cider(&["", S], &[vec![S], vec!["a dog runs"]]).per_item[0],
            0.0
        );
        assert_eq!(bleu(S, &[] as &[&str], 4), 0.0);
    }

    #[test]
    fn brevity_penalty() {
        // 3 of 5 reference tokens, all matching
        let b = bleu("the cat sat", &["the cat sat on mats"], 1);
        assert!((b - (1.0f64 - 5.0 / 3.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn reference_order_does_not_matter() {
        let refs = [
            "a man washes a car",
            "someone cleans the car with a hose",
            "car wash",
        ];
        let rev: Vec<&str> = refs.iter().rev().copied().collect();
        let c = "a man cleans a car with a hose";
        assert_eq!(bleu(c, &refs, 4), bleu(c, &rev, 4));
        assert_eq!(rouge_l(c, &refs), rouge_l(c, &rev));
        let corpus =
            |r: &[&str]| cider(&[c, "dough on a scale"], &[r.to_vec(), vec!["weigh dough"]]);
        assert_eq!(corpus(&refs), corpus(&rev));
    }
}
