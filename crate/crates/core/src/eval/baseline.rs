//! Random-guess baseline for the generation tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ActionGraph;
use crate::taxonomy::Taxonomy;

use super::generation::{
    graph_recalls, gt_triplets, EvalConfig, EvalError, GenerationCell, GenerationTable,
    GraphPredictions, LabelScore, PairPrediction, RecallSum, Task, KS, REGIMES,
};

fn uniform<R: Rng>(labels: &[String], rng: &mut R) -> Vec<LabelScore> {
    labels
        .iter()
        .map(|l| LabelScore::new(l.clone(), rng.gen::<f64>()))
        .collect()
}

/// Uniform U[0, 1) scores for every verb, every object class of every slot,
/// and every relation of every ground-truth node pair.
pub fn random_predictions<R: Rng>(
    g: &ActionGraph,
    tax: &Taxonomy,
    relations: &[String],
    cfg: &EvalConfig,
    rng: &mut R,
) -> GraphPredictions {
    let mut pairs: Vec<_> = gt_triplets(g, cfg.include_direct_object)
        .into_iter()
        .map(|t| (t.src, t.dst))
        .collect();
    pairs.dedup();
    let verbs = uniform(tax.verbs(), rng);
    let objects = (0..g.objects().count())
        .map(|_| uniform(tax.nouns(), rng))
        .collect();
    let relations = pairs
        .into_iter()
        .map(|(src, dst)| PairPrediction {
            src,
            dst,
            relations: uniform(relations, rng),
        })
        .collect();
    GraphPredictions {
        clip_id: g.clip_id.clone(),
        timestep: g.timestep,
        verbs,
        objects,
        relations,
    }
}

/// Random baseline over all taxonomy relations.
pub fn random_baseline(
    graphs: &[ActionGraph],
    tax: &Taxonomy,
    seed: u64,
    trials: usize,
    cfg: &EvalConfig,
) -> Result<GenerationTable, EvalError> {
    random_baseline_with(graphs, tax, tax.relations(), seed, trials, cfg)
}

/// Monte-Carlo Recall@K of uniform guessing over `relations`, averaged
/// over `trials`. The same seed gives the same table bit for bit.
pub fn random_baseline_with(
    graphs: &[ActionGraph],
    tax: &Taxonomy,
    relations: &[String],
    seed: u64,
    trials: usize,
    cfg: &EvalConfig,
) -> Result<GenerationTable, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let combos: Vec<(bool, Task)> = REGIMES
        .iter()
        .flat_map(|&c| Task::ALL.iter().map(move |&t| (c, t)))
        .collect();
    let mut totals = vec![[0.0f64; KS.len()]; combos.len()];
    for _ in 0..trials {
        let mut sums = vec![[RecallSum::default(); KS.len()]; combos.len()];
        for g in graphs {
            let p = random_predictions(g, tax, relations, cfg, &mut rng);
            for (s, &(constrained, task)) in sums.iter_mut().zip(&combos) {
                let rs = graph_recalls(Some(&p), g, task, constrained, &KS, cfg, tax)?;
                for (slot, r) in s.iter_mut().zip(rs) {
                    slot.add(r);
                }
            }
        }
        for (t, s) in totals.iter_mut().zip(&sums) {
            for (acc, v) in t.iter_mut().zip(s) {
                *acc += v.value(cfg.micro);
            }
        }
    }
    let cells = combos
        .iter()
        .zip(&totals)
        .flat_map(|(&(constrained, task), t)| {
            KS.iter().zip(t).map(move |(&k, sum)| GenerationCell {
                constrained,
                task,
                k,
                recall: sum / trials as f64,
            })
        })
        .collect();
    Ok(GenerationTable { cells })
}
