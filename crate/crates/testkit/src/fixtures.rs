//! Hand-built fixtures with known answers.

use easg_core::consensus::{
    detect_disagreements, merge, AnnotatorGraph, Answer, ValidationQuestion,
};
use easg_core::eval::{gt_triplets, GraphPredictions, LabelScore, PairPrediction};
use easg_core::formats::{
    parse_triplet_string, ActionPair, ActionPrediction, ClipAnnotations, ClipRecord, DataSplit,
    DatasetFile, TimestepAnnotations,
};
use easg_core::temporal::{recollect, CorrespondenceOverride};
use easg_core::{
    direct_objects, ActionGraph, BBox, FrameTriplet, Grounding, Node, NodeRef, Provenance,
    SeedAnnotation, Taxonomy,
};

pub fn tax() -> &'static Taxonomy {
    Taxonomy::ego4d_easg()
}

/// Parses a triplet string into a graph at (clip, timestep) whose objects
/// all carry a box in each of the three frames.
pub fn graph(text: &str, clip_id: &str, timestep: u32, x: f64) -> ActionGraph {
    let mut g = parse_triplet_string(text, tax())
        .unwrap_or_else(|e| panic!("{text}: {e}"))
        .graph;
    assert!(
        parse_triplet_string(text, tax())
            .unwrap()
            .unknown
            .is_empty(),
        "{text}"
    );
    g.clip_id = clip_id.into();
    g.timestep = timestep;
    let base = timestep as u64 * 300;
    g.frames = FrameTriplet::new(base, base + 60, base + 120);
    g.frames.pre.timestamp = Some(timestep as f64 * 10.0);
    g.frames.pnr.timestamp = Some(timestep as f64 * 10.0 + 2.0);
    g.frames.post.timestamp = Some(timestep as f64 * 10.0 + 4.0);
    for n in &mut g.nodes {
        if let Node::Object(o) = n {
            let b = BBox::new(x + 20.0 * o.instance_id as f64, 40.0, 64.0, 48.0);
            o.grounding = Grounding::uniform(b);
        }
    }
    g.provenance = Provenance::Seed;
    g
}

/// The three refinements of the bowl/dough disagreement example.
pub fn disagreement_inputs(clip_id: &str, timestep: u32) -> Vec<AnnotatorGraph> {
    let texts = [
        "CW - verb - take; take - direct object - bowl; take - with - left hand; bowl - with - flour",
        "CW - verb - take; take - direct object - bowl; take - on - left hand; take - with - right hand; bowl - from - scale",
        "CW - verb - press; press - direct object - dough; press - with - left hand; press - with - both hands",
    ];
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let id = format!("ann-{}", i + 1);
            let mut g = graph(t, clip_id, timestep, 100.0 * (i + 1) as f64);
            g.provenance = Provenance::Annotator {
                annotator_id: id.clone(),
            };
            AnnotatorGraph::new(id, g)
        })
        .collect()
}

/// Answers picking take/bowl, `with`, the left hand, rejecting the scale
/// and confirming the flour.
pub fn disagreement_answers(questions: &[ValidationQuestion]) -> Vec<Answer> {
    questions
        .iter()
        .map(|q| {
            let id = q.id.as_str();
            if id == "verb-noun" {
                Answer::option(id, "take bowl", "validator")
            } else if id.starts_with("preposition:") {
                Answer::option(id, "with", "validator")
            } else if id.starts_with("hand:") {
                Answer::option(id, "left hand", "validator")
            } else {
                let yes = q.statement.as_deref() == Some("The bowl is with flour");
                Answer::yes_no(id, yes, "validator")
            }
        })
        .collect()
}

/// Edges of the consensus graph for the answers above, as
/// (source, relation, target) labels.
pub const DISAGREEMENT_CONSENSUS_EDGES: [(&str, &str, &str); 4] = [
    ("<cw>", "action", "take"),
    ("bowl", "with", "flour"),
    ("take", "direct object", "bowl"),
    ("take", "with", "left hand"),
];

const COOKING: [&str; 5] = [
    "",
    "CW - verb - add; add - direct object - flour; add - to - bowl; add - with - right hand",
    "CW - verb - press; press - direct object - dough; press - with - both hands",
    "CW - verb - move; move - direct object - dough; move - from - bowl; move - to - scale",
    "CW - verb - remove; remove - direct object - dough; remove - from - scale; remove - to - bowl",
];

const CLEANING: [&str; 10] = [
    "CW - verb - pick-up; pick-up - direct object - hose; pick-up - with - right hand",
    "CW - verb - point; point - direct object - hose; point - towards - car",
    "CW - verb - spray; spray - direct object - car; spray - with - water hose",
    "CW - verb - wash; wash - direct object - car; wash - with - sponge",
    "CW - verb - raise; raise - direct object - wiper",
    "CW - verb - wash; wash - direct object - car; wash - with - sponge",
    "CW - verb - push-down; push-down - direct object - wiper",
    "CW - verb - put; put - direct object - sponge; put - on - table",
    "CW - verb - drop; drop - direct object - hose",
    "CW - verb - wipe; wipe - direct object - car; wipe - with - cloth",
];

const MECHANIC: [&str; 5] = [
    "CW - verb - hold; hold - direct object - screwdriver; hold - with - right hand",
    "CW - verb - turn; turn - direct object - screw; turn - with - screwdriver",
    "CW - verb - remove; remove - direct object - screw; remove - from - wheel",
    "CW - verb - put; put - direct object - screw; put - on - table",
    "CW - verb - take; take - direct object - spanner",
];

fn clip(
    clip_id: &str,
    scenario: &str,
    split: DataSplit,
    texts: &[&str],
    first: Option<ActionGraph>,
) -> ClipRecord {
    let raw: Vec<ActionGraph> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| match (i, &first) {
            (0, Some(g)) => g.clone(),
            _ => graph(t, clip_id, i as u32 + 1, 10.0),
        })
        .collect();
    let dg = recollect(&raw, &CorrespondenceOverride::default())
        .expect("fixture sequence recollects")
        .graph;
    ClipRecord {
        clip_id: clip_id.into(),
        scenario: scenario.into(),
        split,
        graphs: dg.graphs,
        narrations: texts.iter().map(|t| format!("#C C {}", t.len())).collect(),
        summary: Some(format!("Camera wearer works on a {scenario} task.")),
    }
}

/// Three clips of 5, 10 and 15 graphs.
///
/// | clip        | scenario           | split | objects | boxes | seconds |
/// |-------------|--------------------|-------|---------|-------|---------|
/// | synth-cook  | Cooking            | train | 14      | 42    | 44      |
/// | synth-clean | Cleaning / laundry | train | 17      | 51    | 94      |
/// | synth-mech  | Car mechanic       | val   | 27      | 81    | 144     |
///
/// Every object has three boxes. Graph t spans 10t to 10t + 4 seconds, so a
/// clip of T graphs lasts 10T - 6 seconds. The first cooking graph is the
/// consensus of [`disagreement_inputs`], whose annotations are kept in the file.
pub fn synthetic_dataset() -> DatasetFile {
    let inputs = disagreement_inputs("synth-cook", 1);
    let questions = detect_disagreements(&inputs).expect("three inputs");
    let answers = disagreement_answers(&questions);
    let consensus = merge(&inputs, &answers).expect("answers resolve every question");
    let mechanic: Vec<&str> = MECHANIC.iter().cycle().take(15).copied().collect();
    let mut d = DatasetFile::new(tax().clone());
    d.clips = vec![
        clip(
            "synth-cook",
            "Cooking",
            DataSplit::Train,
            &COOKING,
            Some(consensus),
        ),
        clip(
            "synth-clean",
            "Cleaning / laundry",
            DataSplit::Train,
            &CLEANING,
            None,
        ),
        clip(
            "synth-mech",
            "Car mechanic",
            DataSplit::Val,
            &mechanic,
            None,
        ),
    ];
    d.annotations = vec![ClipAnnotations {
        clip_id: "synth-cook".into(),
        timesteps: vec![TimestepAnnotations {
            timestep: 1,
            annotator_graphs: inputs,
            questions,
            answers,
        }],
        overrides: CorrespondenceOverride::default(),
    }];
    d.canonical()
}

/// Path of the committed copy of [`synthetic_dataset`].
pub fn synthetic_dataset_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_dataset.json")
}

/// The one-shot anticipation example of the prompt as input graphs, with the
/// completion the model returned.
pub fn recorded_anticipation() -> (Vec<ActionGraph>, &'static str) {
    let seq = [
        "CW - verb - take; take - direct object - flour; take - from - pack; take - with - right hand",
        "CW - verb - add; add - direct object - flour; add - to - bowl; bowl - with - dough; add - with - right hand",
        "CW - verb - press; press - direct object - dough; press - with - both hands",
        "CW - verb - move; move - direct object - dough; move - from - bowl; move - to - scale",
        "CW - verb - move; move - direct object - dough; move - from - bowl; move - to - scale",
    ];
    let graphs = seq
        .iter()
        .enumerate()
        .map(|(i, t)| graph(t, "recorded", i as u32 + 1, 0.0))
        .collect();
    (
        graphs,
        "Graph 6: Camera wearer - verb - remove; remove - direct object - dough; remove - from - scale; remove - to - bowl",
    )
}

/// Twenty anticipation cases with their top-1 / top-5 action hits.
pub fn anticipation_cases() -> Vec<(ActionPrediction, ActionPair, [bool; 2])> {
    let p = |pairs: &[(&str, &str)]| ActionPrediction {
        pairs: pairs.iter().map(|(v, n)| ActionPair::new(*v, *n)).collect(),
    };
    let gt = |v: &str, n: &str| ActionPair::new(v, n);
    vec![
        (
            p(&[("remove", "dough")]),
            gt("remove", "dough"),
            [true, true],
        ),
        (
            p(&[("take", "bowl"), ("remove", "dough")]),
            gt("remove", "dough"),
            [false, true],
        ),
        (p(&[]), gt("take", "bowl"), [false, false]),
        (p(&[("take", "cup")]), gt("take", "bowl"), [false, false]),
        (p(&[("put", "bowl")]), gt("take", "bowl"), [false, false]),
        (
            p(&[("put", "cup"), ("take", "plate"), ("wash", "bowl")]),
            gt("take", "bowl"),
            [false, false],
        ),
        (
            p(&[
                ("a", "b"),
                ("c", "d"),
                ("e", "f"),
                ("g", "h"),
                ("take", "bowl"),
            ]),
            gt("take", "bowl"),
            [false, true],
        ),
        (
            p(&[
                ("a", "b"),
                ("c", "d"),
                ("e", "f"),
                ("g", "h"),
                ("i", "j"),
                ("take", "bowl"),
            ]),
            gt("take", "bowl"),
            [false, false],
        ),
        (
            p(&[("wash", "car"), ("wash", "sponge")]),
            gt("wash", "car"),
            [true, true],
        ),
        (
            p(&[("wash", "sponge"), ("wash", "car")]),
            gt("wash", "car"),
            [false, true],
        ),
        (p(&[("spray", "car")]), gt("wash", "car"), [false, false]),
        (p(&[("wash", "hose")]), gt("wash", "car"), [false, false]),
        (
            p(&[("cut", "dough"), ("knead", "dough"), ("roll", "dough")]),
            gt("knead", "dough"),
            [false, true],
        ),
        (p(&[("knead", "dough")]), gt("knead", "dough"), [true, true]),
        (
            p(&[("open", "door"), ("close", "door")]),
            gt("open", "door"),
            [true, true],
        ),
        (
            p(&[("close", "door"), ("open", "drawer")]),
            gt("open", "door"),
            [false, false],
        ),
        (
            p(&[("pick-up", "hose")]),
            gt("pick-up", "hose"),
            [true, true],
        ),
        (
            p(&[("pick-up", "wiper"), ("raise", "wiper")]),
            gt("raise", "wiper"),
            [false, true],
        ),
        (
            p(&[("raise", "hose"), ("pick-up", "wiper")]),
            gt("raise", "wiper"),
            [false, false],
        ),
        (
            p(&[
                ("turn", "screw"),
                ("turn", "wheel"),
                ("hold", "screwdriver"),
            ]),
            gt("hold", "screwdriver"),
            [false, true],
        ),
    ]
}

/// A three-item summary corpus, one reference per item, with every metric
/// derived by hand.
///
/// | item | candidate     | reference        |
/// |------|---------------|------------------|
/// | 1    | the cat sat   | the cat sat down |
/// | 2    | a dog ran     | the dog ran      |
/// | 3    | birds fly     | birds fly high   |
pub struct NlgFixture {
    pub candidates: [&'static str; 3],
    pub references: [&'static str; 3],
}

pub const NLG_FIXTURE: NlgFixture = NlgFixture {
    candidates: ["the cat sat", "a dog ran", "birds fly"],
    references: ["the cat sat down", "the dog ran", "birds fly high"],
};

/// Expected values for [`NLG_FIXTURE`].
pub struct NlgExpected {
    pub bleu1_item1: f64,
    pub bleu2_item1: f64,
    pub corpus_bleu2: f64,
    pub rouge_l: [f64; 3],
    pub rouge1_item2: f64,
    pub cider: [f64; 3],
    pub cider_corpus: f64,
}

/// Derivation.
///
/// BLEU, item 1: every candidate unigram and bigram is in the reference, so
/// p1 = p2 = 1. c = 3, r = 4, BP = exp(1 - 4/3). BLEU-1 = BLEU-2 = exp(-1/3).
///
/// Corpus BLEU-2: unigram matches 3 + 2 + 2 of 3 + 3 + 2, so p1 = 7/8;
/// bigram matches 2 + 1 + 1 of 2 + 2 + 1, so p2 = 4/5. c = 8, r = 10,
/// BP = exp(1 - 10/8). BLEU-2 = exp(-1/4) * sqrt(7/8 * 4/5).
///
/// ROUGE-L: LCS lengths 3, 2, 2. Item 1: P = 1, R = 3/4, F = 6/7. Item 2:
/// P = R = 2/3, F = 2/3. Item 3: P = 1, R = 2/3, F = 4/5. ROUGE-1 of item 2
/// is also 2/3.
///
/// CIDEr: N = 3 documents. Unigram df: `the` = 2, every other reference word
/// 1; all reference bigrams and trigrams have df 1. Unseen n-grams use
/// df = 1. With a = ln(3/2) and b = ln 3 the weights are a for `the` and b
/// for everything else.
///
/// - item 1: n=1 cos = sqrt(a²+2b²) / sqrt(a²+3b²); n=2 two of three
///   reference bigrams, cos = 2/sqrt(6); n=3 one of two trigrams,
///   cos = 1/sqrt(2); n=4 the candidate has none, 0.
/// - item 2: n=1 candidate (a, dog, ran) all weight b, reference (the, dog,
///   ran) = (a, b, b): cos = 2b² / (sqrt(3)b * sqrt(a²+2b²)); n=2 shares
///   `dog ran` only, cos = 1/2; n=3 and n=4 0.
/// - item 3: n=1 cos = 2/sqrt(6); n=2 cos = 1/sqrt(2); n=3 and n=4 0.
///
/// Each item scores 10/4 times the sum over n; the corpus score is the
/// mean of the three.
pub fn nlg_expected() -> NlgExpected {
    let a = (1.5f64).ln();
    let b = (3.0f64).ln();
    let item1 = 2.5
        * ((a * a + 2.0 * b * b).sqrt() / (a * a + 3.0 * b * b).sqrt()
            + 2.0 / 6f64.sqrt()
            + 1.0 / 2f64.sqrt());
    let item2 = 2.5 * (2.0 * b * b / (3f64.sqrt() * b * (a * a + 2.0 * b * b).sqrt()) + 0.5);
    let item3 = 2.5 * (2.0 / 6f64.sqrt() + 1.0 / 2f64.sqrt());
    NlgExpected {
        bleu1_item1: (-1.0f64 / 3.0).exp(),
        bleu2_item1: (-1.0f64 / 3.0).exp(),
        corpus_bleu2: (-0.25f64).exp() * (7.0f64 / 8.0 * 4.0 / 5.0).sqrt(),
        rouge_l: [6.0 / 7.0, 2.0 / 3.0, 4.0 / 5.0],
        rouge1_item2: 2.0 / 3.0,
        cider: [item1, item2, item3],
        cider_corpus: (item1 + item2 + item3) / 3.0,
    }
}

/// The seed a graph would have grown from: its verb and first direct object,
/// frames and object boxes.
pub fn seed_of(g: &ActionGraph) -> SeedAnnotation {
    let dobj = direct_objects(g)
        .first()
        .and_then(|r| match r {
            NodeRef::Object(id) => g.object(*id),
            _ => None,
        })
        .expect("graph has a direct object");
    let mut s = SeedAnnotation::new(&g.clip_id, g.timestep, g.verb().expect("verb"), &dobj.noun);
    s.frames = g.frames.clone();
    s.box_object = dobj.grounding;
    s
}

/// Predictions that score the ground truth of `g`, and nothing else, at 1.
pub fn perfect_predictions(g: &ActionGraph) -> GraphPredictions {
    let mut p = GraphPredictions::empty(&g.clip_id, g.timestep);
    p.verbs = g
        .verb()
        .map(|v| LabelScore::new(v, 1.0))
        .into_iter()
        .collect();
    p.objects = g
        .objects_by_id()
        .iter()
        .map(|o| vec![LabelScore::new(&o.noun, 1.0)])
        .collect();
    p.relations = gt_triplets(g, true)
        .into_iter()
        .map(|t| PairPrediction {
            src: t.src,
            dst: t.dst,
            relations: vec![LabelScore::new(t.relation, 1.0)],
        })
        .collect();
    p
}
