//! Label vocabularies for verbs, nouns and relations.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relation between the camera wearer and the verb node.
pub const ACTION: &str = "action";
/// Relation between the verb node and a direct object.
pub const DIRECT_OBJECT: &str = "direct object";

pub const LEFT_HAND: &str = "left hand";
pub const RIGHT_HAND: &str = "right hand";
pub const BOTH_HANDS: &str = "both hands";

/// Returns true for the three hand nouns.
pub fn is_hand(noun: &str) -> bool {
    matches!(noun, LEFT_HAND | RIGHT_HAND | BOTH_HANDS)
}

/// Returns true for relations that cannot be chosen freely by annotators.
pub fn is_reserved_relation(relation: &str) -> bool {
    relation == ACTION || relation == DIRECT_OBJECT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Verb,
    Noun,
    Relation,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Verb => "verb",
            LabelKind::Noun => "noun",
            LabelKind::Relation => "relation",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("duplicate {kind} label {label:?}")]
    Duplicate { kind: LabelKind, label: String },
    #[error("empty {kind} label")]
    Empty { kind: LabelKind },
}

/// An ordered set of names with dense ids.
#[derive(Debug, Clone, Default)]
struct LabelSet {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl LabelSet {
    fn build(kind: LabelKind, names: Vec<String>) -> Result<Self, TaxonomyError> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(TaxonomyError::Empty { kind });
            }
            if index.insert(name.clone(), i as u32).is_some() {
                return Err(TaxonomyError::Duplicate {
                    kind,
                    label: name.clone(),
                });
            }
        }
        Ok(Self { names, index })
    }
}

impl PartialEq for LabelSet {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for LabelSet {}

/// Verb, noun and relation vocabularies.
///
/// Lookup by name and by id are mutually consistent: `name(k, id(k, n)) == n`.
/// The relations `action` and `direct object` are always present; the
/// constructor prepends whichever is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyLists", into = "TaxonomyLists")]
pub struct Taxonomy {
    verbs: LabelSet,
    nouns: LabelSet,
    relations: LabelSet,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyLists {
    verbs: Vec<String>,
    nouns: Vec<String>,
    relations: Vec<String>,
}

impl TryFrom<TaxonomyLists> for Taxonomy {
    type Error = TaxonomyError;

    fn try_from(lists: TaxonomyLists) -> Result<Self, Self::Error> {
        Taxonomy::new(lists.verbs, lists.nouns, lists.relations)
    }
}

impl From<Taxonomy> for TaxonomyLists {
    fn from(t: Taxonomy) -> Self {
        TaxonomyLists {
            verbs: t.verbs.names,
            nouns: t.nouns.names,
            relations: t.relations.names,
        }
    }
}

impl Taxonomy {
    pub fn new<V, N, R>(verbs: V, nouns: N, relations: R) -> Result<Self, TaxonomyError>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        let mut relations: Vec<String> = relations.into_iter().map(Into::into).collect();
        for reserved in [DIRECT_OBJECT, ACTION] {
            if !relations.iter().any(|r| r == reserved) {
                relations.insert(0, reserved.to_string());
            }
        }
        Ok(Self {
            verbs: LabelSet::build(LabelKind::Verb, verbs.into_iter().map(Into::into).collect())?,
            nouns: LabelSet::build(LabelKind::Noun, nouns.into_iter().map(Into::into).collect())?,
            relations: LabelSet::build(LabelKind::Relation, relations)?,
        })
    }

    /// The Ego4D-EASG vocabulary: 218 verbs, 407 nouns and 16 relations
    /// (`action`, `direct object` and fourteen prepositions).
    pub fn ego4d_easg() -> &'static Taxonomy {
        static TAXONOMY: OnceLock<Taxonomy> = OnceLock::new();
        TAXONOMY.get_or_init(|| {
            serde_json::from_str(include_str!("../data/ego4d_easg_taxonomy.json"))
                .expect("embedded taxonomy is well-formed")
        })
    }

    fn set(&self, kind: LabelKind) -> &LabelSet {
        match kind {
            LabelKind::Verb => &self.verbs,
            LabelKind::Noun => &self.nouns,
            LabelKind::Relation => &self.relations,
        }
    }

    pub fn id(&self, kind: LabelKind, name: &str) -> Option<u32> {
        self.set(kind).index.get(name).copied()
    }

    pub fn name(&self, kind: LabelKind, id: u32) -> Option<&str> {
        self.set(kind).names.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, kind: LabelKind, name: &str) -> bool {
        self.set(kind).index.contains_key(name)
    }

    pub fn labels(&self, kind: LabelKind) -> &[String] {
        &self.set(kind).names
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs.names
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns.names
    }

    pub fn relations(&self) -> &[String] {
        &self.relations.names
    }

    pub fn len(&self, kind: LabelKind) -> usize {
        self.set(kind).names.len()
    }

    /// Sort key placing known labels in id order ahead of unknown ones.
    pub fn order_key<'a>(&self, kind: LabelKind, name: &'a str) -> (u32, &'a str) {
        (self.id(kind, name).unwrap_or(u32::MAX), name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ego4d_vocabulary_sizes() {
        let t = Taxonomy::ego4d_easg();
        assert_eq!(t.len(LabelKind::Noun), 407);
        assert_eq!(t.len(LabelKind::Verb), 218);
        assert_eq!(t.len(LabelKind::Relation), 16);
        assert!(t.contains(LabelKind::Relation, ACTION));
        assert!(t.contains(LabelKind::Relation, DIRECT_OBJECT));
        assert!(t.contains(LabelKind::Noun, LEFT_HAND));
    }

    #[test]
    fn lookup_is_consistent() {
        let t = Taxonomy::ego4d_easg();
        for kind in [LabelKind::Verb, LabelKind::Noun, LabelKind::Relation] {
            for (i, name) in t.labels(kind).iter().enumerate() {
                assert_eq!(t.id(kind, name), Some(i as u32));
                assert_eq!(t.name(kind, i as u32), Some(name.as_str()));
            }
        }
    }

    #[test]
    fn reserved_relations_are_inserted() {
        let t = Taxonomy::new(["take"], ["bowl"], ["with"]).unwrap();
        assert_eq!(t.relations(), &["action", "direct object", "with"]);
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = Taxonomy::new(["take", "take"], ["bowl"], ["with"]).unwrap_err();
        assert_eq!(
            err,
            TaxonomyError::Duplicate {
                kind: LabelKind::Verb,
                label: "take".into()
            }
        );
    }

    #[test]
    fn serde_round_trip() {
        let t = Taxonomy::new(["take"], ["bowl", "left hand"], ["with", "on"]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Taxonomy = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}
