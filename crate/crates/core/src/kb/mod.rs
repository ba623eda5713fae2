//! In-memory knowledge base: concepts, entities, relations, the three
//! disjoint triple stores (instanceOf, subClassOf, relational), attribute
//! facts with qualifiers, and the ontology view (domain, range, type) that
//! candidate pruning consults.

mod builder;
mod json;
pub mod label;
pub mod literal;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

pub use builder::KbBuilder;
pub use literal::{CompareOp, Literal};

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(EntityId, "E#");
id_type!(ConceptId, "C#");
id_type!(RelationId, "R#");

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("cannot read knowledge base file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed knowledge base JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: unknown {category} id '{id}'")]
    DanglingReference { field: String, category: &'static str, id: String },
    #[error("{field}: duplicate {category} id '{id}'")]
    DuplicateId { field: String, category: &'static str, id: String },
    #[error("{field}: {category} label '{label}' is empty or collides with another label")]
    BadLabel { field: String, category: &'static str, label: String },
    #[error("{field}: quantity value is not finite")]
    NonFiniteQuantity { field: String },
    #[error("subClassOf graph has a cycle through concept '{0}'")]
    Cycle(String),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptId),
    #[error("unknown relation {0}")]
    UnknownRelation(RelationId),
}

/// A named element of one category. `key` is the external string id.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub key: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationInfo {
    pub key: String,
    pub label: String,
    pub domain: Vec<ConceptId>,
    pub range: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qualifier {
    pub key: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub qualifiers: Vec<Qualifier>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeFact {
    pub entity: EntityId,
    pub key: String,
    pub value: Literal,
    pub qualifiers: Vec<Qualifier>,
}

/// Immutable after construction; every accessor is a read.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub(crate) concepts: Vec<Element>,
    pub(crate) entities: Vec<Element>,
    pub(crate) relations: Vec<RelationInfo>,
    /// T_e, per entity, sorted.
    pub(crate) instance_of: Vec<Vec<ConceptId>>,
    /// T_c as (child, parent), sorted.
    pub(crate) subclass_of: Vec<(ConceptId, ConceptId)>,
    /// T_l, in load order with duplicates removed.
    pub(crate) triples: Vec<Triple>,
    pub(crate) attributes: Vec<AttributeFact>,
    index: Index,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Index {
    entity_by_label: HashMap<String, EntityId>,
    concept_by_label: HashMap<String, ConceptId>,
    relation_by_label: HashMap<String, RelationId>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    attributes_of: Vec<Vec<usize>>,
    subclasses: Vec<Vec<ConceptId>>,
    direct_instances: Vec<Vec<EntityId>>,
    by_domain: Vec<Vec<RelationId>>,
}

impl KnowledgeBase {
    pub fn empty() -> Self {
        KbBuilder::new().build().expect("empty KB is valid")
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len()).map(EntityId)
    }

    pub fn concept_ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.concepts.len()).map(ConceptId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.relations.len()).map(RelationId)
    }

    pub fn entity(&self, e: EntityId) -> Result<&Element, KbError> {
        self.entities.get(e.0).ok_or(KbError::UnknownEntity(e))
    }

    pub fn concept(&self, c: ConceptId) -> Result<&Element, KbError> {
        self.concepts.get(c.0).ok_or(KbError::UnknownConcept(c))
    }

    pub fn relation(&self, r: RelationId) -> Result<&RelationInfo, KbError> {
        self.relations.get(r.0).ok_or(KbError::UnknownRelation(r))
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        &self.entities[e.0].label
    }

    pub fn concept_label(&self, c: ConceptId) -> &str {
        &self.concepts[c.0].label
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        &self.relations[r.0].label
    }

    pub fn find_entity(&self, label: &str) -> Option<EntityId> {
        self.index.entity_by_label.get(&label::normalize(label)).copied()
    }

    pub fn find_concept(&self, label: &str) -> Option<ConceptId> {
        self.index.concept_by_label.get(&label::normalize(label)).copied()
    }

    pub fn find_relation(&self, label: &str) -> Option<RelationId> {
        self.index.relation_by_label.get(&label::normalize(label)).copied()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn attributes(&self) -> &[AttributeFact] {
        &self.attributes
    }

    pub fn subclass_pairs(&self) -> &[(ConceptId, ConceptId)] {
        &self.subclass_of
    }

    /// Triple indices with `e` as head.
    pub fn outgoing(&self, e: EntityId) -> &[usize] {
        &self.index.outgoing[e.0]
    }

    /// Triple indices with `e` as tail.
    pub fn incoming(&self, e: EntityId) -> &[usize] {
        &self.index.incoming[e.0]
    }

    /// Attribute fact indices for `e`.
    pub fn attributes_of(&self, e: EntityId) -> &[usize] {
        &self.index.attributes_of[e.0]
    }

    /// C(e): direct instanceOf concepts, no subclass closure.
    pub fn type_of(&self, e: EntityId) -> Result<&[ConceptId], KbError> {
        self.instance_of.get(e.0).map(Vec::as_slice).ok_or(KbError::UnknownEntity(e))
    }

    /// R(r): declared range.
    pub fn range_of(&self, r: RelationId) -> Result<&[ConceptId], KbError> {
        self.relation(r).map(|info| info.range.as_slice())
    }

    pub fn domain_of(&self, r: RelationId) -> Result<&[ConceptId], KbError> {
        self.relation(r).map(|info| info.domain.as_slice())
    }

    /// D⁻(c): relations whose declared domain contains `c`.
    pub fn relations_with_domain(&self, c: ConceptId) -> Result<&[RelationId], KbError> {
        self.index.by_domain.get(c.0).map(Vec::as_slice).ok_or(KbError::UnknownConcept(c))
    }

    /// `c` together with every concept below it in the subClassOf graph.
    pub fn descendants(&self, c: ConceptId) -> Result<BTreeSet<ConceptId>, KbError> {
        self.concept(c)?;
        let mut seen = BTreeSet::from([c]);
        let mut stack = vec![c];
        while let Some(next) = stack.pop() {
            for &child in &self.index.subclasses[next.0] {
                if seen.insert(child) {
                    stack.push(child);
                }
            }
        }
        Ok(seen)
    }

    /// Entities typed with `c` or any of its descendants.
    pub fn instances_of(&self, c: ConceptId) -> Result<BTreeSet<EntityId>, KbError> {
        let mut out = BTreeSet::new();
        for concept in self.descendants(c)? {
            out.extend(self.index.direct_instances[concept.0].iter().copied());
        }
        Ok(out)
    }

    fn build_index(&mut self) {
        let n_e = self.entities.len();
        let n_c = self.concepts.len();
        let mut index = Index {
            outgoing: vec![Vec::new(); n_e],
            incoming: vec![Vec::new(); n_e],
            attributes_of: vec![Vec::new(); n_e],
            subclasses: vec![Vec::new(); n_c],
            direct_instances: vec![Vec::new(); n_c],
            by_domain: vec![Vec::new(); n_c],
            ..Index::default()
        };
        for (i, el) in self.entities.iter().enumerate() {
            index.entity_by_label.insert(label::normalize(&el.label), EntityId(i));
        }
        for (i, el) in self.concepts.iter().enumerate() {
            index.concept_by_label.insert(label::normalize(&el.label), ConceptId(i));
        }
        for (i, rel) in self.relations.iter().enumerate() {
            index.relation_by_label.insert(label::normalize(&rel.label), RelationId(i));
            for c in &rel.domain {
                index.by_domain[c.0].push(RelationId(i));
            }
        }
        for (i, t) in self.triples.iter().enumerate() {
            index.outgoing[t.head.0].push(i);
            index.incoming[t.tail.0].push(i);
        }
        for (i, fact) in self.attributes.iter().enumerate() {
            index.attributes_of[fact.entity.0].push(i);
        }
        for &(child, parent) in &self.subclass_of {
            index.subclasses[parent.0].push(child);
        }
        for (e, types) in self.instance_of.iter().enumerate() {
            for c in types {
                index.direct_instances[c.0].push(EntityId(e));
            }
        }
        self.index = index;
    }
}

#[cfg(test)]
pub(crate) mod fixture {
    use super::*;

    pub const FIXTURE_JSON: &str = include_str!("../../tests/data/fixture1.json");

    pub fn fixture() -> KnowledgeBase {
        KnowledgeBase::from_json_str(FIXTURE_JSON).expect("fixture parses")
    }
}

#[cfg(test)]
mod tests {
    use super::fixture::fixture;
    use super::*;

    fn labels_c(kb: &KnowledgeBase, ids: &[ConceptId]) -> BTreeSet<String> {
        ids.iter().map(|&c| kb.concept_label(c).to_string()).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fixture_counts() {
        let kb = fixture();
        assert_eq!((kb.num_entities(), kb.num_concepts(), kb.num_relations()), (4, 5, 2));
    }

    #[test]
    fn type_of_is_direct() {
        let kb = fixture();
        let steve = kb.find_entity("Steve Bisciotti").unwrap();
        let ravens = kb.find_entity("Baltimore Ravens").unwrap();
        assert_eq!(labels_c(&kb, kb.type_of(steve).unwrap()), set(&["sports team owner", "human"]));
        assert_eq!(labels_c(&kb, kb.type_of(ravens).unwrap()), set(&["sports team"]));
        assert!(matches!(kb.type_of(EntityId(99)), Err(KbError::UnknownEntity(_))));
    }

    #[test]
    fn entity_without_types() {
        let mut b = KbBuilder::new();
        b.entity("x", "Loner").unwrap();
        let kb = b.build().unwrap();
        assert!(kb.type_of(EntityId(0)).unwrap().is_empty());
    }

    #[test]
    fn range_and_domain_operators() {
        let kb = fixture();
        let owned = kb.find_relation("teams owned").unwrap();
        let arena = kb.find_relation("arena stadium").unwrap();
        assert_eq!(labels_c(&kb, kb.range_of(owned).unwrap()), set(&["sports team"]));
        assert_eq!(labels_c(&kb, kb.range_of(arena).unwrap()), set(&["sports facility"]));

        let owner = kb.find_concept("sports team owner").unwrap();
        let team = kb.find_concept("sports team").unwrap();
        let human = kb.find_concept("human").unwrap();
        assert_eq!(kb.relations_with_domain(owner).unwrap(), &[owned]);
        assert_eq!(kb.relations_with_domain(team).unwrap(), &[arena]);
        assert!(kb.relations_with_domain(human).unwrap().is_empty());
        assert!(matches!(kb.range_of(RelationId(7)), Err(KbError::UnknownRelation(_))));
    }

    #[test]
    fn empty_range() {
        let mut b = KbBuilder::new();
        b.relation("r", "loose", &[], &[]).unwrap();
        let kb = b.build().unwrap();
        assert!(kb.range_of(RelationId(0)).unwrap().is_empty());
    }

    #[test]
    fn instances_use_closure() {
        let kb = fixture();
        let names = |c: &str| -> BTreeSet<String> {
            kb.instances_of(kb.find_concept(c).unwrap())
                .unwrap()
                .into_iter()
                .map(|e| kb.entity_label(e).to_string())
                .collect()
        };
        assert_eq!(names("organization"), set(&["FC Barcelona", "Baltimore Ravens"]));
        assert_eq!(names("sports facility"), set(&["Camp Nou"]));

        let mut b = KbBuilder::new();
        b.concept("c", "nothing").unwrap();
        let kb2 = b.build().unwrap();
        assert!(kb2.instances_of(ConceptId(0)).unwrap().is_empty());
        assert!(kb.instances_of(ConceptId(40)).is_err());
    }

    #[test]
    fn labels_match_case_insensitively() {
        let kb = fixture();
        assert_eq!(kb.find_entity("fc   BARCELONA"), kb.find_entity("FC Barcelona"));
        assert!(kb.find_entity("FC Barcelona").is_some());
    }
}
