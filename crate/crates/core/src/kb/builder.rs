use std::collections::{HashMap, HashSet};

use super::{
    label, AttributeFact, ConceptId, Element, EntityId, KbError, KnowledgeBase, Literal, Qualifier,
    RelationId, RelationInfo, Triple,
};

/// Incremental constructor shared by the JSON loader and the synthetic
/// generators. `build` validates and indexes.
#[derive(Debug, Default)]
pub struct KbBuilder {
    concepts: Vec<Element>,
    entities: Vec<Element>,
    relations: Vec<RelationInfo>,
    instance_of: Vec<Vec<ConceptId>>,
    subclass_of: Vec<(ConceptId, ConceptId)>,
    triples: Vec<Triple>,
    attributes: Vec<AttributeFact>,
    keys: [HashMap<String, usize>; 3],
    labels: [HashSet<String>; 3],
}

const CATEGORY: [&str; 3] = ["entity", "concept", "relation"];
const FIELD: [&str; 3] = ["entities", "concepts", "relations"];

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn register(&mut self, slot: usize, key: &str, text: &str) -> Result<usize, KbError> {
        let pos = self.keys[slot].len();
        let field = format!("{}[{pos}]", FIELD[slot]);
        if self.keys[slot].contains_key(key) {
            return Err(KbError::DuplicateId { field, category: CATEGORY[slot], id: key.to_string() });
        }
        let norm = label::normalize(text);
        if norm.is_empty() || !self.labels[slot].insert(norm) {
            return Err(KbError::BadLabel { field, category: CATEGORY[slot], label: text.to_string() });
        }
        self.keys[slot].insert(key.to_string(), pos);
        Ok(pos)
    }

    pub fn entity(&mut self, key: &str, text: &str) -> Result<EntityId, KbError> {
        let id = self.register(0, key, text)?;
        self.entities.push(Element { key: key.to_string(), label: text.to_string() });
        self.instance_of.push(Vec::new());
        Ok(EntityId(id))
    }

    pub fn concept(&mut self, key: &str, text: &str) -> Result<ConceptId, KbError> {
        let id = self.register(1, key, text)?;
        self.concepts.push(Element { key: key.to_string(), label: text.to_string() });
        Ok(ConceptId(id))
    }

    pub fn relation(
        &mut self,
        key: &str,
        text: &str,
        domain: &[ConceptId],
        range: &[ConceptId],
    ) -> Result<RelationId, KbError> {
        for &c in domain.iter().chain(range) {
            self.check_concept(c)?;
        }
        let id = self.register(2, key, text)?;
        let mut domain = domain.to_vec();
        let mut range = range.to_vec();
        domain.sort_unstable();
        domain.dedup();
        range.sort_unstable();
        range.dedup();
        self.relations.push(RelationInfo { key: key.to_string(), label: text.to_string(), domain, range });
        Ok(RelationId(id))
    }

    pub fn entity_by_key(&self, key: &str) -> Option<EntityId> {
        self.keys[0].get(key).copied().map(EntityId)
    }

    pub fn concept_by_key(&self, key: &str) -> Option<ConceptId> {
        self.keys[1].get(key).copied().map(ConceptId)
    }

    pub fn relation_by_key(&self, key: &str) -> Option<RelationId> {
        self.keys[2].get(key).copied().map(RelationId)
    }

    fn check_entity(&self, e: EntityId) -> Result<(), KbError> {
        (e.0 < self.entities.len()).then_some(()).ok_or(KbError::UnknownEntity(e))
    }

    fn check_concept(&self, c: ConceptId) -> Result<(), KbError> {
        (c.0 < self.concepts.len()).then_some(()).ok_or(KbError::UnknownConcept(c))
    }

    pub fn instance_of(&mut self, e: EntityId, c: ConceptId) -> Result<(), KbError> {
        self.check_entity(e)?;
        self.check_concept(c)?;
        self.instance_of[e.0].push(c);
        Ok(())
    }

    pub fn subclass_of(&mut self, child: ConceptId, parent: ConceptId) -> Result<(), KbError> {
        self.check_concept(child)?;
        self.check_concept(parent)?;
        self.subclass_of.push((child, parent));
        Ok(())
    }

    pub fn triple(
        &mut self,
        head: EntityId,
        relation: RelationId,
        tail: EntityId,
        qualifiers: Vec<Qualifier>,
    ) -> Result<(), KbError> {
        self.check_entity(head)?;
        self.check_entity(tail)?;
        if relation.0 >= self.relations.len() {
            return Err(KbError::UnknownRelation(relation));
        }
        for q in &qualifiers {
            if !q.value.is_valid() {
                return Err(KbError::NonFiniteQuantity { field: format!("triples[{}]", self.triples.len()) });
            }
        }
        self.triples.push(Triple { head, relation, tail, qualifiers });
        Ok(())
    }

    pub fn attribute(
        &mut self,
        entity: EntityId,
        key: &str,
        value: Literal,
        qualifiers: Vec<Qualifier>,
    ) -> Result<(), KbError> {
        self.check_entity(entity)?;
        if !value.is_valid() || qualifiers.iter().any(|q| !q.value.is_valid()) {
            return Err(KbError::NonFiniteQuantity {
                field: format!("{}.attributes[{key}]", self.entities[entity.0].key),
            });
        }
        self.attributes.push(AttributeFact { entity, key: key.to_string(), value, qualifiers });
        Ok(())
    }

    pub fn build(mut self) -> Result<KnowledgeBase, KbError> {
        for types in &mut self.instance_of {
            types.sort_unstable();
            types.dedup();
        }
        self.subclass_of.sort_unstable();
        self.subclass_of.dedup();
        check_acyclic(&self.concepts, &self.subclass_of)?;

        let mut seen = HashSet::new();
        self.triples.retain(|t| seen.insert((t.head, t.relation, t.tail)));
        // grouped per entity, matching the on-disk layout
        self.attributes.sort_by_key(|a| a.entity);

        let mut kb = KnowledgeBase {
            concepts: self.concepts,
            entities: self.entities,
            relations: self.relations,
            instance_of: self.instance_of,
            subclass_of: self.subclass_of,
            triples: self.triples,
            attributes: self.attributes,
            index: Default::default(),
        };
        kb.build_index();
        Ok(kb)
    }
}

fn check_acyclic(concepts: &[Element], edges: &[(ConceptId, ConceptId)]) -> Result<(), KbError> {
    let mut parents = vec![Vec::new(); concepts.len()];
    for &(child, parent) in edges {
        parents[child.0].push(parent.0);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; concepts.len()];
    for start in 0..concepts.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            if let Some(&p) = parents[node].get(top.1) {
                top.1 += 1;
                match state[p] {
                    0 => {
                        state[p] = 1;
                        stack.push((p, 0));
                    }
                    1 => return Err(KbError::Cycle(concepts[p].label.clone())),
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}
