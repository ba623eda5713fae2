//! Ontology-guided candidate pools. Choosing an argument narrows the pools
//! later functions draw from:
//!
//! * entity `e`: concept pool becomes C(e), relation pool becomes the
//!   union of D⁻(c) over that concept pool;
//! * relation `r`: concept pool becomes R(r);
//! * concept `c`: relation pool becomes D⁻(c).
//!
//! The entity pool is never narrowed. An empty pool is reset to its full
//! category by an explicit, logged fallback.

use std::collections::BTreeSet;

use crate::kb::{ConceptId, EntityId, KbError, KnowledgeBase, RelationId};
use crate::program::{ArgumentCategory, FunctionKind, Sketch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PoolKind {
    Entity,
    Concept,
    Relation,
}

impl PoolKind {
    pub fn of(function: FunctionKind) -> Option<PoolKind> {
        match function.category() {
            ArgumentCategory::Entity => Some(PoolKind::Entity),
            ArgumentCategory::Concept => Some(PoolKind::Concept),
            ArgumentCategory::Relation => Some(PoolKind::Relation),
            ArgumentCategory::Empty | ArgumentCategory::LiteralText => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PoolKind::Entity => "entity",
            PoolKind::Concept => "concept",
            PoolKind::Relation => "relation",
        }
    }

    pub fn category_size(self, kb: &KnowledgeBase) -> usize {
        match self {
            PoolKind::Entity => kb.num_entities(),
            PoolKind::Concept => kb.num_concepts(),
            PoolKind::Relation => kb.num_relations(),
        }
    }
}

/// A resolved KB-element argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgId {
    Entity(EntityId),
    Concept(ConceptId),
    Relation(RelationId),
}

impl ArgId {
    pub fn kind(self) -> PoolKind {
        match self {
            ArgId::Entity(_) => PoolKind::Entity,
            ArgId::Concept(_) => PoolKind::Concept,
            ArgId::Relation(_) => PoolKind::Relation,
        }
    }

    pub fn index(self) -> usize {
        match self {
            ArgId::Entity(e) => e.0,
            ArgId::Concept(c) => c.0,
            ArgId::Relation(r) => r.0,
        }
    }

    pub fn from_index(kind: PoolKind, index: usize) -> ArgId {
        match kind {
            PoolKind::Entity => ArgId::Entity(EntityId(index)),
            PoolKind::Concept => ArgId::Concept(ConceptId(index)),
            PoolKind::Relation => ArgId::Relation(RelationId(index)),
        }
    }

    pub fn label(self, kb: &KnowledgeBase) -> &str {
        match self {
            ArgId::Entity(e) => kb.entity_label(e),
            ArgId::Concept(c) => kb.concept_label(c),
            ArgId::Relation(r) => kb.relation_label(r),
        }
    }

    /// Resolves `label` in the category `kind`.
    pub fn resolve(kb: &KnowledgeBase, kind: PoolKind, label: &str) -> Option<ArgId> {
        match kind {
            PoolKind::Entity => kb.find_entity(label).map(ArgId::Entity),
            PoolKind::Concept => kb.find_concept(label).map(ArgId::Concept),
            PoolKind::Relation => kb.find_relation(label).map(ArgId::Relation),
        }
    }
}

/// One category's admissible set: either everything or an explicit,
/// sorted subset of indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pool {
    All(usize),
    Only(Vec<usize>),
}

impl Pool {
    fn only(items: impl IntoIterator<Item = usize>) -> Pool {
        let set: BTreeSet<usize> = items.into_iter().collect();
        Pool::Only(set.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        match self {
            Pool::All(n) => *n,
            Pool::Only(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: usize) -> bool {
        match self {
            Pool::All(n) => index < *n,
            Pool::Only(v) => v.binary_search(&index).is_ok(),
        }
    }

    /// Members in ascending index order.
    pub fn indices(&self) -> Vec<usize> {
        match self {
            Pool::All(n) => (0..*n).collect(),
            Pool::Only(v) => v.clone(),
        }
    }

    pub fn is_subset_of(&self, other: &Pool) -> bool {
        match self {
            Pool::All(n) => other.len() >= *n && (0..*n).all(|i| other.contains(i)),
            Pool::Only(v) => v.iter().all(|&i| other.contains(i)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolEvent {
    Update { function: FunctionKind, argument: ArgId },
    Fallback { pool: PoolKind },
}

#[derive(Debug, thiserror::Error)]
pub enum PruneError {
    #[error("{function} takes no KB-element argument")]
    NoPool { function: FunctionKind },
    #[error("{argument:?} is not a {expected} argument")]
    WrongKind { argument: ArgId, expected: &'static str },
    #[error("{argument:?} lies outside the active {pool} pool")]
    OutsidePool { argument: ArgId, pool: &'static str },
    #[error("fallback requested for the non-empty {0} pool")]
    PoolNotEmpty(&'static str),
    #[error("argument trace has {given} choices, sketch needs {needed}")]
    TraceLength { given: usize, needed: usize },
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePools {
    pub entities: Pool,
    pub concepts: Pool,
    pub relations: Pool,
    pub events: Vec<PoolEvent>,
}

impl CandidatePools {
    /// Every pool holds its full category.
    pub fn init(kb: &KnowledgeBase) -> Self {
        CandidatePools {
            entities: Pool::All(kb.num_entities()),
            concepts: Pool::All(kb.num_concepts()),
            relations: Pool::All(kb.num_relations()),
            events: Vec::new(),
        }
    }

    pub fn pool(&self, kind: PoolKind) -> &Pool {
        match kind {
            PoolKind::Entity => &self.entities,
            PoolKind::Concept => &self.concepts,
            PoolKind::Relation => &self.relations,
        }
    }

    fn pool_mut(&mut self, kind: PoolKind) -> &mut Pool {
        match kind {
            PoolKind::Entity => &mut self.entities,
            PoolKind::Concept => &mut self.concepts,
            PoolKind::Relation => &mut self.relations,
        }
    }

    /// The pool `function` draws its argument from, if it takes a KB element.
    pub fn active_pool(&self, function: FunctionKind) -> Option<&Pool> {
        PoolKind::of(function).map(|k| self.pool(k))
    }

    pub fn update(&mut self, kb: &KnowledgeBase, function: FunctionKind, argument: ArgId) -> Result<(), PruneError> {
        let kind = PoolKind::of(function).ok_or(PruneError::NoPool { function })?;
        if argument.kind() != kind {
            return Err(PruneError::WrongKind { argument, expected: kind.name() });
        }
        if !self.pool(kind).contains(argument.index()) {
            return Err(PruneError::OutsidePool { argument, pool: kind.name() });
        }
        match argument {
            ArgId::Entity(e) => {
                let types = kb.type_of(e)?;
                let mut rels = BTreeSet::new();
                for &c in types {
                    rels.extend(kb.relations_with_domain(c)?.iter().map(|r| r.0));
                }
                self.concepts = Pool::only(types.iter().map(|c| c.0));
                self.relations = Pool::only(rels);
            }
            ArgId::Relation(r) => {
                self.concepts = Pool::only(kb.range_of(r)?.iter().map(|c| c.0));
            }
            ArgId::Concept(c) => {
                self.relations = Pool::only(kb.relations_with_domain(c)?.iter().map(|r| r.0));
            }
        }
        self.events.push(PoolEvent::Update { function, argument });
        Ok(())
    }

    /// Resets an empty pool to its full category.
    pub fn fallback(&mut self, kb: &KnowledgeBase, kind: PoolKind) -> Result<(), PruneError> {
        if !self.pool(kind).is_empty() {
            return Err(PruneError::PoolNotEmpty(kind.name()));
        }
        *self.pool_mut(kind) = Pool::All(kind.category_size(kb));
        self.events.push(PoolEvent::Fallback { pool: kind });
        Ok(())
    }

    /// Resets a pool to its full category regardless of its contents,
    /// logged as a fallback.
    pub fn widen(&mut self, kb: &KnowledgeBase, kind: PoolKind) {
        *self.pool_mut(kind) = Pool::All(kind.category_size(kb));
        self.events.push(PoolEvent::Fallback { pool: kind });
    }

    /// Applies a fallback if the pool for `function` is empty. Returns
    /// whether one happened.
    pub fn ensure_nonempty(&mut self, kb: &KnowledgeBase, function: FunctionKind) -> bool {
        match PoolKind::of(function) {
            Some(kind) if self.pool(kind).is_empty() && kind.category_size(kb) > 0 => {
                self.fallback(kb, kind).expect("pool is empty");
                true
            }
            _ => false,
        }
    }

    pub fn fallback_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, PoolEvent::Fallback { .. })).count()
    }
}

/// Search-space size for one sketch: product over argument-taking steps of
/// the active pool size at that step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub total: f64,
    /// The same product with entity steps left out.
    pub without_entities: f64,
}

/// Replays `trace` (one choice per argument-taking step; the final step's
/// choice may be omitted) along `sketch`. With `pruned == false` every
/// step counts the full category size.
pub fn search_space_size(
    sketch: &Sketch,
    kb: &KnowledgeBase,
    trace: &[ArgId],
    pruned: bool,
) -> Result<SearchSpace, PruneError> {
    let arg_steps: Vec<FunctionKind> =
        sketch.functions().iter().copied().filter(|f| PoolKind::of(*f).is_some()).collect();
    let needed = arg_steps.len();
    if trace.len() > needed || trace.len() + 1 < needed {
        return Err(PruneError::TraceLength { given: trace.len(), needed });
    }
    let mut pools = CandidatePools::init(kb);
    let mut space = SearchSpace { total: 1.0, without_entities: 1.0 };
    for (i, &f) in arg_steps.iter().enumerate() {
        let kind = PoolKind::of(f).expect("filtered");
        let size = if pruned {
            pools.ensure_nonempty(kb, f);
            pools.pool(kind).len()
        } else {
            kind.category_size(kb)
        } as f64;
        space.total *= size;
        if kind != PoolKind::Entity {
            space.without_entities *= size;
        }
        if let Some(&choice) = trace.get(i) {
            if pruned {
                pools.update(kb, f, choice)?;
            }
        }
    }
    Ok(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::fixture::fixture;
    use FunctionKind::*;

    fn labels(kb: &KnowledgeBase, kind: PoolKind, pool: &Pool) -> Vec<String> {
        pool.indices().into_iter().map(|i| ArgId::from_index(kind, i).label(kb).to_string()).collect()
    }

    #[test]
    fn init_sizes() {
        let kb = fixture();
        let p = CandidatePools::init(&kb);
        assert_eq!((p.entities.len(), p.relations.len(), p.concepts.len()), (4, 2, 5));
        let empty = CandidatePools::init(&KnowledgeBase::empty());
        assert!(empty.entities.is_empty() && empty.relations.is_empty() && empty.concepts.is_empty());
    }

    #[test]
    fn active_pool_selection() {
        let kb = fixture();
        let p = CandidatePools::init(&kb);
        assert_eq!(p.active_pool(Find), Some(&p.entities));
        assert_eq!(p.active_pool(Relate), Some(&p.relations));
        assert_eq!(p.active_pool(FilterConcept), Some(&p.concepts));
        assert_eq!(p.active_pool(And), None);
        assert_eq!(p.active_pool(FilterStr), None);
    }

    #[test]
    fn entity_then_relation_updates() {
        let kb = fixture();
        let mut p = CandidatePools::init(&kb);
        let steve = ArgId::Entity(kb.find_entity("Steve Bisciotti").unwrap());
        p.update(&kb, Find, steve).unwrap();
        let mut concepts = labels(&kb, PoolKind::Concept, &p.concepts);
        concepts.sort();
        assert_eq!(concepts, vec!["human", "sports team owner"]);
        assert_eq!(labels(&kb, PoolKind::Relation, &p.relations), vec!["teams owned"]);
        assert_eq!(p.entities.len(), 4);

        let owned = ArgId::Relation(kb.find_relation("teams owned").unwrap());
        p.update(&kb, Relate, owned).unwrap();
        assert_eq!(labels(&kb, PoolKind::Concept, &p.concepts), vec!["sports team"]);
        assert_eq!(p.events.len(), 2);
    }

    #[test]
    fn concept_update_sets_relations() {
        let kb = fixture();
        let mut p = CandidatePools::init(&kb);
        let team = ArgId::Concept(kb.find_concept("sports team").unwrap());
        p.update(&kb, FilterConcept, team).unwrap();
        assert_eq!(labels(&kb, PoolKind::Relation, &p.relations), vec!["arena stadium"]);
    }

    #[test]
    fn update_rejects_bad_arguments() {
        let kb = fixture();
        let mut p = CandidatePools::init(&kb);
        let steve = ArgId::Entity(kb.find_entity("Steve Bisciotti").unwrap());
        assert!(matches!(p.update(&kb, And, steve), Err(PruneError::NoPool { .. })));
        assert!(matches!(p.update(&kb, Relate, steve), Err(PruneError::WrongKind { .. })));
        p.update(&kb, Find, steve).unwrap();
        let arena = ArgId::Relation(kb.find_relation("arena stadium").unwrap());
        assert!(matches!(p.update(&kb, Relate, arena), Err(PruneError::OutsidePool { .. })));
    }

    #[test]
    fn fallback_resets_empty_pool() {
        let kb = fixture();
        let mut p = CandidatePools::init(&kb);
        assert!(matches!(p.fallback(&kb, PoolKind::Concept), Err(PruneError::PoolNotEmpty(_))));
        p.concepts = Pool::Only(vec![]);
        p.fallback(&kb, PoolKind::Concept).unwrap();
        assert_eq!(p.concepts.len(), 5);
        assert_eq!(p.events, vec![PoolEvent::Fallback { pool: PoolKind::Concept }]);
        assert_eq!(p.fallback_count(), 1);
    }

    #[test]
    fn search_space_examples() {
        let kb = fixture();
        let sketch = Sketch::new(vec![Find, Relate, FilterConcept]);
        let trace = [
            ArgId::Entity(kb.find_entity("Steve Bisciotti").unwrap()),
            ArgId::Relation(kb.find_relation("teams owned").unwrap()),
        ];
        let full = search_space_size(&sketch, &kb, &trace, false).unwrap();
        assert_eq!(full.total, 40.0);
        assert_eq!(full.without_entities, 10.0);
        let pruned = search_space_size(&sketch, &kb, &trace, true).unwrap();
        assert_eq!(pruned.total, 4.0);
        assert_eq!(pruned.without_entities, 1.0);

        let none = Sketch::new(vec![FindAll, Count]);
        assert_eq!(search_space_size(&none, &kb, &[], true).unwrap().total, 1.0);
        assert!(matches!(
            search_space_size(&sketch, &kb, &trace[..1], true),
            Err(PruneError::TraceLength { .. })
        ));
    }
}
