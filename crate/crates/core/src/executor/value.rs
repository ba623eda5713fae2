use std::collections::BTreeSet;
use std::fmt;

use crate::kb::{EntityId, KnowledgeBase, Literal};

/// Where a fact returned alongside an entity lives in the KB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactRef {
    /// Index into [`KnowledgeBase::attributes`].
    Attribute(usize),
    /// Index into [`KnowledgeBase::triples`].
    Relation(usize),
}

/// A fact paired with the entity it supports in the current set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub entity: EntityId,
    pub source: FactRef,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Entities(BTreeSet<EntityId>),
    EntitiesWithFacts { entities: BTreeSet<EntityId>, facts: BTreeSet<Fact> },
    /// Deduplicated by canonical form, sorted by canonical form.
    Literals(Vec<Literal>),
    Text(BTreeSet<String>),
    Number(f64),
    Boolean(bool),
}

impl Value {
    pub fn with_facts(facts: BTreeSet<Fact>) -> Value {
        let entities = facts.iter().map(|f| f.entity).collect();
        Value::EntitiesWithFacts { entities, facts }
    }

    pub fn literals(items: impl IntoIterator<Item = Literal>) -> Value {
        let mut items: Vec<(String, Literal)> = items.into_iter().map(|l| (l.canonical(), l)).collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        items.dedup_by(|a, b| a.0 == b.0);
        Value::Literals(items.into_iter().map(|(_, l)| l).collect())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Entities(_) => "Entities",
            Value::EntitiesWithFacts { .. } => "EntitiesWithFacts",
            Value::Literals(_) => "Literals",
            Value::Text(_) => "Text",
            Value::Number(_) => "Number",
            Value::Boolean(_) => "Boolean",
        }
    }

    pub fn entity_set(&self) -> Option<&BTreeSet<EntityId>> {
        match self {
            Value::Entities(s) | Value::EntitiesWithFacts { entities: s, .. } => Some(s),
            _ => None,
        }
    }

    /// Deterministic answer strings, sorted.
    pub fn render(&self, kb: &KnowledgeBase) -> Vec<String> {
        let mut out: Vec<String> = match self {
            Value::Entities(s) | Value::EntitiesWithFacts { entities: s, .. } => {
                s.iter().map(|&e| kb.entity_label(e).to_string()).collect()
            }
            Value::Literals(items) => items.iter().map(Literal::canonical).collect(),
            Value::Text(items) => items.iter().cloned().collect(),
            Value::Number(n) => vec![format_number(*n)],
            Value::Boolean(b) => vec![if *b { "yes" } else { "no" }.to_string()],
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn summary(&self) -> String {
        match self {
            Value::Entities(s) => format!("Entities({})", s.len()),
            Value::EntitiesWithFacts { entities, facts } => {
                format!("EntitiesWithFacts({}, {} facts)", entities.len(), facts.len())
            }
            Value::Literals(items) => format!("Literals({})", items.len()),
            Value::Text(items) => format!("Text({})", items.len()),
            Value::Number(n) => format!("Number({})", format_number(*n)),
            Value::Boolean(b) => format!("Boolean({b})"),
        }
    }
}

pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}
