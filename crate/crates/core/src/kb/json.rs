use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KbBuilder, KbError, KnowledgeBase, Literal, Qualifier};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KbFile {
    #[serde(default)]
    concepts: Vec<ElementJson>,
    #[serde(default)]
    entities: Vec<EntityJson>,
    #[serde(default)]
    relations: Vec<RelationJson>,
    #[serde(default, rename = "subClassOf")]
    subclass_of: Vec<(String, String)>,
    #[serde(default)]
    triples: Vec<TripleJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementJson {
    id: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityJson {
    id: String,
    label: String,
    #[serde(default, rename = "instanceOf")]
    instance_of: Vec<String>,
    #[serde(default)]
    attributes: Vec<AttributeJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeJson {
    key: String,
    value: Literal,
    #[serde(default)]
    qualifiers: Vec<QualifierJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QualifierJson {
    key: String,
    value: Literal,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationJson {
    id: String,
    label: String,
    #[serde(default)]
    domain: Vec<String>,
    #[serde(default)]
    range: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TripleJson(String, String, String, #[serde(default)] Vec<QualifierJson>);

fn qualifiers(list: Vec<QualifierJson>) -> Vec<Qualifier> {
    list.into_iter().map(|q| Qualifier { key: q.key, value: q.value }).collect()
}

fn dangling(field: String, category: &'static str, id: &str) -> KbError {
    KbError::DanglingReference { field, category, id: id.to_string() }
}

impl KnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, KbError> {
        let text = fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KbError> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, KbError> {
        let file: KbFile = serde_json::from_str(text)?;
        let mut b = KbBuilder::new();
        for c in &file.concepts {
            b.concept(&c.id, &c.label)?;
        }
        for (i, r) in file.relations.iter().enumerate() {
            let lookup = |ids: &[String], what: &str| {
                ids.iter()
                    .map(|k| {
                        b.concept_by_key(k)
                            .ok_or_else(|| dangling(format!("relations[{i}].{what}"), "concept", k))
                    })
                    .collect::<Result<Vec<_>, _>>()
            };
            let domain = lookup(&r.domain, "domain")?;
            let range = lookup(&r.range, "range")?;
            b.relation(&r.id, &r.label, &domain, &range)?;
        }
        for e in &file.entities {
            b.entity(&e.id, &e.label)?;
        }
        for (i, e) in file.entities.into_iter().enumerate() {
            let id = b.entity_by_key(&e.id).expect("registered above");
            for c in &e.instance_of {
                let c = b
                    .concept_by_key(c)
                    .ok_or_else(|| dangling(format!("entities[{i}].instanceOf"), "concept", c))?;
                b.instance_of(id, c)?;
            }
            for a in e.attributes {
                b.attribute(id, &a.key, a.value, qualifiers(a.qualifiers))?;
            }
        }
        for (i, (child, parent)) in file.subclass_of.iter().enumerate() {
            let field = || format!("subClassOf[{i}]");
            let c = b.concept_by_key(child).ok_or_else(|| dangling(field(), "concept", child))?;
            let p = b.concept_by_key(parent).ok_or_else(|| dangling(field(), "concept", parent))?;
            b.subclass_of(c, p)?;
        }
        for (i, TripleJson(h, r, t, q)) in file.triples.into_iter().enumerate() {
            let field = || format!("triples[{i}]");
            let h = b.entity_by_key(&h).ok_or_else(|| dangling(field(), "entity", &h))?;
            let r = b.relation_by_key(&r).ok_or_else(|| dangling(field(), "relation", &r))?;
            let t = b.entity_by_key(&t).ok_or_else(|| dangling(field(), "entity", &t))?;
            b.triple(h, r, t, qualifiers(q))?;
        }
        b.build()
    }

    pub fn to_json_string(&self) -> String {
        let qual = |list: &[Qualifier]| -> Vec<QualifierJson> {
            list.iter().map(|q| QualifierJson { key: q.key.clone(), value: q.value.clone() }).collect()
        };
        let ckey = |c: &super::ConceptId| self.concepts[c.0].key.clone();
        let ekey = |e: &super::EntityId| self.entities[e.0].key.clone();

        let mut entities: Vec<EntityJson> = self
            .entities
            .iter()
            .zip(&self.instance_of)
            .map(|(el, types)| EntityJson {
                id: el.key.clone(),
                label: el.label.clone(),
                instance_of: types.iter().map(ckey).collect(),
                attributes: Vec::new(),
            })
            .collect();
        for fact in &self.attributes {
            entities[fact.entity.0].attributes.push(AttributeJson {
                key: fact.key.clone(),
                value: fact.value.clone(),
                qualifiers: qual(&fact.qualifiers),
            });
        }
        let file = KbFile {
            concepts: self
                .concepts
                .iter()
                .map(|c| ElementJson { id: c.key.clone(), label: c.label.clone() })
                .collect(),
            entities,
            relations: self
                .relations
                .iter()
                .map(|r| RelationJson {
                    id: r.key.clone(),
                    label: r.label.clone(),
                    domain: r.domain.iter().map(ckey).collect(),
                    range: r.range.iter().map(ckey).collect(),
                })
                .collect(),
            subclass_of: self.subclass_of.iter().map(|(c, p)| (ckey(c), ckey(p))).collect(),
            triples: self
                .triples
                .iter()
                .map(|t| {
                    TripleJson(
                        ekey(&t.head),
                        self.relations[t.relation.0].key.clone(),
                        ekey(&t.tail),
                        qual(&t.qualifiers),
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("KB serializes")
    }
}
