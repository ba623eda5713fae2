//! Builds a small knowledge base by hand, queries its ontology layer and
//! round-trips it through JSON.
//!
//! `cargo run --example knowledge_base`

use program_transfer::kb::{KbBuilder, KbError, KnowledgeBase, Literal, Qualifier};

fn main() -> Result<(), KbError> {
    let mut b = KbBuilder::new();
    let owner = b.concept("c0", "sports team owner")?;
    let human = b.concept("c1", "human")?;
    let team = b.concept("c2", "sports team")?;
    let org = b.concept("c3", "organization")?;
    b.subclass_of(team, org)?;
    let owns = b.relation("r0", "teams owned", &[owner], &[team])?;

    let steve = b.entity("e0", "Steve Bisciotti")?;
    let ravens = b.entity("e1", "Baltimore Ravens")?;
    b.instance_of(steve, owner)?;
    b.instance_of(steve, human)?;
    b.instance_of(ravens, team)?;
    b.triple(steve, owns, ravens, vec![Qualifier { key: "start time".into(), value: Literal::year(2004) }])?;
    b.attribute(ravens, "inception", Literal::year(1996), vec![])?;
    let kb = b.build()?;

    println!("{} entities, {} concepts, {} relations", kb.num_entities(), kb.num_concepts(), kb.num_relations());
    let types: Vec<&str> = kb.type_of(steve)?.iter().map(|&c| kb.concept_label(c)).collect();
    println!("C(Steve Bisciotti) = {types:?}");
    let range: Vec<&str> = kb.range_of(owns)?.iter().map(|&c| kb.concept_label(c)).collect();
    println!("R(teams owned)     = {range:?}");
    let from_owner: Vec<&str> = kb.relations_with_domain(owner)?.iter().map(|&r| kb.relation_label(r)).collect();
    println!("D-(sports team owner) = {from_owner:?}");
    let orgs: Vec<&str> = kb.instances_of(org)?.into_iter().map(|e| kb.entity_label(e)).collect();
    println!("instances of organization (through subClassOf) = {orgs:?}");

    let json = kb.to_json_string();
    let back = KnowledgeBase::from_json_str(&json)?;
    assert_eq!(back.to_json_string(), json);
    println!("JSON round trip: {} bytes", json.len());
    Ok(())
}
