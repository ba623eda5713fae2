//! Steps the candidate pools along a gold program and compares the
//! search space with and without ontology pruning.
//!
//! `cargo run --example ontology_pruning`

use program_transfer::argument::resolve_argument;
use program_transfer::kb::KnowledgeBase;
use program_transfer::program::Program;
use program_transfer::pruning::{search_space_size, CandidatePools, PoolKind};

const KB: &str = include_str!("../tests/data/fixture1.json");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kb = KnowledgeBase::from_json_str(KB)?;
    let program: Program = "Find(Steve Bisciotti);Relate(teams owned forward);FilterConcept(sports team)".parse()?;
    let mut pools = CandidatePools::init(&kb);
    let mut trace = Vec::new();
    for step in &program.steps {
        let Some(kind) = PoolKind::of(step.function) else { continue };
        let pool = pools.active_pool(step.function).expect("argument step");
        let labels: Vec<String> = pool.indices().into_iter().map(|i| program_transfer::pruning::ArgId::from_index(kind, i).label(&kb).to_string()).collect();
        println!("{:<14} {} pool {:?}", step.function.name(), kind.name(), labels);
        let arg = resolve_argument(&kb, step.function, &step.argument).ok_or("argument not in KB")?;
        pools.update(&kb, step.function, arg)?;
        trace.push(arg);
    }
    let sketch = program.sketch();
    let full = search_space_size(&sketch, &kb, &trace, false)?;
    let pruned = search_space_size(&sketch, &kb, &trace, true)?;
    println!("search space: {} unpruned, {} pruned (ratio {:.3})", full.total, pruned.total, pruned.total / full.total);
    println!("fallbacks: {}", pools.fallback_count());
    Ok(())
}
