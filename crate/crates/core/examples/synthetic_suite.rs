//! Generates a source/target transfer suite and shows what it contains.
//!
//! `cargo run --release --example synthetic_suite -- [seed]`

use program_transfer::harness::prune_rows;
use program_transfer::train::{generate_synthetic_domains, QuestionType, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let s = generate_synthetic_domains(&SynthConfig { seed, ..SynthConfig::default() })?;
    for (name, kb) in [("source", &s.source_kb), ("target", &s.target_kb)] {
        println!(
            "{name} KB: {} entities, {} concepts, {} relations, {} triples",
            kb.num_entities(),
            kb.num_concepts(),
            kb.num_relations(),
            kb.triples().len()
        );
    }
    println!("{} source pairs, {} target train, {} target dev\n", s.source.len(), s.target_train.len(), s.target_dev.len());
    for t in QuestionType::ALL {
        let i = s.source_types.iter().position(|&x| x == t).expect("every type occurs");
        let ex = &s.source[i];
        println!("[{}] {}\n    {}", t.name(), ex.question, ex.program().expect("source carries programs"));
    }
    let j = 0;
    println!("\n[target] {}\n    answers {:?}", s.target_train[j].question, s.target_train[j].answers.as_deref().unwrap_or_default());

    let rows = prune_rows(&s.source_kb, &s.source)?;
    let mean = |t: QuestionType| {
        let r: Vec<f64> = rows.iter().filter(|r| r.question_type == Some(t)).map(|r| r.ratio()).collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    println!();
    for t in QuestionType::ALL {
        println!("mean pruned/unpruned search space, {:<11} {:.2e}", t.name(), mean(t));
    }
    Ok(())
}
