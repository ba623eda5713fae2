//! Parses a program, runs it on a knowledge base and prints each step.
//!
//! `cargo run --example execute_program -- "Find(FC Barcelona);Relate(arena stadium forward)"`
//!
//! Without an argument a few built-in programs run against a small bundled KB.

use program_transfer::executor::execute;
use program_transfer::kb::KnowledgeBase;
use program_transfer::program::Program;

const KB: &str = include_str!("../tests/data/fixture1.json");

const DEFAULT: &[&str] = &[
    "Find(Steve Bisciotti);Relate(teams owned forward);FilterConcept(sports team)",
    "Find(FC Barcelona);Relate(arena stadium forward);QueryAttr(capacity)",
    "FindAll();FilterConcept(organization);Count()",
    "Find(Baltimore Ravens);Find(FC Barcelona);Or();SelectAmong(inception|smallest)",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let kb = KnowledgeBase::from_json_str(KB)?;
    let given: Vec<String> = std::env::args().skip(1).collect();
    let programs: Vec<String> = if given.is_empty() { DEFAULT.iter().map(|s| s.to_string()).collect() } else { given };
    for text in programs {
        let program: Program = text.parse()?;
        println!("{program}");
        match execute(&program, &kb) {
            Ok(r) => {
                for (i, s) in r.trace.iter().enumerate() {
                    println!("  {i}. {}({}) -> {}", s.function.name(), s.argument, s.output);
                }
                println!("  answers: {:?}\n", r.answers);
            }
            Err(e) => println!("  error: {e}\n"),
        }
    }
    Ok(())
}
