//! Shows the ranked candidate programs behind one prediction: a sketch
//! beam, top-k argument fills per sketch from the pruned pools, and the
//! execution result of each.
//!
//! `cargo run --release --example argument_filling`

use program_transfer::argument::{ArgOptions, EncodingCache, Lexicon};
use program_transfer::executor::execute;
use program_transfer::sketch::{ModelConfig, Parser};
use program_transfer::train::{build_vocab, candidate_programs, f1, generate_synthetic_domains, pretrain, SynthConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = generate_synthetic_domains(&SynthConfig { seed: 2, source_size: 400, target_size: 10, dev_size: 10, ..SynthConfig::default() })?;
    let (train, held_out) = s.source.split_at(390);
    let cfg = TrainConfig {
        model: ModelConfig { encoder_lr: 3e-3, decoder_lr: 3e-3, ..ModelConfig::default() },
        pretrain_epochs: 20,
        ..TrainConfig::default()
    };
    let mut parser = Parser::new(cfg.model, build_vocab(train, &s.source_kb), cfg.seed);
    pretrain(&mut parser, train, &s.source_kb, &cfg)?;

    let kb = &s.source_kb;
    let lexicon = Lexicon::new(kb);
    let opts = ArgOptions { top_k: 3, ..ArgOptions::default() };
    let mut cache = EncodingCache::new();
    for ex in &held_out[..3] {
        let gold = execute(&ex.program().unwrap(), kb)?.answers;
        println!("{}\ngold {}", ex.question, ex.program().unwrap());
        let cands = candidate_programs(&parser, &ex.question, kb, &lexicon, &opts, 3, &mut cache)?;
        for c in cands.iter().take(6) {
            let answers = execute(&c.program, kb).map(|r| r.answers).unwrap_or_default();
            println!("{:>8.3} F1 {:.2}  {}", c.log_prob(), f1(&answers, &gold), c.program);
        }
        println!();
    }
    Ok(())
}
