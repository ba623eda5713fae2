//! Pretrains a small parser for a few epochs, then beam-decodes sketches
//! for unseen questions with and without the stack-validity constraint.
//!
//! `cargo run --release --example sketch_decoding -- [beam]`

use program_transfer::sketch::{ModelConfig, Parser};
use program_transfer::train::{build_vocab, generate_synthetic_domains, pretrain, SynthConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beam = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let s = generate_synthetic_domains(&SynthConfig { seed: 1, source_size: 300, target_size: 10, dev_size: 10, ..SynthConfig::default() })?;
    let (train, held_out) = s.source.split_at(280);
    let cfg = TrainConfig {
        model: ModelConfig { d: 32, d_hat: 32, encoder_lr: 3e-3, decoder_lr: 3e-3, ..ModelConfig::default() },
        pretrain_epochs: 8,
        ..TrainConfig::default()
    };
    let mut parser = Parser::new(cfg.model, build_vocab(train, &s.source_kb), cfg.seed);
    let report = pretrain(&mut parser, train, &s.source_kb, &cfg)?;
    println!("pretrained {} epochs, final loss {:.3}\n", cfg.pretrain_epochs, report.epoch_losses.last().unwrap());
    for ex in &held_out[..3] {
        println!("{}\n  gold        {}", ex.question, ex.program().unwrap().sketch());
        for constrained in [true, false] {
            for d in parser.beam_decode(&ex.question, beam, 8, constrained)? {
                let tag = if constrained { "constrained" } else { "free" };
                println!("  {tag:<11} {:>7.3} valid={:<5} {}", d.log_prob, d.sketch.validate().is_ok() && !d.truncated, d.sketch);
            }
        }
        println!();
    }
    Ok(())
}
