//! Supervised pretraining on gold programs until the parser reproduces its
//! training set, reporting exact match every few epochs.
//!
//! `cargo run --release --example pretrain_overfit -- [pairs] [max_epochs]`

use std::ops::ControlFlow;
use std::time::Instant;

use program_transfer::sketch::{ModelConfig, Parser};
use program_transfer::train::{build_vocab, evaluate, generate_synthetic_domains, pretrain_with, SynthConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let pairs = args.next().transpose()?.unwrap_or(200);
    let max_epochs = args.next().transpose()?.unwrap_or(300);
    let s = generate_synthetic_domains(&SynthConfig { source_size: pairs, target_size: 10, dev_size: 10, ..SynthConfig::default() })?;
    let cfg = TrainConfig {
        model: ModelConfig { encoder_lr: 3e-3, decoder_lr: 3e-3, ..ModelConfig::default() },
        pretrain_epochs: max_epochs,
        eval_beam: 1,
        ..TrainConfig::default()
    };
    let mut parser = Parser::new(cfg.model, build_vocab(&s.source, &s.source_kb), cfg.seed);
    let t = Instant::now();
    let mut err = None;
    pretrain_with(&mut parser, &s.source, &s.source_kb, &cfg, |epoch, p| {
        if epoch % 10 != 0 {
            return ControlFlow::Continue(());
        }
        match evaluate(p, &s.source, &s.source_kb, &cfg) {
            Ok(e) => {
                let (sk, pr) = (e.sketch_exact.unwrap_or(0.0), e.program_exact.unwrap_or(0.0));
                println!("epoch {epoch:>3}  sketch EM {sk:.3}  program EM {pr:.3}  F1 {:.3}  {:.0}s", e.f1, t.elapsed().as_secs_f64());
                if sk >= 0.95 && pr >= 0.90 {
                    return ControlFlow::Break(());
                }
                ControlFlow::Continue(())
            }
            Err(e) => {
                err = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    Ok(())
}
