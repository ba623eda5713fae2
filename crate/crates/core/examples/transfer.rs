//! Program transfer end to end: pretrain on the source domain with gold
//! programs, finetune on the target domain from answers only, evaluate on
//! target dev before and after finetuning.
//!
//! `cargo run --release --example transfer -- [hard-em|reinforce] [seed]`
//!
//! Takes a few minutes on one core.

use program_transfer::sketch::ModelConfig;
use program_transfer::train::{generate_synthetic_domains, run_transfer, Strategy, SynthConfig, TrainConfig, TransferData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args.next().as_deref().unwrap_or("hard-em").parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let s = generate_synthetic_domains(&SynthConfig { seed, source_size: 1000, target_size: 400, dev_size: 100, ..SynthConfig::default() })?;
    let cfg = TrainConfig {
        seed,
        strategy,
        model: ModelConfig { encoder_lr: 3e-3, decoder_lr: 3e-3, ..ModelConfig::default() },
        pretrain_epochs: 15,
        finetune_epochs: 5,
        ..TrainConfig::default()
    };
    let data = TransferData { source: &s.source, source_kb: &s.source_kb, target: &s.target_train, target_kb: &s.target_kb, dev: &s.target_dev };
    let (_, out) = run_transfer(data, &cfg, true)?;
    if let Some(p) = &out.pretrain {
        println!("pretrain loss per epoch: {}", p.epoch_losses.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>().join(" "));
    }
    if let Some(f) = &out.finetune {
        println!("{:?} mean reward per epoch: {}", f.strategy, f.epochs.iter().map(|e| format!("{:.3}", e.mean_reward)).collect::<Vec<_>>().join(" "));
    }
    if let Some(before) = &out.before_finetune {
        println!("\ntarget dev before finetuning\n{}", before.table());
    }
    println!("target dev after finetuning\n{}", out.dev.table());
    Ok(())
}
