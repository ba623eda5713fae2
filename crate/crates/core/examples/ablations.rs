//! The full method against its ablations on one synthetic suite: no
//! finetuning, no pretraining, no ontology pruning, and REINFORCE in place
//! of Hard-EM.
//!
//! `cargo run --release --example ablations -- [seed] [target_size]`
//!
//! Takes ten minutes or more on one core at the default sizes.

use program_transfer::sketch::ModelConfig;
use program_transfer::train::{generate_synthetic_domains, run_ablations, SynthConfig, TrainConfig, TransferData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>());
    let seed = args.next().transpose()?.unwrap_or(0);
    let target_size = args.next().transpose()?.unwrap_or(600) as usize;
    let s = generate_synthetic_domains(&SynthConfig { seed, source_size: 1000, target_size, dev_size: 200, ..SynthConfig::default() })?;
    let cfg = TrainConfig {
        seed,
        model: ModelConfig { encoder_lr: 3e-3, decoder_lr: 3e-3, ..ModelConfig::default() },
        pretrain_epochs: 15,
        finetune_epochs: 8,
        ..TrainConfig::default()
    };
    let data = TransferData { source: &s.source, source_kb: &s.source_kb, target: &s.target_train, target_kb: &s.target_kb, dev: &s.target_dev };
    let r = run_ablations(data, &cfg)?;
    println!("{:<12} {:>6} {:>7} {:>7} {:>7}", "variant", "F1", "Hits@1", "top-1", "top-10");
    for (name, e) in [
        ("full", &r.full),
        ("no-finetune", &r.no_finetune),
        ("no-pretrain", &r.no_pretrain),
        ("no-ontology", &r.no_ontology),
        ("reinforce", &r.reinforce),
    ] {
        let at = |k| 100.0 * e.best_at(k).unwrap_or(0.0);
        println!("{name:<12} {:>6.1} {:>7.1} {:>7.1} {:>7.1}", 100.0 * e.f1, 100.0 * e.hits_at_1, at(1), at(10));
    }
    Ok(())
}
