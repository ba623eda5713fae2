use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::RunConfig;
use crate::train::{Strategy, SynthConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "kbpt", version, about = "Program transfer for question answering over knowledge bases")]
pub struct Cli {
    /// TOML config with [train], [synth] and [inputs] tables.
    #[arg(long, global = true, env = "KBPT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Parent of timestamped run directories.
    #[arg(long, global = true, env = "KBPT_RUN_ROOT", default_value = "runs")]
    pub run_root: PathBuf,
    /// Exact run directory, used instead of a timestamped one.
    #[arg(long, global = true, env = "KBPT_RUN_DIR")]
    pub run_dir: Option<PathBuf>,
    /// No progress logs on stderr.
    #[arg(long, short, global = true, env = "KBPT_QUIET")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic source/target suite.
    Gen {
        #[arg(long, env = "KBPT_SEED")]
        seed: Option<u64>,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Supervised pretraining on question/program pairs.
    Pretrain {
        #[arg(long, env = "KBPT_KB")]
        kb: Option<PathBuf>,
        #[arg(long, env = "KBPT_DATASET")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Weakly supervised finetuning on question/answer pairs.
    Finetune {
        /// Pretrained checkpoint directory; omitted means random initialization.
        #[arg(long, env = "KBPT_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        #[arg(long, env = "KBPT_KB")]
        kb: Option<PathBuf>,
        #[arg(long, env = "KBPT_DATASET")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Decode, execute and score a dataset.
    Eval {
        #[arg(long, env = "KBPT_CHECKPOINT")]
        checkpoint: Option<PathBuf>,
        #[arg(long, env = "KBPT_KB")]
        kb: Option<PathBuf>,
        #[arg(long, env = "KBPT_DATASET")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Execute one program and print its answers.
    Exec {
        #[arg(long, env = "KBPT_KB")]
        kb: PathBuf,
        /// Program text, or a file holding it.
        #[arg(long)]
        program: String,
        /// Print each step's inputs and output to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Per-question search-space sizes with and without ontology pruning.
    PruneStats {
        #[arg(long, env = "KBPT_KB")]
        kb: Option<PathBuf>,
        #[arg(long, env = "KBPT_DATASET")]
        dataset: Option<PathBuf>,
    },
    /// Generate a suite, pretrain, finetune and evaluate in one go.
    Run {
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Also run every ablation on the same suite.
        #[arg(long)]
        ablations: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[arg(long, env = "KBPT_SOURCE_SIZE")]
    pub source_size: Option<usize>,
    #[arg(long, env = "KBPT_TARGET_SIZE")]
    pub target_size: Option<usize>,
    #[arg(long, env = "KBPT_DEV_SIZE")]
    pub dev_size: Option<usize>,
    #[arg(long, env = "KBPT_ENTITIES")]
    pub entities: Option<usize>,
    #[arg(long, env = "KBPT_RELATIONS")]
    pub relations: Option<usize>,
}

impl SynthArgs {
    pub fn apply(&self, s: &mut SynthConfig) {
        set(&mut s.source_size, self.source_size);
        set(&mut s.target_size, self.target_size);
        set(&mut s.dev_size, self.dev_size);
        set(&mut s.entities, self.entities);
        set(&mut s.relations, self.relations);
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long, env = "KBPT_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "KBPT_PRETRAIN_EPOCHS")]
    pub pretrain_epochs: Option<usize>,
    #[arg(long, env = "KBPT_FINETUNE_EPOCHS")]
    pub finetune_epochs: Option<usize>,
    #[arg(long, env = "KBPT_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    /// Sketch beam during finetuning.
    #[arg(long, env = "KBPT_BEAM")]
    pub beam: Option<usize>,
    /// Argument assignments kept per sketch.
    #[arg(long, env = "KBPT_TOP_K")]
    pub top_k: Option<usize>,
    #[arg(long, env = "KBPT_EVAL_BEAM")]
    pub eval_beam: Option<usize>,
    /// hard-em or reinforce.
    #[arg(long, env = "KBPT_STRATEGY")]
    pub strategy: Option<Strategy>,
    /// Encoder and decoder learning rate.
    #[arg(long, env = "KBPT_LR")]
    pub lr: Option<f64>,
    /// Hidden size d, also used for the encoder width.
    #[arg(long, env = "KBPT_DIM")]
    pub dim: Option<usize>,
    #[arg(long, env = "KBPT_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Entity linking kicks in above this many entities; 0 disables it.
    #[arg(long, env = "KBPT_LINK_THRESHOLD")]
    pub link_threshold: Option<usize>,
    /// Worker threads for evaluation; 0 uses every core.
    #[arg(long, env = "KBPT_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, env = "KBPT_NO_PRETRAIN")]
    pub no_pretrain: bool,
    #[arg(long, env = "KBPT_NO_PRETRAIN_ARGS")]
    pub no_pretrain_args: bool,
    #[arg(long, env = "KBPT_NO_FINETUNE")]
    pub no_finetune: bool,
    #[arg(long, env = "KBPT_NO_ONTOLOGY")]
    pub no_ontology: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TrainArgs {
    pub fn apply(&self, t: &mut TrainConfig) {
        set(&mut t.seed, self.seed);
        set(&mut t.pretrain_epochs, self.pretrain_epochs);
        set(&mut t.finetune_epochs, self.finetune_epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.beam, self.beam);
        set(&mut t.top_k, self.top_k);
        set(&mut t.eval_beam, self.eval_beam);
        set(&mut t.strategy, self.strategy);
        set(&mut t.temperature, self.temperature);
        set(&mut t.link_threshold, self.link_threshold);
        set(&mut t.workers, self.workers);
        if let Some(lr) = self.lr {
            t.model.encoder_lr = lr;
            t.model.decoder_lr = lr;
        }
        if let Some(d) = self.dim {
            t.model.d = d;
            t.model.d_hat = d;
        }
        t.no_pretrain |= self.no_pretrain;
        t.no_pretrain_args |= self.no_pretrain_args;
        t.no_finetune |= self.no_finetune;
        t.no_ontology |= self.no_ontology;
    }
}

impl Cli {
    /// Config file, then flags and environment.
    pub fn effective_config(&self) -> Result<RunConfig, super::HarnessError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let inputs = &mut c.inputs;
        match &self.command {
            Command::Gen { seed, synth } => {
                set(&mut c.synth.seed, *seed);
                synth.apply(&mut c.synth);
            }
            Command::Pretrain { kb, dataset, train } | Command::Eval { kb, dataset, train, .. } | Command::Finetune { kb, dataset, train, .. } => {
                set(&mut inputs.kb, kb.clone().map(Some));
                set(&mut inputs.dataset, dataset.clone().map(Some));
                if let Command::Eval { checkpoint, .. } | Command::Finetune { checkpoint, .. } = &self.command {
                    set(&mut inputs.checkpoint, checkpoint.clone().map(Some));
                }
                train.apply(&mut c.train);
            }
            Command::Exec { kb, .. } => inputs.kb = Some(kb.clone()),
            Command::PruneStats { kb, dataset } => {
                set(&mut inputs.kb, kb.clone().map(Some));
                set(&mut inputs.dataset, dataset.clone().map(Some));
            }
            Command::Run { synth, train, .. } => {
                synth.apply(&mut c.synth);
                train.apply(&mut c.train);
                c.synth.seed = c.train.seed;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn name(&self) -> &'static str {
        match self.command {
            Command::Gen { .. } => "gen",
            Command::Pretrain { .. } => "pretrain",
            Command::Finetune { .. } => "finetune",
            Command::Eval { .. } => "eval",
            Command::Exec { .. } => "exec",
            Command::PruneStats { .. } => "prune-stats",
            Command::Run { .. } => "run",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("kbpt").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&["pretrain", "--kb", "k.json", "--seed", "4", "--lr", "0.01", "--no-ontology"]);
        let c = cli.effective_config().unwrap();
        assert_eq!(c.train.seed, 4);
        assert_eq!(c.train.model.encoder_lr, 0.01);
        assert!(c.train.no_ontology);
        assert_eq!(c.inputs.kb, Some(PathBuf::from("k.json")));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[train]\nseed = 3\nbeam = 7\n[inputs]\ndataset = \"d.jsonl\"\n").unwrap();
        let cli = parse(&["--config", path.to_str().unwrap(), "eval", "--seed", "5"]);
        let c = cli.effective_config().unwrap();
        assert_eq!((c.train.seed, c.train.beam), (5, 7));
        assert_eq!(c.inputs.dataset, Some(PathBuf::from("d.jsonl")));
    }

    #[test]
    fn run_shares_the_seed() {
        let c = parse(&["run", "--seed", "8", "--source-size", "50"]).effective_config().unwrap();
        assert_eq!((c.synth.seed, c.synth.source_size), (8, 50));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let err = parse(&["pretrain", "--beam", "0"]).effective_config().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
