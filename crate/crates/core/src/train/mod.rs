//! Pretraining on source question/program pairs, finetuning on target
//! question/answer pairs, and evaluation.

mod batch;
pub mod data;
mod eval;
mod finetune;
pub mod metrics;
mod pipeline;
mod pretrain;
pub mod synth;

use serde::{Deserialize, Serialize};

use crate::argument::{ArgError, ArgOptions, DEFAULT_LINK_THRESHOLD};
use crate::executor::ExecError;
use crate::nn::{AdamW, NnError};
use crate::sketch::{ModelConfig, ModelError};

pub use data::{read_jsonl, to_jsonl, write_jsonl, DataError, DatasetExample};
pub use eval::{candidate_programs, evaluate, Candidate, EvalReport, TOP_K_REPORTED};
pub use finetune::{
    finetune, finetune_hard_em, finetune_reinforce, greedy_program, sample_program, select_hard_em, FinetuneEpoch, Sampled,
    FinetuneReport, Scored,
};
pub use metrics::{f1, hits_at_1};
pub use pipeline::{build_vocab, run_ablations, run_transfer, target_texts, AblationReport, TransferData, TransferOutcome};
pub use pretrain::{pretrain, pretrain_with, PretrainReport};
pub use synth::{generate_synthetic_domains, QuestionType, SynthConfig, SynthError, SyntheticSuite};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("example {index}: {message}")]
    Example { index: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Argument(#[from] ArgError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    HardEm,
    Reinforce,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hard-em" => Ok(Strategy::HardEm),
            "reinforce" => Ok(Strategy::Reinforce),
            other => Err(format!("unknown strategy '{other}' (expected hard-em or reinforce)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    /// Sketch beam width during finetuning.
    pub beam: usize,
    /// Argument assignments kept per sketch.
    pub top_k: usize,
    pub weight_decay: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip: f64,
    pub strategy: Strategy,
    pub baseline_decay: f64,
    pub use_baseline: bool,
    /// Sampling temperature for REINFORCE; 0 samples the argmax.
    pub temperature: f64,
    /// Entity linking applies above this many entities; 0 disables it.
    pub link_threshold: usize,
    pub no_pretrain: bool,
    pub no_pretrain_args: bool,
    pub no_finetune: bool,
    pub no_ontology: bool,
    /// Sketch beam width at evaluation.
    pub eval_beam: usize,
    /// Worker threads for decoding and evaluation; 0 uses every core.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            model: ModelConfig::default(),
            pretrain_epochs: 20,
            finetune_epochs: 5,
            batch_size: 16,
            beam: 5,
            top_k: 3,
            weight_decay: 1e-5,
            clip: 5.0,
            strategy: Strategy::HardEm,
            baseline_decay: 0.99,
            use_baseline: true,
            temperature: 1.0,
            link_threshold: DEFAULT_LINK_THRESHOLD,
            no_pretrain: false,
            no_pretrain_args: false,
            no_finetune: false,
            no_ontology: false,
            eval_beam: 10,
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let m = &self.model;
        let bad = |what: &str| Err(TrainError::Config(what.to_string()));
        if m.d == 0 || m.d_hat == 0 || m.max_len == 0 {
            return bad("model sizes must be positive");
        }
        if !(m.encoder_lr > 0.0 && m.decoder_lr > 0.0 && m.embed_lr >= 0.0) {
            return bad("encoder and decoder learning rates must be positive, the embedding rate non-negative");
        }
        if self.batch_size == 0 || self.beam == 0 || self.top_k == 0 || self.eval_beam == 0 {
            return bad("batch size, beam, top-k and eval beam must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.clip >= 0.0 && self.temperature >= 0.0) {
            return bad("weight decay, clip and temperature must be non-negative");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline decay must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn arg_options(&self) -> ArgOptions {
        ArgOptions {
            top_k: self.top_k,
            prune: !self.no_ontology,
            link_threshold: (self.link_threshold > 0).then_some(self.link_threshold),
        }
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW { weight_decay: self.weight_decay, clip_norm: (self.clip > 0.0).then_some(self.clip), ..AdamW::default() }
    }

    pub(crate) fn thread_pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(self.workers).build().expect("thread pool")
    }
}
