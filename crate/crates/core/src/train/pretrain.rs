use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{apply, Accumulator};
use super::{DatasetExample, TrainConfig, TrainError};
use crate::argument::{gold_choices, ArgChoice, Lexicon};
use crate::kb::KnowledgeBase;
use crate::program::FunctionKind;
use crate::sketch::Parser;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Mean per-example loss (sketch NLL plus argument cross-entropy).
    pub epoch_losses: Vec<f64>,
    /// Gold arguments that were outside their pruned pool.
    pub gold_misses: usize,
}

pub(crate) struct Prepared {
    pub ids: Vec<usize>,
    pub tokens: Vec<FunctionKind>,
    pub choices: Vec<ArgChoice>,
}

pub(crate) fn prepare(
    parser: &Parser,
    source: &[DatasetExample],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
) -> Result<(Vec<Prepared>, usize), TrainError> {
    let lexicon = Lexicon::new(kb);
    let opts = cfg.arg_options();
    let mut misses = 0;
    let mut out = Vec::with_capacity(source.len());
    for (index, ex) in source.iter().enumerate() {
        let fail = |message: String| TrainError::Example { index, message };
        let program = ex.program().ok_or_else(|| fail("source example has no program".into()))?;
        program.validate().map_err(|v| fail(v.to_string()))?;
        let ids = parser.question_ids(&ex.question).map_err(|e| fail(e.to_string()))?;
        let (choices, m) = gold_choices(&program, &ex.question, kb, &lexicon, &opts).map_err(|e| fail(e.to_string()))?;
        misses += m;
        let choices = if cfg.no_pretrain_args { Vec::new() } else { choices };
        out.push(Prepared { ids, tokens: program.sketch().tokens(), choices });
    }
    Ok((out, misses))
}

/// Supervised training on gold programs. Reads only the source KB.
pub fn pretrain(
    parser: &mut Parser,
    source: &[DatasetExample],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
) -> Result<PretrainReport, TrainError> {
    pretrain_with(parser, source, kb, cfg, |_, _| ControlFlow::Continue(()))
}

/// [`pretrain`] with a callback after every epoch; `Break` stops early.
/// The callback receives the number of finished epochs.
pub fn pretrain_with(
    parser: &mut Parser,
    source: &[DatasetExample],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &Parser) -> ControlFlow<()>,
) -> Result<PretrainReport, TrainError> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let (prepared, gold_misses) = prepare(parser, source, kb, cfg)?;
    let opt = cfg.optimizer();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5052_4554);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.pretrain_epochs);
    for _ in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let weight = 1.0 / batch.len() as f64;
            let mut acc = Accumulator::new(parser, kb);
            for &i in batch {
                let p = &prepared[i];
                total += acc.supervise(&p.ids, &p.tokens, &p.choices, weight, false)?;
            }
            let grads = acc.finish();
            apply(parser, grads, &opt)?;
        }
        epoch_losses.push(total / prepared.len() as f64);
        if on_epoch(epoch_losses.len(), parser).is_break() {
            break;
        }
    }
    Ok(PretrainReport { epoch_losses, gold_misses })
}

/// Loss of every gold program at the current parameters, without updates.
#[cfg(test)]
pub(crate) fn total_loss(parser: &Parser, source: &[DatasetExample], kb: &KnowledgeBase, cfg: &TrainConfig) -> Result<f64, TrainError> {
    let (prepared, _) = prepare(parser, source, kb, cfg)?;
    let mut acc = Accumulator::new(parser, kb);
    let mut total = 0.0;
    for p in &prepared {
        total += acc.supervise(&p.ids, &p.tokens, &p.choices, 1.0, false)?;
    }
    Ok(total)
}
