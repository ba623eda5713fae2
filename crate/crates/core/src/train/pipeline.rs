use serde::{Deserialize, Serialize};

use super::{evaluate, finetune, pretrain, DatasetExample, EvalReport, FinetuneReport, PretrainReport, TrainConfig, TrainError};
use crate::kb::KnowledgeBase;
use crate::sketch::{Parser, Vocabulary};

/// Question texts plus every entity, concept and relation label.
pub fn target_texts(examples: &[DatasetExample], kb: &KnowledgeBase) -> Vec<String> {
    let mut texts: Vec<String> = examples.iter().map(|e| e.question.clone()).collect();
    texts.extend(kb.entity_ids().map(|e| kb.entity_label(e).to_string()));
    texts.extend(kb.concept_ids().map(|c| kb.concept_label(c).to_string()));
    texts.extend(kb.relation_ids().map(|r| kb.relation_label(r).to_string()));
    texts
}

pub fn build_vocab(examples: &[DatasetExample], kb: &KnowledgeBase) -> Vocabulary {
    let texts = target_texts(examples, kb);
    Vocabulary::build(texts.iter().map(String::as_str))
}

/// Inputs of one transfer run. Target examples carry answers only as far
/// as training is concerned.
#[derive(Debug, Clone, Copy)]
pub struct TransferData<'a> {
    pub source: &'a [DatasetExample],
    pub source_kb: &'a KnowledgeBase,
    pub target: &'a [DatasetExample],
    pub target_kb: &'a KnowledgeBase,
    pub dev: &'a [DatasetExample],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub pretrain: Option<PretrainReport>,
    pub finetune: Option<FinetuneReport>,
    /// Dev metrics of the pretrained parser before finetuning, when requested.
    pub before_finetune: Option<EvalReport>,
    pub dev: EvalReport,
}

/// Pretrain on the source domain, extend the vocabulary to the target
/// domain, finetune from answers, evaluate on dev. Ablation flags in `cfg`
/// skip or alter stages.
pub fn run_transfer(data: TransferData<'_>, cfg: &TrainConfig, eval_before_finetune: bool) -> Result<(Parser, TransferOutcome), TrainError> {
    cfg.validate()?;
    let mut parser = Parser::new(cfg.model, build_vocab(data.source, data.source_kb), cfg.seed);
    let pre = if cfg.no_pretrain { None } else { Some(pretrain(&mut parser, data.source, data.source_kb, cfg)?) };
    let texts = target_texts(data.target, data.target_kb);
    parser.extend_vocab(texts.iter().map(String::as_str), cfg.seed ^ 0x7645);
    let before_finetune = if eval_before_finetune && !cfg.no_finetune {
        Some(evaluate(&parser, data.dev, data.target_kb, cfg)?)
    } else {
        None
    };
    let fine = if cfg.no_finetune { None } else { Some(finetune(&mut parser, data.target, data.target_kb, cfg)?) };
    let dev = evaluate(&parser, data.dev, data.target_kb, cfg)?;
    Ok((parser, TransferOutcome { pretrain: pre, finetune: fine, before_finetune, dev }))
}

/// Dev metrics of the full method and each ablation on one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: EvalReport,
    pub no_finetune: EvalReport,
    pub no_pretrain: EvalReport,
    pub no_ontology: EvalReport,
    pub reinforce: EvalReport,
}

/// Runs the full method and the four ablations. Variants that share a
/// pretrained parser reuse it; each result equals the corresponding
/// [`run_transfer`] call with the matching flag set.
pub fn run_ablations(data: TransferData<'_>, cfg: &TrainConfig) -> Result<AblationReport, TrainError> {
    let base = TrainConfig { no_pretrain: false, no_finetune: false, no_ontology: false, strategy: super::Strategy::HardEm, ..cfg.clone() };
    base.validate()?;
    let texts = target_texts(data.target, data.target_kb);
    let extend = |p: &mut Parser| p.extend_vocab(texts.iter().map(String::as_str), base.seed ^ 0x7645);
    let fresh = Parser::new(base.model, build_vocab(data.source, data.source_kb), base.seed);

    let mut pre = fresh.clone();
    pretrain(&mut pre, data.source, data.source_kb, &base)?;
    extend(&mut pre);
    let no_finetune = evaluate(&pre, data.dev, data.target_kb, &base)?;

    let mut full = pre.clone();
    finetune(&mut full, data.target, data.target_kb, &base)?;
    let full = evaluate(&full, data.dev, data.target_kb, &base)?;

    let rl_cfg = TrainConfig { strategy: super::Strategy::Reinforce, ..base.clone() };
    let mut rl = pre;
    finetune(&mut rl, data.target, data.target_kb, &rl_cfg)?;
    let reinforce = evaluate(&rl, data.dev, data.target_kb, &rl_cfg)?;

    let np_cfg = TrainConfig { no_pretrain: true, ..base.clone() };
    let mut np = fresh;
    extend(&mut np);
    finetune(&mut np, data.target, data.target_kb, &np_cfg)?;
    let no_pretrain = evaluate(&np, data.dev, data.target_kb, &np_cfg)?;

    let no_cfg = TrainConfig { no_ontology: true, ..base };
    let (_, o) = run_transfer(data, &no_cfg, false)?;
    Ok(AblationReport { full, no_finetune, no_pretrain, no_ontology: o.dev, reinforce })
}
