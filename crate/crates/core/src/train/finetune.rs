use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{apply, Accumulator};
use super::eval::{answers_of, candidate_programs, Candidate};
use super::metrics::f1;
use super::{DatasetExample, Strategy, TrainConfig, TrainError};
use crate::argument::{
    active_candidates, candidate_logits, encode_candidates, fill_arguments, linked_entities, ArgChoice, ArgOptions,
    EncodingCache, Lexicon,
};
use crate::kb::KnowledgeBase;
use crate::nn::log_softmax;
use crate::program::{ArgumentCategory, FunctionKind, Program, Step};
use crate::pruning::{ArgId, CandidatePools, PoolKind};
use crate::sketch::{allowed_mask, masked_log_softmax, Parser};

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub candidate: Candidate,
    pub f1: f64,
}

/// The candidate with the highest F1, ties going to the higher model
/// log-probability and then to the earlier position. `None` when every
/// candidate scores 0.
pub fn select_hard_em(scored: &[Scored]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scored.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let o = &scored[b];
                s.f1 > o.f1 || (s.f1 == o.f1 && s.candidate.log_prob() > o.candidate.log_prob())
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.filter(|&i| scored[i].f1 > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneEpoch {
    /// Hard-EM: mean best F1 found by search. REINFORCE: mean sample reward.
    pub mean_reward: f64,
    /// Examples with no positive-F1 candidate (Hard-EM only).
    pub skipped: usize,
    /// Optimizer steps taken.
    pub updates: usize,
    pub executions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub strategy: Strategy,
    pub epochs: Vec<FinetuneEpoch>,
}

fn gold_answers(target: &[DatasetExample]) -> Result<Vec<&[String]>, TrainError> {
    target
        .iter()
        .enumerate()
        .map(|(index, ex)| {
            ex.answers.as_deref().ok_or_else(|| TrainError::Example { index, message: "target example has no answers".into() })
        })
        .collect()
}

fn example_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mix = seed ^ (epoch as u64).wrapping_mul(0xA24B_AED4_963E_E407) ^ (index as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25);
    ChaCha8Rng::seed_from_u64(mix)
}

pub fn finetune(parser: &mut Parser, target: &[DatasetExample], kb: &KnowledgeBase, cfg: &TrainConfig) -> Result<FinetuneReport, TrainError> {
    match cfg.strategy {
        Strategy::HardEm => finetune_hard_em(parser, target, kb, cfg),
        Strategy::Reinforce => finetune_reinforce(parser, target, kb, cfg),
    }
}

/// Search-and-imitate training from answers: each example moves toward the
/// highest-F1 program found by beam search at the batch's parameters.
/// Gold programs, if present, are never read.
pub fn finetune_hard_em(
    parser: &mut Parser,
    target: &[DatasetExample],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
) -> Result<FinetuneReport, TrainError> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let gold = gold_answers(target)?;
    let lexicon = Lexicon::new(kb);
    let opts = cfg.arg_options();
    let opt = cfg.optimizer();
    let pool = cfg.thread_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4845_4d00);
    let mut order: Vec<usize> = (0..target.len()).collect();
    let mut epochs = Vec::new();
    for _ in 0..cfg.finetune_epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut stats = FinetuneEpoch { mean_reward: 0.0, skipped: 0, updates: 0, executions: 0 };
        for batch in order.chunks(cfg.batch_size) {
            let frozen: &Parser = parser;
            let picks: Vec<(Option<Candidate>, f64, usize)> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut cache = EncodingCache::new();
                        let cands = candidate_programs(frozen, &target[i].question, kb, &lexicon, &opts, cfg.beam, &mut cache)?;
                        let n = cands.len();
                        let scored: Vec<Scored> = cands
                            .into_iter()
                            .map(|c| {
                                let f = f1(&answers_of(&c.program, kb), gold[i]);
                                Scored { candidate: c, f1: f }
                            })
                            .collect();
                        let best = scored.iter().map(|s| s.f1).fold(0.0, f64::max);
                        let pick = select_hard_em(&scored).map(|j| scored[j].candidate.clone());
                        Ok::<_, TrainError>((pick, best, n))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let weight = 1.0 / batch.len() as f64;
            let mut acc = Accumulator::new(frozen, kb);
            let mut any = false;
            for (&i, (pick, best, n)) in batch.iter().zip(&picks) {
                stats.mean_reward += best;
                stats.executions += n;
                let Some(c) = pick else {
                    stats.skipped += 1;
                    continue;
                };
                let ids = frozen.question_ids(&target[i].question)?;
                acc.supervise(&ids, &c.program.sketch().tokens(), &c.choices, weight, false)?;
                any = true;
            }
            let grads = acc.finish();
            if any && !grads.is_zero() {
                apply(parser, grads, &opt)?;
                stats.updates += 1;
            }
        }
        stats.mean_reward /= target.len() as f64;
        epochs.push(stats);
    }
    Ok(FinetuneReport { strategy: Strategy::HardEm, epochs })
}

/// One program drawn from the factorized policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    /// Sampled sketch tokens including END when the sketch finished.
    pub tokens: Vec<FunctionKind>,
    /// `None` when the sketch hit the length bound or a pool was empty.
    pub program: Option<Program>,
    pub choices: Vec<ArgChoice>,
}

fn pick(logits: &[f64], mask: Option<&[bool]>, temperature: f64, rng: &mut impl Rng) -> Option<usize> {
    if temperature == 0.0 {
        let mut best: Option<usize> = None;
        for (i, &l) in logits.iter().enumerate() {
            if mask.is_none_or(|m| m[i]) && best.is_none_or(|b| l > logits[b]) {
                best = Some(i);
            }
        }
        return best;
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let lp = masked_log_softmax(&scaled, mask);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (i, l) in lp.iter().enumerate() {
        if l.is_finite() {
            acc += l.exp();
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// Samples sketch tokens from the stack-valid policy, then each argument
/// from its pool's softmax. Temperature 0 takes every argmax.
#[allow(clippy::too_many_arguments)]
pub fn sample_program(
    parser: &Parser,
    question: &str,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    opts: &ArgOptions,
    temperature: f64,
    rng: &mut impl Rng,
    cache: &mut EncodingCache,
) -> Result<Sampled, TrainError> {
    let enc = parser.encode(question)?;
    let mut state = parser.initial_state(&enc);
    let mut tokens: Vec<FunctionKind> = Vec::new();
    let mut finished = false;
    for _ in 0..parser.config.max_len {
        let (logits, mut next) = parser.decode_logits(&state, &enc)?;
        let mask = allowed_mask(&tokens);
        let Some(tok) = pick(&logits, Some(&mask), temperature, rng) else { break };
        let f = FunctionKind::from_index(tok).expect("valid index");
        tokens.push(f);
        if f == FunctionKind::End {
            finished = true;
            break;
        }
        next.last = f;
        state = next;
    }
    if !finished || tokens.len() == 1 {
        return Ok(Sampled { tokens, program: None, choices: Vec::new() });
    }
    let functions = &tokens[..tokens.len() - 1];
    let ids = parser.question_ids(question)?;
    let replay = parser.replay(&ids, &tokens)?;
    let linked = linked_entities(question, kb, lexicon, opts);
    let mut pools = CandidatePools::init(kb);
    let mut steps = Vec::with_capacity(functions.len());
    let mut choices = Vec::new();
    for (t, &f) in functions.iter().enumerate() {
        let argument = match f.category() {
            ArgumentCategory::Entity | ArgumentCategory::Concept | ArgumentCategory::Relation => {
                let kind = PoolKind::of(f).expect("KB argument");
                let (cands, _) = active_candidates(&mut pools, kb, f, linked.as_deref(), opts.prune);
                if cands.is_empty() {
                    return Ok(Sampled { tokens, program: None, choices });
                }
                let enc = encode_candidates(parser, kb, kind, &cands, cache)?;
                let logits = candidate_logits(replay.g(t), &enc);
                let i = pick(&logits, None, temperature, rng).expect("non-empty pool");
                let arg = ArgId::from_index(kind, cands[i]);
                if opts.prune {
                    pools.update(kb, f, arg).map_err(crate::argument::ArgError::from)?;
                }
                let log_prob = log_softmax(&logits)[i];
                choices.push(ArgChoice { step: t, kind, candidates: cands, chosen: i, log_prob });
                arg.label(kb).to_string()
            }
            ArgumentCategory::LiteralText => lexicon.literal_hint(f, question),
            ArgumentCategory::Empty => String::new(),
        };
        steps.push(Step::new(f, argument));
    }
    Ok(Sampled { tokens, program: Some(Program::new(steps)), choices })
}

/// Greedy sketch followed by the stepwise argmax argument at every step.
pub fn greedy_program(
    parser: &Parser,
    question: &str,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    opts: &ArgOptions,
    cache: &mut EncodingCache,
) -> Result<Option<Program>, TrainError> {
    let d = parser.greedy_decode(question, parser.config.max_len, true)?;
    if d.truncated || d.sketch.is_empty() {
        return Ok(None);
    }
    let one = ArgOptions { top_k: 1, ..*opts };
    let fills = fill_arguments(parser, question, &d.sketch, kb, lexicon, &one, cache)?;
    Ok(fills.into_iter().next().map(|f| f.program))
}

/// Policy-gradient training with reward = F1 of the executed sample. Each
/// example draws `beam × top_k` samples, matching Hard-EM's candidate
/// budget.
pub fn finetune_reinforce(
    parser: &mut Parser,
    target: &[DatasetExample],
    kb: &KnowledgeBase,
    cfg: &TrainConfig,
) -> Result<FinetuneReport, TrainError> {
    cfg.validate()?;
    if target.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let gold = gold_answers(target)?;
    let lexicon = Lexicon::new(kb);
    let opts = cfg.arg_options();
    let opt = cfg.optimizer();
    let pool = cfg.thread_pool();
    let samples = cfg.beam * cfg.top_k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5245_494e);
    let mut order: Vec<usize> = (0..target.len()).collect();
    let mut baseline = 0.0;
    let mut epochs = Vec::new();
    for epoch in 0..cfg.finetune_epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut stats = FinetuneEpoch { mean_reward: 0.0, skipped: 0, updates: 0, executions: 0 };
        for batch in order.chunks(cfg.batch_size) {
            let frozen: &Parser = parser;
            let drawn: Vec<Vec<(Sampled, f64)>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut r = example_rng(cfg.seed, epoch, i);
                        let mut cache = EncodingCache::new();
                        (0..samples)
                            .map(|_| {
                                let s = sample_program(frozen, &target[i].question, kb, &lexicon, &opts, cfg.temperature, &mut r, &mut cache)?;
                                let reward = s.program.as_ref().map_or(0.0, |p| f1(&answers_of(p, kb), gold[i]));
                                Ok((s, reward))
                            })
                            .collect::<Result<Vec<_>, TrainError>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let mut acc = Accumulator::new(frozen, kb);
            for (&i, draws) in batch.iter().zip(&drawn) {
                let ids = frozen.question_ids(&target[i].question)?;
                let b = if cfg.use_baseline { baseline } else { 0.0 };
                let mut sum = 0.0;
                for (s, reward) in draws {
                    sum += reward;
                    let weight = (reward - b) / (samples * batch.len()) as f64;
                    if weight != 0.0 {
                        acc.supervise(&ids, &s.tokens, &s.choices, weight, true)?;
                    }
                }
                let mean = sum / samples as f64;
                stats.mean_reward += mean;
                stats.executions += draws.iter().filter(|(s, _)| s.program.is_some()).count();
                if cfg.use_baseline {
                    baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * mean;
                }
            }
            let grads = acc.finish();
            if !grads.is_zero() {
                apply(parser, grads, &opt)?;
                stats.updates += 1;
            }
        }
        stats.mean_reward /= target.len() as f64;
        epochs.push(stats);
    }
    Ok(FinetuneReport { strategy: Strategy::Reinforce, epochs })
}

/// Masked log-probability of `program` under the factorized policy.
#[cfg(test)]
pub(crate) fn policy_log_prob(
    parser: &Parser,
    question: &str,
    program: &Program,
    kb: &KnowledgeBase,
    opts: &ArgOptions,
) -> Result<f64, TrainError> {
    let lexicon = Lexicon::new(kb);
    let (choices, _) = crate::argument::gold_choices(program, question, kb, &lexicon, opts)?;
    let ids = parser.question_ids(question)?;
    let mut acc = Accumulator::new(parser, kb);
    Ok(-acc.supervise(&ids, &program.sketch().tokens(), &choices, 0.0, true)?)
}
