use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{f1, hits_at_1};
use super::{DatasetExample, TrainConfig, TrainError};
use crate::argument::{fill_arguments, ArgChoice, ArgError, ArgOptions, EncodingCache, Lexicon};
use crate::executor::execute;
use crate::kb::label::normalize;
use crate::kb::KnowledgeBase;
use crate::program::Program;
use crate::sketch::Parser;

pub const TOP_K_REPORTED: [usize; 4] = [1, 2, 5, 10];

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub program: Program,
    pub sketch_log_prob: f64,
    pub arg_log_prob: f64,
    pub fallbacks: usize,
    pub choices: Vec<ArgChoice>,
}

impl Candidate {
    pub fn log_prob(&self) -> f64 {
        self.sketch_log_prob + self.arg_log_prob
    }
}

/// Beam over sketches, top-k argument fills per sketch, ranked by total
/// log-probability with duplicates removed.
pub fn candidate_programs(
    parser: &Parser,
    question: &str,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    opts: &ArgOptions,
    beam: usize,
    cache: &mut EncodingCache,
) -> Result<Vec<Candidate>, TrainError> {
    let sketches = parser.beam_decode(question, beam, parser.config.max_len, true)?;
    let mut out = Vec::new();
    for s in sketches.iter().filter(|s| !s.truncated && !s.sketch.is_empty()) {
        let fills = match fill_arguments(parser, question, &s.sketch, kb, lexicon, opts, cache) {
            Ok(f) => f,
            Err(ArgError::EmptyPool { .. } | ArgError::InvalidSketch(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        for f in fills {
            out.push(Candidate { program: f.program, sketch_log_prob: s.log_prob, arg_log_prob: f.log_prob, fallbacks: f.fallbacks, choices: f.choices });
        }
    }
    out.sort_by(|a, b| b.log_prob().total_cmp(&a.log_prob()).then_with(|| a.program.to_string().cmp(&b.program.to_string())));
    let mut seen = HashSet::new();
    out.retain(|c| seen.insert(c.program.to_string()));
    Ok(out)
}

pub(crate) fn answers_of(program: &Program, kb: &KnowledgeBase) -> Vec<String> {
    execute(program, kb).map(|r| r.answers).unwrap_or_default()
}

pub(crate) fn same_program(a: &Program, b: &Program) -> bool {
    a.steps.len() == b.steps.len()
        && a.steps.iter().zip(&b.steps).all(|(x, y)| x.function == y.function && normalize(&x.argument) == normalize(&y.argument))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    /// Mean F1 of the top-ranked program.
    pub f1: f64,
    pub hits_at_1: f64,
    /// (k, mean best F1 among the top k programs).
    pub best_f1_at_k: Vec<(usize, f64)>,
    /// Present when every example carries a gold program.
    pub sketch_exact: Option<f64>,
    pub program_exact: Option<f64>,
    pub mean_candidates: f64,
}

impl EvalReport {
    pub fn best_at(&self, k: usize) -> Option<f64> {
        self.best_f1_at_k.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    pub fn table(&self) -> String {
        let mut s = format!("examples      {}\nF1            {:.2}\nHits@1        {:.2}\n", self.examples, 100.0 * self.f1, 100.0 * self.hits_at_1);
        for (k, v) in &self.best_f1_at_k {
            s += &format!("best F1 @{k:<4} {:.2}\n", 100.0 * v);
        }
        if let Some(v) = self.sketch_exact {
            s += &format!("sketch EM     {:.2}\n", 100.0 * v);
        }
        if let Some(v) = self.program_exact {
            s += &format!("program EM    {:.2}\n", 100.0 * v);
        }
        s
    }
}

struct ExampleScore {
    f1: f64,
    hits: f64,
    best: [f64; TOP_K_REPORTED.len()],
    sketch_exact: Option<bool>,
    program_exact: Option<bool>,
    candidates: usize,
}

fn score_example(
    parser: &Parser,
    index: usize,
    ex: &DatasetExample,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    cfg: &TrainConfig,
    cache: &mut EncodingCache,
) -> Result<ExampleScore, TrainError> {
    let gold_program = ex.program();
    let gold = match (&ex.answers, &gold_program) {
        (Some(a), _) => a.clone(),
        (None, Some(p)) => answers_of(p, kb),
        (None, None) => return Err(TrainError::Example { index, message: "example has neither answers nor a program".into() }),
    };
    let cands = candidate_programs(parser, &ex.question, kb, lexicon, &cfg.arg_options(), cfg.eval_beam, cache)?;
    let scores: Vec<(f64, Vec<String>)> = cands
        .iter()
        .take(*TOP_K_REPORTED.last().unwrap())
        .map(|c| {
            let a = answers_of(&c.program, kb);
            (f1(&a, &gold), a)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let hits = scores.first().map_or(0.0, |(_, a)| hits_at_1(a, &gold, &mut rng));
    let mut best = [0.0; TOP_K_REPORTED.len()];
    for (slot, &k) in best.iter_mut().zip(&TOP_K_REPORTED) {
        *slot = scores.iter().take(k).map(|s| s.0).fold(0.0, f64::max);
    }
    let top = cands.first();
    Ok(ExampleScore {
        f1: scores.first().map_or(0.0, |s| s.0),
        hits,
        best,
        sketch_exact: gold_program.as_ref().map(|g| top.is_some_and(|c| c.program.sketch() == g.sketch())),
        program_exact: gold_program.as_ref().map(|g| top.is_some_and(|c| same_program(&c.program, g))),
        candidates: cands.len(),
    })
}

/// Decodes, executes and scores every example; work is split across
/// `cfg.workers` threads with results merged in dataset order.
pub fn evaluate(parser: &Parser, dataset: &[DatasetExample], kb: &KnowledgeBase, cfg: &TrainConfig) -> Result<EvalReport, TrainError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let lexicon = Lexicon::new(kb);
    let pool = cfg.thread_pool();
    let chunk = dataset.len().div_ceil(pool.current_num_threads() * 4).max(1);
    let scores: Vec<ExampleScore> = pool.install(|| {
        dataset
            .par_chunks(chunk)
            .enumerate()
            .map(|(c, exs)| {
                let mut cache = EncodingCache::new();
                exs.iter()
                    .enumerate()
                    .map(|(j, ex)| score_example(parser, c * chunk + j, ex, kb, &lexicon, cfg, &mut cache))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.into_iter().flatten().collect())
    })?;
    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&ExampleScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let rate = |f: &dyn Fn(&ExampleScore) -> Option<bool>| -> Option<f64> {
        let v: Option<Vec<bool>> = scores.iter().map(f).collect();
        v.map(|v| v.iter().filter(|&&b| b).count() as f64 / n)
    };
    Ok(EvalReport {
        examples: scores.len(),
        f1: mean(&|s| s.f1),
        hits_at_1: mean(&|s| s.hits),
        best_f1_at_k: TOP_K_REPORTED.iter().enumerate().map(|(i, &k)| (k, mean(&|s| s.best[i]))).collect(),
        sketch_exact: rate(&|s| s.sketch_exact),
        program_exact: rate(&|s| s.program_exact),
        mean_candidates: mean(&|s| s.candidates as f64),
    })
}
