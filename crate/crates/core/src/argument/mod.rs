//! Argument parser: fills each sketch step's argument from its candidate
//! pool, scoring candidates by their encoded label against g_t.

use std::collections::HashMap;

use crate::kb::label::{normalize, tokenize};
use crate::kb::KnowledgeBase;
use crate::nn::{check_finite, dot, log_softmax, softmax, axpy};
use crate::program::{relation_readings, ArgumentCategory, FunctionKind, Program, Sketch, Step};
use crate::pruning::{ArgId, CandidatePools, Pool, PoolKind, PruneError};
use crate::sketch::{ModelError, Parser};

pub const DEFAULT_LINK_THRESHOLD: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ArgError {
    #[error("step {step}: the {pool} pool is empty even after fallback")]
    EmptyPool { step: usize, pool: &'static str },
    #[error("step {step}: argument '{label}' does not name a KB {pool}")]
    Unresolved { step: usize, label: String, pool: &'static str },
    #[error("sketch is not well formed: {0}")]
    InvalidSketch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prune(#[from] PruneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgOptions {
    /// Argument assignments kept per sketch.
    pub top_k: usize,
    /// Ontology-guided pruning; off means every pool is its full category.
    pub prune: bool,
    /// Restrict entity pools to label-token matches when the KB has more
    /// entities than this.
    pub link_threshold: Option<usize>,
}

impl Default for ArgOptions {
    fn default() -> Self {
        ArgOptions { top_k: 3, prune: true, link_threshold: Some(DEFAULT_LINK_THRESHOLD) }
    }
}

/// Question-independent lookups over one KB.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entity_tokens: HashMap<String, Vec<usize>>,
    /// Normalized attribute keys, longest first.
    attribute_keys: Vec<String>,
}

const SMALL_WORDS: [&str; 8] = ["smallest", "least", "lowest", "fewest", "minimum", "youngest", "shortest", "less"];

impl Lexicon {
    pub fn new(kb: &KnowledgeBase) -> Lexicon {
        let mut entity_tokens: HashMap<String, Vec<usize>> = HashMap::new();
        for e in kb.entity_ids() {
            let mut toks = tokenize(kb.entity_label(e));
            toks.dedup();
            for t in toks {
                entity_tokens.entry(t).or_default().push(e.0);
            }
        }
        let mut keys: Vec<String> = kb.attributes().iter().map(|a| normalize(&a.key)).collect();
        keys.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        keys.dedup();
        Lexicon { entity_tokens, attribute_keys: keys }
    }

    /// Entities sharing at least one label token with `question`, ascending.
    pub fn link(&self, question: &str) -> Vec<usize> {
        let mut out: Vec<usize> =
            tokenize(question).iter().filter_map(|t| self.entity_tokens.get(t)).flatten().copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Best-effort text argument for a LiteralText function: the longest
    /// attribute key mentioned in the question, plus a direction word for
    /// selections.
    pub fn literal_hint(&self, function: FunctionKind, question: &str) -> String {
        let q = format!(" {} ", tokenize(question).join(" "));
        let key = self
            .attribute_keys
            .iter()
            .find(|k| q.contains(&format!(" {} ", tokenize(k).join(" "))))
            .cloned()
            .unwrap_or_default();
        let small = tokenize(question).iter().any(|t| SMALL_WORDS.contains(&t.as_str()));
        match function {
            FunctionKind::SelectAmong => format!("{key}|{}", if small { "smallest" } else { "largest" }),
            FunctionKind::SelectBetween => format!("{key}|{}", if small { "less" } else { "greater" }),
            FunctionKind::QueryAttr => key,
            _ => String::new(),
        }
    }
}

/// Row i is the pooled encoding of candidate `ids[i]`'s label.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEncoding {
    pub kind: PoolKind,
    pub ids: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

/// Label encodings for one parameter state.
#[derive(Debug, Clone, Default)]
pub struct EncodingCache {
    rows: HashMap<ArgId, Vec<f64>>,
}

impl EncodingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&mut self, parser: &Parser, kb: &KnowledgeBase, arg: ArgId) -> &[f64] {
        self.rows.entry(arg).or_insert_with(|| parser.encode_label(arg.label(kb)).0.pooled)
    }
}

pub fn encode_candidates(
    parser: &Parser,
    kb: &KnowledgeBase,
    kind: PoolKind,
    pool: &[usize],
    cache: &mut EncodingCache,
) -> Result<CandidateEncoding, ArgError> {
    if pool.is_empty() {
        return Err(ArgError::EmptyPool { step: 0, pool: kind.name() });
    }
    let rows: Vec<Vec<f64>> = pool.iter().map(|&i| cache.row(parser, kb, ArgId::from_index(kind, i)).to_vec()).collect();
    for r in &rows {
        check_finite(r, "candidate encoding").map_err(ModelError::from)?;
    }
    Ok(CandidateEncoding { kind, ids: pool.to_vec(), rows })
}

pub fn candidate_logits(g: &[f64], enc: &CandidateEncoding) -> Vec<f64> {
    enc.rows.iter().map(|r| dot(r, g)).collect()
}

/// softmax(P · g_t).
pub fn score_arguments(g: &[f64], enc: &CandidateEncoding) -> Vec<f64> {
    softmax(&candidate_logits(g, enc))
}

/// Gradients of −log p(gold) with respect to g_t and each row of P.
pub fn score_backward(g: &[f64], enc: &CandidateEncoding, gold: usize, weight: f64) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let lp = log_softmax(&candidate_logits(g, enc));
    let mut dg = vec![0.0; g.len()];
    let mut drows = Vec::with_capacity(enc.rows.len());
    for (i, row) in enc.rows.iter().enumerate() {
        let ds = weight * (lp[i].exp() - if i == gold { 1.0 } else { 0.0 });
        axpy(ds, row, &mut dg);
        drows.push(g.iter().map(|x| ds * x).collect());
    }
    (-lp[gold], dg, drows)
}

/// Candidates for `function` at the current pool state, after pruning
/// fallbacks and entity linking. Second value: a fallback happened.
pub fn active_candidates(
    pools: &mut CandidatePools,
    kb: &KnowledgeBase,
    function: FunctionKind,
    linked: Option<&[usize]>,
    prune: bool,
) -> (Vec<usize>, bool) {
    let kind = PoolKind::of(function).expect("KB-argument function");
    let mut fell_back = false;
    let mut ids = if prune {
        fell_back = pools.ensure_nonempty(kb, function);
        pools.pool(kind).indices()
    } else {
        (0..kind.category_size(kb)).collect()
    };
    if kind == PoolKind::Entity {
        if let Some(link) = linked {
            let kept: Vec<usize> = ids.iter().copied().filter(|i| link.binary_search(i).is_ok()).collect();
            if !kept.is_empty() {
                ids = kept;
            }
        }
    }
    (ids, fell_back)
}

/// Entity restriction for `question`, when linking applies to this KB.
pub fn linked_entities(question: &str, kb: &KnowledgeBase, lexicon: &Lexicon, opts: &ArgOptions) -> Option<Vec<usize>> {
    match opts.link_threshold {
        Some(t) if kb.num_entities() > t => {
            let l = lexicon.link(question);
            (!l.is_empty()).then_some(l)
        }
        _ => None,
    }
}

/// One argument decision: which candidates were on offer and which won.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgChoice {
    pub step: usize,
    pub kind: PoolKind,
    pub candidates: Vec<usize>,
    pub chosen: usize,
    pub log_prob: f64,
}

impl ArgChoice {
    pub fn arg(&self) -> ArgId {
        ArgId::from_index(self.kind, self.candidates[self.chosen])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledProgram {
    pub program: Program,
    /// Sum of argument log-probabilities.
    pub log_prob: f64,
    pub choices: Vec<ArgChoice>,
    pub fallbacks: usize,
}

#[derive(Clone)]
struct Partial {
    pools: CandidatePools,
    args: Vec<String>,
    log_prob: f64,
    choices: Vec<ArgChoice>,
    fallbacks: usize,
}

impl Partial {
    fn key(&self) -> Vec<usize> {
        self.choices.iter().map(|c| c.candidates[c.chosen]).collect()
    }
}

fn rank(a: &Partial, b: &Partial) -> std::cmp::Ordering {
    b.log_prob.total_cmp(&a.log_prob).then_with(|| a.key().cmp(&b.key()))
}

/// Later scores depend on earlier choices only through the pools, so the
/// k best completions all extend one of the k best prefixes sharing their
/// pool state.
fn keep_best_per_state(mut next: Vec<Partial>, k: usize) -> Vec<Partial> {
    next.sort_by(rank);
    let mut seen: HashMap<(Pool, Pool, Pool), usize> = HashMap::new();
    next.retain(|p| {
        let n = seen.entry((p.pools.entities.clone(), p.pools.concepts.clone(), p.pools.relations.clone())).or_insert(0);
        *n += 1;
        *n <= k
    });
    next
}

/// Exact top-k argument assignments for `sketch` under stepwise scoring,
/// best first.
pub fn fill_arguments(
    parser: &Parser,
    question: &str,
    sketch: &Sketch,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    opts: &ArgOptions,
    cache: &mut EncodingCache,
) -> Result<Vec<FilledProgram>, ArgError> {
    sketch.validate().map_err(|v| ArgError::InvalidSketch(v.to_string()))?;
    let ids = parser.question_ids(question)?;
    let replay = parser.replay(&ids, &sketch.tokens())?;
    let linked = linked_entities(question, kb, lexicon, opts);
    let functions = sketch.functions();
    let mut partials = vec![Partial {
        pools: CandidatePools::init(kb),
        args: vec![String::new(); functions.len()],
        log_prob: 0.0,
        choices: Vec::new(),
        fallbacks: 0,
    }];
    for (t, &f) in functions.iter().enumerate() {
        match f.category() {
            ArgumentCategory::Entity | ArgumentCategory::Concept | ArgumentCategory::Relation => {
                let kind = PoolKind::of(f).expect("KB argument");
                let mut next = Vec::new();
                for part in &partials {
                    let mut pools = part.pools.clone();
                    let (cands, fell_back) = active_candidates(&mut pools, kb, f, linked.as_deref(), opts.prune);
                    if cands.is_empty() {
                        return Err(ArgError::EmptyPool { step: t, pool: kind.name() });
                    }
                    let enc = encode_candidates(parser, kb, kind, &cands, cache)?;
                    let lp = log_softmax(&candidate_logits(replay.g(t), &enc));
                    let mut order: Vec<usize> = (0..cands.len()).collect();
                    order.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
                    order.truncate(opts.top_k);
                    for i in order {
                        let arg = ArgId::from_index(kind, cands[i]);
                        let mut p = Partial { pools: pools.clone(), ..part.clone() };
                        if opts.prune {
                            p.pools.update(kb, f, arg)?;
                        }
                        p.args[t] = arg.label(kb).to_string();
                        p.log_prob += lp[i];
                        p.fallbacks += fell_back as usize;
                        p.choices.push(ArgChoice { step: t, kind, candidates: cands.clone(), chosen: i, log_prob: lp[i] });
                        next.push(p);
                    }
                }
                partials = keep_best_per_state(next, opts.top_k);
            }
            ArgumentCategory::LiteralText => {
                let hint = lexicon.literal_hint(f, question);
                for p in &mut partials {
                    p.args[t] = hint.clone();
                }
            }
            ArgumentCategory::Empty => {}
        }
    }
    partials.sort_by(rank);
    partials.truncate(opts.top_k);
    Ok(partials
        .into_iter()
        .map(|p| FilledProgram {
            program: Program::new(functions.iter().zip(p.args).map(|(&f, a)| Step::new(f, a)).collect()),
            log_prob: p.log_prob,
            choices: p.choices,
            fallbacks: p.fallbacks,
        })
        .collect())
}

/// Replays a gold program's argument choices through the same pools the
/// parser would see. Gold arguments missing from the active pool are
/// offered against the full category instead.
pub fn gold_choices(
    program: &Program,
    question: &str,
    kb: &KnowledgeBase,
    lexicon: &Lexicon,
    opts: &ArgOptions,
) -> Result<(Vec<ArgChoice>, usize), ArgError> {
    let linked = linked_entities(question, kb, lexicon, opts);
    let mut pools = CandidatePools::init(kb);
    let mut choices = Vec::new();
    let mut misses = 0;
    for (t, step) in program.steps.iter().enumerate() {
        let Some(kind) = PoolKind::of(step.function) else { continue };
        let gold = resolve_argument(kb, step.function, &step.argument)
            .ok_or_else(|| ArgError::Unresolved { step: t, label: step.argument.clone(), pool: kind.name() })?;
        let (mut cands, fell_back) = active_candidates(&mut pools, kb, step.function, linked.as_deref(), opts.prune);
        misses += fell_back as usize;
        let chosen = match cands.binary_search(&gold.index()) {
            Ok(i) => i,
            Err(_) => {
                misses += 1;
                cands = (0..kind.category_size(kb)).collect();
                if opts.prune {
                    pools.widen(kb, kind);
                }
                gold.index()
            }
        };
        if opts.prune {
            pools.update(kb, step.function, gold)?;
        }
        choices.push(ArgChoice { step: t, kind, candidates: cands, chosen, log_prob: 0.0 });
    }
    Ok((choices, misses))
}

/// The KB element a step's argument text names.
pub fn resolve_argument(kb: &KnowledgeBase, function: FunctionKind, argument: &str) -> Option<ArgId> {
    let kind = PoolKind::of(function)?;
    if function == FunctionKind::Relate {
        return relation_readings(argument).into_iter().find_map(|(label, _)| ArgId::resolve(kb, kind, label));
    }
    ArgId::resolve(kb, kind, argument)
}
