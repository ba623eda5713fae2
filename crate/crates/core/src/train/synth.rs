//! Synthetic source/target domains sharing question templates but no
//! labels.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::DatasetExample;
use crate::executor::execute;
use crate::kb::{ConceptId, EntityId, KbBuilder, KbError, KnowledgeBase, Literal, RelationId};
use crate::program::{FunctionKind::*, Program, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionType {
    Simple,
    Composition,
    Conjunction,
    Count,
    Comparison,
}

impl QuestionType {
    pub const ALL: [QuestionType; 5] =
        [QuestionType::Simple, QuestionType::Composition, QuestionType::Conjunction, QuestionType::Count, QuestionType::Comparison];

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Simple => "simple",
            QuestionType::Composition => "composition",
            QuestionType::Conjunction => "conjunction",
            QuestionType::Count => "count",
            QuestionType::Comparison => "comparison",
        }
    }

    /// Classifies a sketch by the templates' function shapes.
    pub fn of_sketch(functions: &[crate::program::FunctionKind]) -> Option<QuestionType> {
        Some(match functions {
            [Find, Relate, FilterConcept] => QuestionType::Simple,
            [Find, Relate, FilterConcept, Relate, FilterConcept] => QuestionType::Composition,
            [Find, Relate, Find, Relate, And, FilterConcept] => QuestionType::Conjunction,
            [Find, Relate, FilterConcept, Count] => QuestionType::Count,
            [Find, Relate, FilterConcept, SelectAmong] => QuestionType::Comparison,
            _ => return None,
        })
    }

    /// Multi-hop questions whose arguments chain through the ontology.
    pub fn is_compositional(self) -> bool {
        matches!(self, QuestionType::Composition | QuestionType::Conjunction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub source_size: usize,
    pub target_size: usize,
    pub dev_size: usize,
    pub entities: usize,
    pub parent_concepts: usize,
    pub leaf_concepts: usize,
    pub relations: usize,
    pub attributes_per_concept: usize,
    /// Relative frequency of each question type, in [`QuestionType::ALL`] order.
    pub mix: [f64; 5],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            source_size: 1000,
            target_size: 300,
            dev_size: 200,
            entities: 1200,
            parent_concepts: 4,
            leaf_concepts: 12,
            relations: 50,
            attributes_per_concept: 2,
            mix: [0.25, 0.25, 0.25, 0.125, 0.125],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("could not sample a {0} question with a non-empty answer")]
    Exhausted(&'static str),
}

/// Everything the transfer experiments need. `target_gold` holds the hidden
/// programs behind `target_train` followed by `target_dev`; training code
/// never receives it.
#[derive(Debug, Clone)]
pub struct SyntheticSuite {
    pub source_kb: KnowledgeBase,
    pub source: Vec<DatasetExample>,
    pub target_kb: KnowledgeBase,
    pub target_train: Vec<DatasetExample>,
    pub target_dev: Vec<DatasetExample>,
    pub target_gold: Vec<Program>,
    pub source_types: Vec<QuestionType>,
    pub target_types: Vec<QuestionType>,
}

const TEMPLATE_WORDS: &[&str] = &[
    "what", "which", "is", "the", "of", "for", "has", "how", "many", "are", "number", "among", "that", "also", "both",
    "and", "largest", "smallest", "does", "have", "as", "its", "a", "an", "to", "with", "who", "whose",
];

struct Words {
    consonants: &'static [&'static str],
    used: HashSet<String>,
}

impl Words {
    fn fresh(&mut self, syllables: usize, rng: &mut ChaCha8Rng) -> String {
        const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
        loop {
            let w: String = (0..syllables)
                .map(|_| format!("{}{}", self.consonants.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
                .collect();
            if !TEMPLATE_WORDS.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

/// Question, gold program, answers, type.
type Generated = (String, Program, Vec<String>, QuestionType);

struct Domain {
    kb: KnowledgeBase,
    leaves: Vec<ConceptId>,
    by_leaf: BTreeMap<ConceptId, Vec<EntityId>>,
    leaf_of: Vec<ConceptId>,
    rel_dom: Vec<ConceptId>,
    rel_ran: Vec<ConceptId>,
    /// Outgoing edges: (head, relation) → tails.
    out: BTreeMap<(EntityId, RelationId), Vec<EntityId>>,
    /// Incoming edges: tail → (head, relation).
    inc: BTreeMap<EntityId, Vec<(EntityId, RelationId)>>,
    attr_keys: BTreeMap<ConceptId, Vec<String>>,
}

fn build_domain(cfg: &SynthConfig, consonants: &'static [&'static str], tag: &str, rng: &mut ChaCha8Rng) -> Result<Domain, SynthError> {
    let mut words = Words { consonants, used: HashSet::new() };
    let mut b = KbBuilder::new();
    let parents: Vec<ConceptId> = (0..cfg.parent_concepts)
        .map(|i| b.concept(&format!("{tag}p{i}"), &words.fresh(3, rng)))
        .collect::<Result<_, _>>()?;
    let mut leaves = Vec::new();
    for i in 0..cfg.leaf_concepts {
        let c = b.concept(&format!("{tag}c{i}"), &words.fresh(3, rng))?;
        b.subclass_of(c, parents[i % parents.len()])?;
        leaves.push(c);
    }
    let mut attr_keys = BTreeMap::new();
    for &c in &leaves {
        let keys: Vec<String> = (0..cfg.attributes_per_concept).map(|_| words.fresh(3, rng)).collect();
        attr_keys.insert(c, keys);
    }
    let mut rel_dom = Vec::new();
    let mut rel_ran = Vec::new();
    for i in 0..cfg.relations {
        let dom = leaves[i % leaves.len()];
        let ran = loop {
            let c = *leaves.choose(rng).unwrap();
            if c != dom || leaves.len() == 1 {
                break c;
            }
        };
        let label = if rng.random_bool(0.5) {
            format!("{} {}", words.fresh(2, rng), words.fresh(2, rng))
        } else {
            words.fresh(3, rng)
        };
        b.relation(&format!("{tag}r{i}"), &label, &[dom], &[ran])?;
        rel_dom.push(dom);
        rel_ran.push(ran);
    }
    // Entity names pair a given name with a family name from pools sized so
    // each word recurs in a label or two.
    let pool = (cfg.entities * 2 / 3).max(8);
    let given: Vec<String> = (0..pool).map(|_| words.fresh(3, rng)).collect();
    let family: Vec<String> = (0..pool).map(|_| words.fresh(3, rng)).collect();
    let mut names = HashSet::new();
    let mut by_leaf: BTreeMap<ConceptId, Vec<EntityId>> = BTreeMap::new();
    let mut leaf_of = Vec::new();
    for i in 0..cfg.entities {
        let name = loop {
            let n = format!("{} {}", given.choose(rng).unwrap(), family.choose(rng).unwrap());
            if names.insert(n.clone()) {
                break n;
            }
        };
        let e = b.entity(&format!("{tag}e{i}"), &name)?;
        let leaf = leaves[i % leaves.len()];
        b.instance_of(e, leaf)?;
        by_leaf.entry(leaf).or_default().push(e);
        leaf_of.push(leaf);
        for key in &attr_keys[&leaf] {
            b.attribute(e, key, Literal::quantity(rng.random_range(1..10_000) as f64, ""), Vec::new())?;
        }
    }
    let mut out: BTreeMap<(EntityId, RelationId), Vec<EntityId>> = BTreeMap::new();
    let mut inc: BTreeMap<EntityId, Vec<(EntityId, RelationId)>> = BTreeMap::new();
    for r in 0..cfg.relations {
        let rid = RelationId(r);
        let tails = &by_leaf[&rel_ran[r]];
        for &h in &by_leaf[&rel_dom[r]] {
            if !rng.random_bool(0.7) {
                continue;
            }
            let n = rng.random_range(1..=3);
            let mut chosen: Vec<EntityId> = tails.choose_multiple(rng, n).copied().collect();
            chosen.sort();
            for &t in &chosen {
                b.triple(h, rid, t, Vec::new())?;
                inc.entry(t).or_default().push((h, rid));
            }
            out.insert((h, rid), chosen);
        }
    }
    Ok(Domain { kb: b.build()?, leaves, by_leaf, leaf_of, rel_dom, rel_ran, out, inc, attr_keys })
}

fn step(f: crate::program::FunctionKind, arg: &str) -> Step {
    Step::new(f, arg)
}

impl Domain {
    fn e(&self, e: EntityId) -> &str {
        self.kb.entity_label(e)
    }
    fn r(&self, r: RelationId) -> &str {
        self.kb.relation_label(r)
    }
    fn c(&self, c: ConceptId) -> &str {
        self.kb.concept_label(c)
    }

    /// A random (head, relation) pair with at least one tail.
    fn edge(&self, rng: &mut ChaCha8Rng) -> (EntityId, RelationId) {
        loop {
            let h = EntityId(rng.random_range(0..self.leaf_of.len()));
            let leaf = self.leaf_of[h.0];
            let rels: Vec<usize> = (0..self.rel_dom.len()).filter(|&r| self.rel_dom[r] == leaf).collect();
            if let Some(&r) = rels.choose(rng) {
                if self.out.contains_key(&(h, RelationId(r))) {
                    return (h, RelationId(r));
                }
            }
        }
    }

    fn sample(&self, kind: QuestionType, rng: &mut ChaCha8Rng) -> Option<(String, Program)> {
        let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n);
        match kind {
            QuestionType::Simple | QuestionType::Count | QuestionType::Comparison => {
                let (h, r) = self.edge(rng);
                let c = self.rel_ran[r.0];
                let base = vec![step(Find, self.e(h)), step(Relate, self.r(r)), step(FilterConcept, self.c(c))];
                let (e, rl, cl) = (self.e(h), self.r(r), self.c(c));
                match kind {
                    QuestionType::Simple => {
                        let q = match pick(rng, 3) {
                            0 => format!("what {cl} is the {rl} of {e}"),
                            1 => format!("which {cl} is {rl} for {e}"),
                            _ => format!("{e} has which {rl}"),
                        };
                        Some((q, Program::new(base)))
                    }
                    QuestionType::Count => {
                        let q = match pick(rng, 2) {
                            0 => format!("how many {cl} are the {rl} of {e}"),
                            _ => format!("what is the number of {rl} of {e}"),
                        };
                        let mut steps = base;
                        steps.push(step(Count, ""));
                        Some((q, Program::new(steps)))
                    }
                    _ => {
                        let key = self.attr_keys[&c].choose(rng)?.clone();
                        let small = rng.random_bool(0.5);
                        let word = if small { "smallest" } else { "largest" };
                        let q = match pick(rng, 2) {
                            0 => format!("which {cl} that is the {rl} of {e} has the {word} {key}"),
                            _ => format!("among the {rl} of {e} which has the {word} {key}"),
                        };
                        let mut steps = base;
                        steps.push(step(SelectAmong, &format!("{key}|{word}")));
                        Some((q, Program::new(steps)))
                    }
                }
            }
            QuestionType::Composition => {
                let (h, r1) = self.edge(rng);
                let c1 = self.rel_ran[r1.0];
                let mids = &self.out[&(h, r1)];
                let second: Vec<RelationId> = (0..self.rel_dom.len())
                    .map(RelationId)
                    .filter(|&r2| self.rel_dom[r2.0] == c1 && mids.iter().any(|&m| self.out.contains_key(&(m, r2))))
                    .collect();
                let r2 = *second.choose(rng)?;
                let c2 = self.rel_ran[r2.0];
                let (e, a, b, ca, cb) = (self.e(h), self.r(r1), self.r(r2), self.c(c1), self.c(c2));
                let q = match pick(rng, 2) {
                    0 => format!("what {cb} is the {b} of the {ca} that is the {a} of {e}"),
                    _ => format!("which {cb} is {b} for the {a} of {e}"),
                };
                let steps = vec![
                    step(Find, e),
                    step(Relate, a),
                    step(FilterConcept, ca),
                    step(Relate, b),
                    step(FilterConcept, cb),
                ];
                Some((q, Program::new(steps)))
            }
            QuestionType::Conjunction => {
                let leaf = *self.leaves.choose(rng)?;
                let t = *self.by_leaf[&leaf].choose(rng)?;
                let ins = self.inc.get(&t)?;
                let &(h2, r2) = ins.choose(rng)?;
                let others: Vec<&(EntityId, RelationId)> = ins.iter().filter(|(h, _)| *h != h2).collect();
                let &&(h1, r1) = others.choose(rng)?;
                let c = self.rel_ran[r2.0];
                let (e1, e2, a, b, cl) = (self.e(h1), self.e(h2), self.r(r1), self.r(r2), self.c(c));
                let q = match pick(rng, 2) {
                    0 => format!("which {cl} is the {a} of {e1} and also the {b} of {e2}"),
                    _ => format!("what {cl} is both {a} for {e1} and {b} for {e2}"),
                };
                let steps = vec![
                    step(Find, e1),
                    step(Relate, a),
                    step(Find, e2),
                    step(Relate, b),
                    step(And, ""),
                    step(FilterConcept, cl),
                ];
                Some((q, Program::new(steps)))
            }
        }
    }

    fn examples(&self, n: usize, mix: &[f64; 5], rng: &mut ChaCha8Rng) -> Result<Vec<Generated>, SynthError> {
        let total: f64 = mix.iter().sum();
        let mut out = Vec::with_capacity(n);
        let mut seen = HashSet::new();
        for i in 0..n {
            // Deterministic quota per type keeps small sets balanced.
            let pos = (i as f64 + 0.5) / n as f64 * total;
            let mut acc = 0.0;
            let mut kind = QuestionType::Simple;
            for (k, w) in QuestionType::ALL.iter().zip(mix) {
                acc += w;
                kind = *k;
                if pos < acc {
                    break;
                }
            }
            let mut tries = 0;
            loop {
                tries += 1;
                if tries > 10_000 {
                    return Err(SynthError::Exhausted(kind.name()));
                }
                let Some((q, program)) = self.sample(kind, rng) else { continue };
                if !seen.insert(q.clone()) {
                    continue;
                }
                let Ok(res) = execute(&program, &self.kb) else { continue };
                if res.answers.is_empty() || res.answers == ["0"] {
                    continue;
                }
                out.push((q, program, res.answers, kind));
                break;
            }
        }
        out.shuffle(rng);
        Ok(out)
    }
}

const SOURCE_CONSONANTS: &[&str] = &["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t"];
const TARGET_CONSONANTS: &[&str] = &["f", "h", "j", "v", "w", "z", "ch", "sh", "th", "y"];

pub fn generate_synthetic_domains(cfg: &SynthConfig) -> Result<SyntheticSuite, SynthError> {
    if cfg.entities == 0 || cfg.leaf_concepts == 0 || cfg.parent_concepts == 0 || cfg.relations == 0 {
        return Err(SynthError::Config("sizes must be positive".into()));
    }
    if cfg.source_size + cfg.target_size + cfg.dev_size == 0 {
        return Err(SynthError::Config("no examples requested".into()));
    }
    if cfg.mix.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || cfg.mix.iter().sum::<f64>() <= 0.0 {
        return Err(SynthError::Config("question mix needs non-negative weights with a positive sum".into()));
    }
    if cfg.entities < cfg.leaf_concepts * 2 {
        return Err(SynthError::Config("need at least two entities per leaf concept".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let src = build_domain(cfg, SOURCE_CONSONANTS, "s", &mut rng)?;
    let tgt = build_domain(cfg, TARGET_CONSONANTS, "t", &mut rng)?;
    let source_rows = src.examples(cfg.source_size, &cfg.mix, &mut rng)?;
    let target_rows = tgt.examples(cfg.target_size + cfg.dev_size, &cfg.mix, &mut rng)?;
    let tag = |mut ex: DatasetExample, d: &str| {
        ex.domain = Some(d.to_string());
        ex
    };
    let source = source_rows
        .iter()
        .map(|(q, p, a, _)| tag(DatasetExample::with_program(q.clone(), p, Some(a.clone())), "source"))
        .collect();
    let target: Vec<DatasetExample> =
        target_rows.iter().map(|(q, _, a, _)| tag(DatasetExample::with_answers(q.clone(), a.clone()), "target")).collect();
    let (train, dev) = target.split_at(cfg.target_size);
    Ok(SyntheticSuite {
        source_types: source_rows.iter().map(|r| r.3).collect(),
        target_types: target_rows.iter().map(|r| r.3).collect(),
        target_gold: target_rows.into_iter().map(|r| r.1).collect(),
        source_kb: src.kb,
        source,
        target_kb: tgt.kb,
        target_train: train.to_vec(),
        target_dev: dev.to_vec(),
    })
}
