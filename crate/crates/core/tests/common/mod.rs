//! Random knowledge bases and well-typed random programs shared by the
//! integration tests.

#![allow(dead_code)]

use chrono::NaiveDate;
use program_transfer::kb::{KbBuilder, KnowledgeBase, Literal, Qualifier};
use program_transfer::program::{FunctionKind, Program, Step};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SYLLABLES: &[&str] = &["ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "ve", "zu"];

fn word(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(2..=3)).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// `n` distinct labels of one or two words.
fn labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    while out.len() < n {
        let l = if rng.random_bool(0.5) { word(rng) } else { format!("{} {}", word(rng), word(rng)) };
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

pub const STRING_KEY: &str = "nickname";
pub const NUM_KEY: &str = "height";
pub const YEAR_KEY: &str = "founded";
pub const DATE_KEY: &str = "opened";
pub const QUAL_YEAR: &str = "start year";
pub const QUAL_STR: &str = "note";
pub const NICKNAMES: &[&str] = &["red", "blue", "green"];
pub const UNITS: &[&str] = &["metre", "foot"];

fn year(rng: &mut ChaCha8Rng) -> i32 {
    rng.random_range(1990..2000)
}

fn date(rng: &mut ChaCha8Rng) -> NaiveDate {
    NaiveDate::from_ymd_opt(rng.random_range(2000..2003), rng.random_range(1..=3), 1).unwrap()
}

fn qualifiers(rng: &mut ChaCha8Rng) -> Vec<Qualifier> {
    let mut q = Vec::new();
    if rng.random_bool(0.5) {
        q.push(Qualifier { key: QUAL_YEAR.into(), value: Literal::Year { value: year(rng) } });
    }
    if rng.random_bool(0.3) {
        q.push(Qualifier { key: QUAL_STR.into(), value: Literal::string(*NICKNAMES.choose(rng).unwrap()) });
    }
    q
}

/// A random KB with at most `max_entities` entities, an acyclic concept
/// hierarchy, typed relations, attributes and qualifiers.
pub fn random_kb(rng: &mut ChaCha8Rng, max_entities: usize) -> KnowledgeBase {
    let ne = rng.random_range(1..=max_entities);
    let nc = rng.random_range(1..=8);
    let nr = rng.random_range(1..=6);
    let mut b = KbBuilder::new();
    let concepts: Vec<_> = labels(rng, nc).iter().enumerate().map(|(i, l)| b.concept(&format!("c{i}"), l).unwrap()).collect();
    for i in 1..nc {
        for j in 0..i {
            if rng.random_bool(0.25) {
                b.subclass_of(concepts[i], concepts[j]).unwrap();
            }
        }
    }
    let pick = |rng: &mut ChaCha8Rng| -> Vec<_> { concepts.iter().copied().filter(|_| rng.random_bool(0.3)).collect() };
    let mut relations = Vec::new();
    for (i, l) in labels(rng, nr).iter().enumerate() {
        let (d, r) = (pick(rng), pick(rng));
        relations.push(b.relation(&format!("r{i}"), l, &d, &r).unwrap());
    }
    let entities: Vec<_> = labels(rng, ne).iter().enumerate().map(|(i, l)| b.entity(&format!("e{i}"), l).unwrap()).collect();
    for &e in &entities {
        for &c in &concepts {
            if rng.random_bool(0.3) {
                b.instance_of(e, c).unwrap();
            }
        }
        if rng.random_bool(0.5) {
            let v = Literal::string(*NICKNAMES.choose(rng).unwrap());
            let q = qualifiers(rng);
            b.attribute(e, STRING_KEY, v, q).unwrap();
        }
        if rng.random_bool(0.6) {
            let v = Literal::quantity(f64::from(rng.random_range(1..6)), *UNITS.choose(rng).unwrap());
            let q = qualifiers(rng);
            b.attribute(e, NUM_KEY, v, q).unwrap();
        }
        if rng.random_bool(0.5) {
            let v = Literal::Year { value: year(rng) };
            b.attribute(e, YEAR_KEY, v, vec![]).unwrap();
        }
        if rng.random_bool(0.4) {
            let v = Literal::Date { value: date(rng) };
            let q = qualifiers(rng);
            b.attribute(e, DATE_KEY, v, q).unwrap();
        }
    }
    for _ in 0..rng.random_range(0..=3 * ne) {
        let h = *entities.choose(rng).unwrap();
        let t = *entities.choose(rng).unwrap();
        let r = *relations.choose(rng).unwrap();
        let q = qualifiers(rng);
        b.triple(h, r, t, q).unwrap();
    }
    b.build().unwrap()
}

const OPS: &[&str] = &["=", "!=", "<", ">"];

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    kb: &'a KnowledgeBase,
    out: Vec<Step>,
}

impl Gen<'_> {
    fn emit(&mut self, function: FunctionKind, argument: impl Into<String>) {
        self.out.push(Step { function, argument: argument.into() });
    }

    fn entity(&mut self) -> String {
        let i = self.rng.random_range(0..self.kb.num_entities());
        self.kb.entity_label(self.kb.entity_ids().nth(i).unwrap()).to_string()
    }

    fn concept(&mut self) -> String {
        let i = self.rng.random_range(0..self.kb.num_concepts());
        self.kb.concept_label(self.kb.concept_ids().nth(i).unwrap()).to_string()
    }

    fn relation(&mut self) -> String {
        let i = self.rng.random_range(0..self.kb.num_relations());
        self.kb.relation_label(self.kb.relation_ids().nth(i).unwrap()).to_string()
    }

    fn op(&mut self) -> &'static str {
        OPS.choose(self.rng).unwrap()
    }

    fn filter_arg(&mut self, f: FunctionKind) -> String {
        use FunctionKind::*;
        match f {
            FilterStr => format!("{STRING_KEY}|{}", NICKNAMES.choose(self.rng).unwrap()),
            QFilterStr => format!("{QUAL_STR}|{}", NICKNAMES.choose(self.rng).unwrap()),
            FilterNum | QFilterNum => {
                format!("{NUM_KEY}|{} {}|{}", self.rng.random_range(1..6), UNITS.choose(self.rng).unwrap(), self.op())
            }
            FilterYear => format!("{YEAR_KEY}|{}|{}", year(self.rng), self.op()),
            QFilterYear => format!("{QUAL_YEAR}|{}|{}", year(self.rng), self.op()),
            FilterDate | QFilterDate => format!("{DATE_KEY}|{}|{}", date(self.rng).format("%Y-%m-%d"), self.op()),
            _ => unreachable!(),
        }
    }

    /// Emits an entity-set expression of at most `budget` tokens and
    /// returns the tokens used.
    fn entities(&mut self, budget: usize) -> usize {
        use FunctionKind::*;
        let roll = if budget <= 1 { 0 } else { self.rng.random_range(0..10) };
        match roll {
            0 | 1 => {
                if self.rng.random_bool(0.85) {
                    let e = self.entity();
                    self.emit(Find, e);
                } else {
                    self.emit(FindAll, "");
                }
                1
            }
            2 => {
                let n = self.entities(budget - 1);
                let c = self.concept();
                self.emit(FilterConcept, c);
                n + 1
            }
            3 | 4 => {
                let n = self.entities(budget - 1);
                let dir = ["", " forward", " backward"].choose(self.rng).unwrap();
                let r = self.relation();
                self.emit(Relate, format!("{r}{dir}"));
                if n + 2 <= budget && self.rng.random_bool(0.3) {
                    let q = *[QFilterStr, QFilterNum, QFilterYear, QFilterDate].choose(self.rng).unwrap();
                    let a = self.filter_arg(q);
                    self.emit(q, a);
                    return n + 2;
                }
                n + 1
            }
            5 | 6 => {
                let n = self.entities(budget - 1);
                let f = *[FilterStr, FilterNum, FilterYear, FilterDate].choose(self.rng).unwrap();
                let a = self.filter_arg(f);
                self.emit(f, a);
                n + 1
            }
            _ if budget >= 3 => {
                let a = self.entities(budget - 2);
                let b = self.entities(budget - 1 - a);
                let f = if self.rng.random_bool(0.5) { And } else { Or };
                self.emit(f, "");
                a + b + 1
            }
            _ => self.entities(1),
        }
    }

    fn top(&mut self, budget: usize) {
        use FunctionKind::*;
        let roll = self.rng.random_range(0..12);
        if roll >= 8 && budget >= 3 {
            let a = self.entities(budget - 2);
            self.entities(budget - 1 - a);
            match roll {
                8 => {
                    let r = if self.rng.random_bool(0.5) { String::new() } else { self.relation() };
                    self.emit(QueryRelation, r);
                }
                9 => {
                    let d = ["greater", "less"].choose(self.rng).unwrap();
                    let key = [NUM_KEY, YEAR_KEY, DATE_KEY].choose(self.rng).unwrap();
                    self.emit(SelectBetween, format!("{key}|{d}"));
                }
                _ => {
                    let r = self.relation();
                    let q = [QUAL_YEAR, QUAL_STR].choose(self.rng).unwrap();
                    self.emit(QueryRelationQualifier, format!("{r}|{q}"));
                }
            }
            return;
        }
        if budget == 1 {
            self.entities(1);
            return;
        }
        let used = self.entities(budget - if roll == 7 { 2 } else { 1 });
        match roll {
            0 => {}
            1 | 2 => self.emit(QueryName, ""),
            3 => self.emit(Count, ""),
            4 => {
                let key = [STRING_KEY, NUM_KEY, YEAR_KEY, DATE_KEY].choose(self.rng).unwrap();
                self.emit(QueryAttr, *key);
            }
            5 => {
                let d = ["largest", "smallest"].choose(self.rng).unwrap();
                let key = [NUM_KEY, YEAR_KEY, DATE_KEY].choose(self.rng).unwrap();
                self.emit(SelectAmong, format!("{key}|{d}"));
            }
            6 => {
                let q = year(self.rng);
                if self.rng.random_bool(0.5) {
                    self.emit(QueryAttrUnderCondition, format!("{NUM_KEY}|{QUAL_YEAR}|{q}"));
                } else {
                    let v = format!("{} {}", self.rng.random_range(1..6), UNITS.choose(self.rng).unwrap());
                    self.emit(QueryAttrQualifier, format!("{NUM_KEY}|{v}|{QUAL_YEAR}"));
                }
            }
            _ if used + 2 <= budget => {
                let (f, key) = *[(VerifyNum, NUM_KEY), (VerifyYear, YEAR_KEY), (VerifyDate, DATE_KEY), (VerifyStr, STRING_KEY)]
                    .choose(self.rng)
                    .unwrap();
                self.emit(QueryAttr, key);
                let arg = match f {
                    VerifyStr => NICKNAMES.choose(self.rng).unwrap().to_string(),
                    VerifyNum => format!("{} {}|{}", self.rng.random_range(1..6), UNITS.choose(self.rng).unwrap(), self.op()),
                    VerifyYear => format!("{}|{}", year(self.rng), self.op()),
                    _ => format!("{}|{}", date(self.rng).format("%Y-%m-%d"), self.op()),
                };
                self.emit(f, arg);
            }
            _ => self.emit(Count, ""),
        }
    }
}

/// A structurally valid, mostly well-typed program of at most
/// `max_tokens` steps whose arguments name elements of `kb`.
pub fn random_program(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, max_tokens: usize) -> Program {
    let budget = rng.random_range(1..=max_tokens);
    let mut g = Gen { rng, kb, out: Vec::new() };
    g.top(budget);
    Program::new(g.out)
}

/// Random token sequences with random stack shapes, including control
/// tokens; most are structurally invalid.
pub fn random_tokens(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, max_tokens: usize) -> Program {
    let n = rng.random_range(0..=max_tokens);
    let steps = (0..n)
        .map(|_| {
            let f = *FunctionKind::ALL.choose(rng).unwrap();
            let argument = match f {
                FunctionKind::Find => kb.entity_label(kb.entity_ids().next().unwrap()).to_string(),
                _ => String::new(),
            };
            Step { function: f, argument }
        })
        .collect();
    Program::new(steps)
}
