//! Executes a [`Program`] against a [`KnowledgeBase`] as a postfix stack
//! machine. Empty results are values, not errors.

pub mod args;
mod oracle;
mod value;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::kb::{label::normalize, EntityId, KnowledgeBase, Literal, Qualifier};
use crate::program::{relation_readings, Direction, FunctionKind, Program};

pub use args::{Condition, Decoded, Extreme};
pub use oracle::brute_force_oracle;
pub use value::{format_number, Fact, FactRef, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("step {step}: {function} pops more values than the stack holds")]
    StackUnderflow { step: usize, function: FunctionKind },
    #[error("program leaves {remaining} values on the stack, expected exactly one")]
    StackLeftover { remaining: usize },
    #[error("step {step}: control token {function} inside a program")]
    ControlToken { step: usize, function: FunctionKind },
    #[error("step {step}: {function} cannot consume a {found} value")]
    TypeMismatch { step: usize, function: FunctionKind, found: &'static str },
    #[error("step {step}: no {category} labelled '{label}'")]
    Unresolved { step: usize, category: &'static str, label: String },
    #[error("step {step}: bad argument for {function}: {detail}")]
    BadArgument { step: usize, function: FunctionKind, detail: String },
}

impl ExecError {
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            ExecError::StackUnderflow { .. } | ExecError::StackLeftover { .. } | ExecError::ControlToken { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub function: FunctionKind,
    pub argument: String,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub value: Value,
    pub answers: Vec<String>,
    pub trace: Vec<TraceStep>,
}

/// Stack discipline pass, run before any evaluation so structural errors
/// are reported regardless of type errors further along.
pub(crate) fn check_structure(program: &Program) -> Result<(), ExecError> {
    let mut depth = 0usize;
    for (step, s) in program.steps.iter().enumerate() {
        if s.function.is_control() {
            return Err(ExecError::ControlToken { step, function: s.function });
        }
        let arity = s.function.arity();
        if depth < arity {
            return Err(ExecError::StackUnderflow { step, function: s.function });
        }
        depth = depth + 1 - arity;
    }
    if depth != 1 {
        return Err(ExecError::StackLeftover { remaining: depth });
    }
    Ok(())
}

pub fn execute(program: &Program, kb: &KnowledgeBase) -> Result<ExecutionResult, ExecError> {
    check_structure(program)?;
    let mut stack: Vec<Value> = Vec::new();
    let mut trace = Vec::with_capacity(program.len());
    for (step, s) in program.steps.iter().enumerate() {
        let inputs = stack.split_off(stack.len() - s.function.arity());
        let out = Step { kb, step, function: s.function, argument: &s.argument }.run(&inputs)?;
        trace.push(TraceStep {
            function: s.function,
            argument: s.argument.clone(),
            inputs: inputs.iter().map(Value::summary).collect(),
            output: out.summary(),
        });
        stack.push(out);
    }
    let value = stack.pop().expect("structure checked");
    let answers = value.render(kb);
    Ok(ExecutionResult { value, answers, trace })
}

struct Step<'a> {
    kb: &'a KnowledgeBase,
    step: usize,
    function: FunctionKind,
    argument: &'a str,
}

impl Step<'_> {
    fn mismatch(&self, v: &Value) -> ExecError {
        ExecError::TypeMismatch { step: self.step, function: self.function, found: v.kind_name() }
    }

    fn entities<'v>(&self, v: &'v Value) -> Result<&'v BTreeSet<EntityId>, ExecError> {
        v.entity_set().ok_or_else(|| self.mismatch(v))
    }

    fn unresolved(&self, category: &'static str) -> ExecError {
        ExecError::Unresolved { step: self.step, category, label: self.argument.trim().to_string() }
    }

    fn decoded(&self) -> Result<Decoded, ExecError> {
        args::decode(self.function, self.argument).map_err(|detail| ExecError::BadArgument {
            step: self.step,
            function: self.function,
            detail,
        })
    }

    fn run(&self, inputs: &[Value]) -> Result<Value, ExecError> {
        use FunctionKind::*;
        let kb = self.kb;
        let decoded = self.decoded()?;
        Ok(match self.function {
            FindAll => Value::Entities(kb.entity_ids().collect()),
            Find => {
                let e = kb.find_entity(self.argument).ok_or_else(|| self.unresolved("entity"))?;
                Value::Entities(BTreeSet::from([e]))
            }
            FilterConcept => {
                let input = self.entities(&inputs[0])?;
                let c = kb.find_concept(self.argument).ok_or_else(|| self.unresolved("concept"))?;
                let members = kb.instances_of(c).expect("resolved concept");
                Value::Entities(input.intersection(&members).copied().collect())
            }
            FilterStr | FilterNum | FilterYear | FilterDate => {
                let input = self.entities(&inputs[0])?;
                let Decoded::Filter { key, cond } = decoded else { unreachable!() };
                let key = normalize(&key);
                let mut facts = BTreeSet::new();
                for &e in input {
                    for &i in kb.attributes_of(e) {
                        let fact = &kb.attributes()[i];
                        if normalize(&fact.key) == key && satisfies(&cond, &fact.value) {
                            facts.insert(Fact { entity: e, source: FactRef::Attribute(i) });
                        }
                    }
                }
                Value::with_facts(facts)
            }
            QFilterStr | QFilterNum | QFilterYear | QFilterDate => {
                let Value::EntitiesWithFacts { facts, .. } = &inputs[0] else {
                    return Err(self.mismatch(&inputs[0]));
                };
                let Decoded::Filter { key, cond } = decoded else { unreachable!() };
                let key = normalize(&key);
                let kept = facts
                    .iter()
                    .filter(|f| {
                        qualifiers_of(kb, f.source)
                            .iter()
                            .any(|q| normalize(&q.key) == key && satisfies(&cond, &q.value))
                    })
                    .copied()
                    .collect();
                Value::with_facts(kept)
            }
            Relate => {
                let input = self.entities(&inputs[0])?;
                let (r, dir) = relation_readings(self.argument)
                    .into_iter()
                    .find_map(|(label, dir)| kb.find_relation(label).map(|r| (r, dir)))
                    .ok_or_else(|| self.unresolved("relation"))?;
                let mut facts = BTreeSet::new();
                for &e in input {
                    let edges = match dir {
                        Direction::Forward => kb.outgoing(e),
                        Direction::Backward => kb.incoming(e),
                    };
                    for &i in edges {
                        let t = &kb.triples()[i];
                        if t.relation == r {
                            let other = if dir == Direction::Forward { t.tail } else { t.head };
                            facts.insert(Fact { entity: other, source: FactRef::Relation(i) });
                        }
                    }
                }
                Value::with_facts(facts)
            }
            And | Or => {
                let a = self.entities(&inputs[0])?;
                let b = self.entities(&inputs[1])?;
                Value::Entities(if self.function == And {
                    a.intersection(b).copied().collect()
                } else {
                    a.union(b).copied().collect()
                })
            }
            QueryName => {
                let input = self.entities(&inputs[0])?;
                Value::Text(input.iter().map(|&e| kb.entity_label(e).to_string()).collect())
            }
            Count => Value::Number(self.entities(&inputs[0])?.len() as f64),
            QueryAttr => {
                let input = self.entities(&inputs[0])?;
                let Decoded::QueryKey { key } = decoded else { unreachable!() };
                let key = normalize(&key);
                Value::literals(
                    input
                        .iter()
                        .flat_map(|&e| kb.attributes_of(e).iter().map(|&i| &kb.attributes()[i]))
                        .filter(|f| normalize(&f.key) == key)
                        .map(|f| f.value.clone()),
                )
            }
            QueryAttrUnderCondition => {
                let input = self.entities(&inputs[0])?;
                let Decoded::UnderCondition { key, qkey, qvalue } = decoded else { unreachable!() };
                let (key, qkey, qvalue) = (normalize(&key), normalize(&qkey), normalize(&qvalue));
                Value::literals(
                    input
                        .iter()
                        .flat_map(|&e| kb.attributes_of(e).iter().map(|&i| &kb.attributes()[i]))
                        .filter(|f| normalize(&f.key) == key)
                        .filter(|f| {
                            f.qualifiers
                                .iter()
                                .any(|q| normalize(&q.key) == qkey && normalize(&q.value.canonical()) == qvalue)
                        })
                        .map(|f| f.value.clone()),
                )
            }
            QueryRelation => {
                let a = self.entities(&inputs[0])?;
                let b = self.entities(&inputs[1])?;
                let only = if self.argument.trim().is_empty() {
                    None
                } else {
                    Some(kb.find_relation(self.argument).ok_or_else(|| self.unresolved("relation"))?)
                };
                let mut names = BTreeSet::new();
                for &e in a {
                    for &i in kb.outgoing(e) {
                        let t = &kb.triples()[i];
                        if b.contains(&t.tail) && only.is_none_or(|r| r == t.relation) {
                            names.insert(kb.relation_label(t.relation).to_string());
                        }
                    }
                }
                Value::Text(names)
            }
            SelectBetween | SelectAmong => {
                let Decoded::Select { key, extreme } = decoded else { unreachable!() };
                let mut pool = self.entities(&inputs[0])?.clone();
                if self.function == SelectBetween {
                    pool.extend(self.entities(&inputs[1])?);
                }
                Value::Text(select(kb, &pool, &normalize(&key), extreme).into_iter().collect())
            }
            VerifyStr | VerifyNum | VerifyYear | VerifyDate => {
                let Value::Literals(items) = &inputs[0] else {
                    return Err(self.mismatch(&inputs[0]));
                };
                let Decoded::Verify(cond) = decoded else { unreachable!() };
                Value::Boolean(items.iter().any(|l| satisfies_loose(&cond, l)))
            }
            QueryAttrQualifier => {
                let input = self.entities(&inputs[0])?;
                let Decoded::AttrQualifier { key, value, qkey } = decoded else { unreachable!() };
                let (key, value, qkey) = (normalize(&key), normalize(&value), normalize(&qkey));
                Value::literals(
                    input
                        .iter()
                        .flat_map(|&e| kb.attributes_of(e).iter().map(|&i| &kb.attributes()[i]))
                        .filter(|f| normalize(&f.key) == key && normalize(&f.value.canonical()) == value)
                        .flat_map(|f| f.qualifiers.iter())
                        .filter(|q| normalize(&q.key) == qkey)
                        .map(|q| q.value.clone()),
                )
            }
            QueryRelationQualifier => {
                let a = self.entities(&inputs[0])?;
                let b = self.entities(&inputs[1])?;
                let Decoded::RelQualifier { pred, qkey } = decoded else { unreachable!() };
                let r = kb.find_relation(&pred).ok_or_else(|| ExecError::Unresolved {
                    step: self.step,
                    category: "relation",
                    label: pred.clone(),
                })?;
                let qkey = normalize(&qkey);
                let mut out = Vec::new();
                for &e in a {
                    for &i in kb.outgoing(e) {
                        let t = &kb.triples()[i];
                        if t.relation == r && b.contains(&t.tail) {
                            out.extend(t.qualifiers.iter().filter(|q| normalize(&q.key) == qkey).map(|q| q.value.clone()));
                        }
                    }
                }
                Value::literals(out)
            }
            Start | End => unreachable!("rejected by structure check"),
        })
    }
}

fn qualifiers_of(kb: &KnowledgeBase, source: FactRef) -> &[Qualifier] {
    match source {
        FactRef::Attribute(i) => &kb.attributes()[i].qualifiers,
        FactRef::Relation(i) => &kb.triples()[i].qualifiers,
    }
}

/// Typed match used by filters: the literal must have the condition's type.
pub(crate) fn satisfies(cond: &Condition, lit: &Literal) -> bool {
    match (cond, lit) {
        (Condition::Str(want), Literal::String { value }) => normalize(want) == normalize(value),
        (Condition::Num { value: want, unit: wu, op }, Literal::Quantity { value, unit }) => {
            wu.trim() == unit.trim() && value.partial_cmp(want).is_some_and(|o| op.holds(o))
        }
        (Condition::Year { value: want, op }, Literal::Year { value }) => op.holds(value.cmp(want)),
        (Condition::Date { value: want, op }, Literal::Date { value }) => op.holds(value.cmp(want)),
        _ => false,
    }
}

/// VerifyStr compares canonical text of any literal; the typed variants
/// behave like filters.
fn satisfies_loose(cond: &Condition, lit: &Literal) -> bool {
    match cond {
        Condition::Str(want) => normalize(want) == normalize(&lit.canonical()),
        _ => satisfies(cond, lit),
    }
}

/// Picks the entity with the extreme value of `key` (its own max for Max,
/// min for Min); ties go to the smallest id. Entities without a numeric
/// value for `key` are excluded.
fn select(kb: &KnowledgeBase, pool: &BTreeSet<EntityId>, key: &str, extreme: Extreme) -> Option<String> {
    let mut best: Option<(f64, EntityId)> = None;
    for &e in pool {
        let values = kb
            .attributes_of(e)
            .iter()
            .map(|&i| &kb.attributes()[i])
            .filter(|f| normalize(&f.key) == key)
            .filter_map(|f| f.value.magnitude());
        let own = match extreme {
            Extreme::Max => values.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            Extreme::Min => values.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        };
        let Some(v) = own else { continue };
        let better = match best {
            None => true,
            Some((b, _)) => match extreme {
                Extreme::Max => v.partial_cmp(&b) == Some(Ordering::Greater),
                Extreme::Min => v.partial_cmp(&b) == Some(Ordering::Less),
            },
        };
        if better {
            best = Some((v, e));
        }
    }
    best.map(|(_, e)| kb.entity_label(e).to_string())
}
