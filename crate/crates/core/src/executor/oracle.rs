//! Reference evaluator: the same contract as [`super::execute`], computed
//! by scanning every entity, triple and attribute fact at every step
//! without touching any KB index.

use std::collections::BTreeSet;

use super::args::{self, Condition, Decoded, Extreme};
use super::{ExecError, ExecutionResult, Fact, FactRef, TraceStep, Value};
use crate::kb::{label::normalize, ConceptId, EntityId, KnowledgeBase, Literal, RelationId};
use crate::kb::CompareOp;
use crate::program::{relation_readings, Direction, FunctionKind, Program};

pub fn brute_force_oracle(program: &Program, kb: &KnowledgeBase) -> Result<ExecutionResult, ExecError> {
    let mut depth = 0usize;
    for (step, s) in program.steps.iter().enumerate() {
        if matches!(s.function, FunctionKind::Start | FunctionKind::End) {
            return Err(ExecError::ControlToken { step, function: s.function });
        }
        if s.function.arity() > depth {
            return Err(ExecError::StackUnderflow { step, function: s.function });
        }
        depth = depth - s.function.arity() + 1;
    }
    if depth != 1 {
        return Err(ExecError::StackLeftover { remaining: depth });
    }

    let mut stack: Vec<Value> = Vec::new();
    let mut trace = Vec::new();
    for (step, s) in program.steps.iter().enumerate() {
        let mut inputs = Vec::new();
        for _ in 0..s.function.arity() {
            inputs.insert(0, stack.pop().unwrap());
        }
        let out = eval(kb, step, s.function, &s.argument, &inputs)?;
        trace.push(TraceStep {
            function: s.function,
            argument: s.argument.clone(),
            inputs: inputs.iter().map(Value::summary).collect(),
            output: out.summary(),
        });
        stack.push(out);
    }
    let value = stack.pop().unwrap();
    let answers = value.render(kb);
    Ok(ExecutionResult { value, answers, trace })
}

fn scan_entities(kb: &KnowledgeBase, text: &str) -> Vec<EntityId> {
    let want = normalize(text);
    kb.entity_ids().filter(|&e| normalize(kb.entity_label(e)) == want).collect()
}

fn scan_concept(kb: &KnowledgeBase, text: &str) -> Option<ConceptId> {
    let want = normalize(text);
    kb.concept_ids().find(|&c| normalize(kb.concept_label(c)) == want)
}

fn scan_relation(kb: &KnowledgeBase, text: &str) -> Option<RelationId> {
    let want = normalize(text);
    kb.relation_ids().find(|&r| normalize(kb.relation_label(r)) == want)
}

fn members(kb: &KnowledgeBase, c: ConceptId) -> BTreeSet<EntityId> {
    let mut closed = BTreeSet::from([c]);
    loop {
        let before = closed.len();
        for &(child, parent) in kb.subclass_pairs() {
            if closed.contains(&parent) {
                closed.insert(child);
            }
        }
        if closed.len() == before {
            break;
        }
    }
    kb.entity_ids()
        .filter(|&e| kb.type_of(e).unwrap().iter().any(|t| closed.contains(t)))
        .collect()
}

fn op_ok(op: CompareOp, lhs: f64, rhs: f64) -> bool {
    match op {
        CompareOp::Eq => lhs == rhs,
        CompareOp::Ne => lhs != rhs,
        CompareOp::Lt => lhs < rhs,
        CompareOp::Gt => lhs > rhs,
    }
}

fn typed_match(cond: &Condition, lit: &Literal) -> bool {
    match cond {
        Condition::Str(want) => match lit {
            Literal::String { value } => normalize(value) == normalize(want),
            _ => false,
        },
        Condition::Num { value, unit, op } => match lit {
            Literal::Quantity { value: v, unit: u } => u.trim() == unit.trim() && op_ok(*op, *v, *value),
            _ => false,
        },
        Condition::Year { value, op } => match lit {
            Literal::Year { value: v } => op_ok(*op, f64::from(*v), f64::from(*value)),
            _ => false,
        },
        Condition::Date { value, op } => match lit {
            Literal::Date { value: v } => {
                let (a, b) = (v.format("%Y%m%d").to_string(), value.format("%Y%m%d").to_string());
                let (a, b): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
                op_ok(*op, a, b)
            }
            _ => false,
        },
    }
}

fn entity_input(step: usize, function: FunctionKind, v: &Value) -> Result<BTreeSet<EntityId>, ExecError> {
    match v {
        Value::Entities(s) => Ok(s.clone()),
        Value::EntitiesWithFacts { entities, .. } => Ok(entities.clone()),
        other => Err(ExecError::TypeMismatch { step, function, found: other.kind_name() }),
    }
}

fn eval(
    kb: &KnowledgeBase,
    step: usize,
    function: FunctionKind,
    argument: &str,
    inputs: &[Value],
) -> Result<Value, ExecError> {
    use FunctionKind::*;
    let decoded = args::decode(function, argument)
        .map_err(|detail| ExecError::BadArgument { step, function, detail })?;
    let unresolved = |category: &'static str, label: &str| ExecError::Unresolved {
        step,
        category,
        label: label.trim().to_string(),
    };
    let ents = |i: usize| entity_input(step, function, &inputs[i]);

    Ok(match function {
        FindAll => Value::Entities(kb.entity_ids().collect()),
        Find => {
            let found = scan_entities(kb, argument);
            if found.is_empty() {
                return Err(unresolved("entity", argument));
            }
            Value::Entities(found.into_iter().collect())
        }
        FilterConcept => {
            let input = ents(0)?;
            let c = scan_concept(kb, argument).ok_or_else(|| unresolved("concept", argument))?;
            let m = members(kb, c);
            Value::Entities(input.into_iter().filter(|e| m.contains(e)).collect())
        }
        FilterStr | FilterNum | FilterYear | FilterDate => {
            let input = ents(0)?;
            let Decoded::Filter { key, cond } = decoded else { unreachable!() };
            let mut facts = BTreeSet::new();
            for (i, f) in kb.attributes().iter().enumerate() {
                if input.contains(&f.entity) && normalize(&f.key) == normalize(&key) && typed_match(&cond, &f.value) {
                    facts.insert(Fact { entity: f.entity, source: FactRef::Attribute(i) });
                }
            }
            Value::with_facts(facts)
        }
        QFilterStr | QFilterNum | QFilterYear | QFilterDate => {
            let Value::EntitiesWithFacts { facts, .. } = &inputs[0] else {
                return Err(ExecError::TypeMismatch { step, function, found: inputs[0].kind_name() });
            };
            let Decoded::Filter { key, cond } = decoded else { unreachable!() };
            let mut kept = BTreeSet::new();
            for f in facts {
                let quals = match f.source {
                    FactRef::Attribute(i) => &kb.attributes()[i].qualifiers,
                    FactRef::Relation(i) => &kb.triples()[i].qualifiers,
                };
                if quals.iter().any(|q| normalize(&q.key) == normalize(&key) && typed_match(&cond, &q.value)) {
                    kept.insert(*f);
                }
            }
            Value::with_facts(kept)
        }
        Relate => {
            let input = ents(0)?;
            let (r, dir) = relation_readings(argument)
                .into_iter()
                .find_map(|(l, d)| scan_relation(kb, l).map(|r| (r, d)))
                .ok_or_else(|| unresolved("relation", argument))?;
            let mut facts = BTreeSet::new();
            for (i, t) in kb.triples().iter().enumerate() {
                if t.relation != r {
                    continue;
                }
                match dir {
                    Direction::Forward if input.contains(&t.head) => {
                        facts.insert(Fact { entity: t.tail, source: FactRef::Relation(i) });
                    }
                    Direction::Backward if input.contains(&t.tail) => {
                        facts.insert(Fact { entity: t.head, source: FactRef::Relation(i) });
                    }
                    _ => {}
                }
            }
            Value::with_facts(facts)
        }
        And => {
            let (a, b) = (ents(0)?, ents(1)?);
            Value::Entities(kb.entity_ids().filter(|e| a.contains(e) && b.contains(e)).collect())
        }
        Or => {
            let (a, b) = (ents(0)?, ents(1)?);
            Value::Entities(kb.entity_ids().filter(|e| a.contains(e) || b.contains(e)).collect())
        }
        QueryName => Value::Text(ents(0)?.iter().map(|&e| kb.entity_label(e).to_string()).collect()),
        Count => Value::Number(ents(0)?.len() as f64),
        QueryAttr => {
            let input = ents(0)?;
            let Decoded::QueryKey { key } = decoded else { unreachable!() };
            Value::literals(
                kb.attributes()
                    .iter()
                    .filter(|f| input.contains(&f.entity) && normalize(&f.key) == normalize(&key))
                    .map(|f| f.value.clone()),
            )
        }
        QueryAttrUnderCondition => {
            let input = ents(0)?;
            let Decoded::UnderCondition { key, qkey, qvalue } = decoded else { unreachable!() };
            Value::literals(
                kb.attributes()
                    .iter()
                    .filter(|f| input.contains(&f.entity) && normalize(&f.key) == normalize(&key))
                    .filter(|f| {
                        f.qualifiers.iter().any(|q| {
                            normalize(&q.key) == normalize(&qkey)
                                && normalize(&q.value.to_string()) == normalize(&qvalue)
                        })
                    })
                    .map(|f| f.value.clone()),
            )
        }
        QueryRelation => {
            let (a, b) = (ents(0)?, ents(1)?);
            let only = if argument.trim().is_empty() {
                None
            } else {
                Some(scan_relation(kb, argument).ok_or_else(|| unresolved("relation", argument))?)
            };
            Value::Text(
                kb.triples()
                    .iter()
                    .filter(|t| a.contains(&t.head) && b.contains(&t.tail))
                    .filter(|t| only.is_none() || only == Some(t.relation))
                    .map(|t| kb.relation_label(t.relation).to_string())
                    .collect(),
            )
        }
        SelectBetween | SelectAmong => {
            let Decoded::Select { key, extreme } = decoded else { unreachable!() };
            let mut pool = ents(0)?;
            if function == SelectBetween {
                pool.extend(ents(1)?);
            }
            let mut scored: Vec<(f64, EntityId)> = Vec::new();
            for &e in &pool {
                let vals: Vec<f64> = kb
                    .attributes()
                    .iter()
                    .filter(|f| f.entity == e && normalize(&f.key) == normalize(&key))
                    .filter_map(|f| f.value.magnitude())
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let v = match extreme {
                    Extreme::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    Extreme::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
                };
                scored.push((v, e));
            }
            // stable sort keeps ascending ids among equal values
            scored.sort_by(|x, y| match extreme {
                Extreme::Max => y.0.partial_cmp(&x.0).unwrap(),
                Extreme::Min => x.0.partial_cmp(&y.0).unwrap(),
            });
            Value::Text(scored.first().map(|&(_, e)| kb.entity_label(e).to_string()).into_iter().collect())
        }
        VerifyStr | VerifyNum | VerifyYear | VerifyDate => {
            let Value::Literals(items) = &inputs[0] else {
                return Err(ExecError::TypeMismatch { step, function, found: inputs[0].kind_name() });
            };
            let Decoded::Verify(cond) = decoded else { unreachable!() };
            Value::Boolean(items.iter().any(|l| match &cond {
                Condition::Str(want) => normalize(&l.to_string()) == normalize(want),
                other => typed_match(other, l),
            }))
        }
        QueryAttrQualifier => {
            let input = ents(0)?;
            let Decoded::AttrQualifier { key, value, qkey } = decoded else { unreachable!() };
            let mut out = Vec::new();
            for f in kb.attributes() {
                if input.contains(&f.entity)
                    && normalize(&f.key) == normalize(&key)
                    && normalize(&f.value.to_string()) == normalize(&value)
                {
                    for q in &f.qualifiers {
                        if normalize(&q.key) == normalize(&qkey) {
                            out.push(q.value.clone());
                        }
                    }
                }
            }
            Value::literals(out)
        }
        QueryRelationQualifier => {
            let (a, b) = (ents(0)?, ents(1)?);
            let Decoded::RelQualifier { pred, qkey } = decoded else { unreachable!() };
            let r = scan_relation(kb, &pred).ok_or_else(|| unresolved("relation", &pred))?;
            let mut out = Vec::new();
            for t in kb.triples() {
                if t.relation == r && a.contains(&t.head) && b.contains(&t.tail) {
                    for q in &t.qualifiers {
                        if normalize(&q.key) == normalize(&qkey) {
                            out.push(q.value.clone());
                        }
                    }
                }
            }
            Value::literals(out)
        }
        Start | End => unreachable!(),
    })
}
