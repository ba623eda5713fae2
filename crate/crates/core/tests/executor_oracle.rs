mod common;

use std::collections::BTreeSet;

use common::{random_kb, random_program, rng};
use program_transfer::executor::{brute_force_oracle, execute, Value};
use program_transfer::program::{FunctionKind, Program, Step};
use proptest::prelude::*;

fn entity_set(p: &Program, kb: &program_transfer::kb::KnowledgeBase) -> Option<BTreeSet<String>> {
    match execute(p, kb).ok()?.value {
        Value::Entities(s) | Value::EntitiesWithFacts { entities: s, .. } => {
            Some(s.into_iter().map(|e| kb.entity_label(e).to_string()).collect())
        }
        _ => None,
    }
}

fn join(a: &Program, b: &Program, f: FunctionKind) -> Program {
    let mut steps = a.steps.clone();
    steps.extend(b.steps.iter().cloned());
    steps.push(Step::new(f, ""));
    Program::new(steps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn executor_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kb = random_kb(&mut r, 50);
        for _ in 0..10 {
            let p = random_program(&mut r, &kb, 8);
            prop_assert!(p.validate().is_ok(), "{p}");
            prop_assert_eq!(execute(&p, &kb), brute_force_oracle(&p, &kb), "{}", p);
        }
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kb = random_kb(&mut r, 30);
        let p = random_program(&mut r, &kb, 8);
        prop_assert_eq!(execute(&p, &kb), execute(&p, &kb));
    }

    #[test]
    fn set_algebra(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kb = random_kb(&mut r, 30);
        let gen = |r: &mut _| loop {
            let p = random_program(r, &kb, 4);
            if let Some(s) = entity_set(&p, &kb) {
                return (p, s);
            }
        };
        let (a, sa) = gen(&mut r);
        let (b, sb) = gen(&mut r);
        let (c, _) = gen(&mut r);
        use FunctionKind::{And, Or};
        for f in [And, Or] {
            prop_assert_eq!(entity_set(&join(&a, &b, f), &kb), entity_set(&join(&b, &a, f), &kb));
            prop_assert_eq!(entity_set(&join(&a, &a, f), &kb), Some(sa.clone()));
            let left = join(&join(&a, &b, f), &c, f);
            let right = join(&a, &join(&b, &c, f), f);
            prop_assert_eq!(entity_set(&left, &kb), entity_set(&right, &kb));
        }
        let and = entity_set(&join(&a, &b, And), &kb).unwrap();
        prop_assert!(and.is_subset(&sa) && and.is_subset(&sb));
        for concept in kb.concept_ids() {
            let mut steps = a.steps.clone();
            steps.push(Step::new(FunctionKind::FilterConcept, kb.concept_label(concept)));
            prop_assert!(entity_set(&Program::new(steps), &kb).unwrap().is_subset(&sa));
        }
    }

    #[test]
    fn relate_forward_then_backward_covers_start(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kb = random_kb(&mut r, 30);
        for t in kb.triples().iter().take(5) {
            let e = kb.entity_label(t.head);
            let rel = kb.relation_label(t.relation);
            let p: Program = Program::new(vec![
                Step::new(FunctionKind::Find, e),
                Step::new(FunctionKind::Relate, format!("{rel} forward")),
                Step::new(FunctionKind::Relate, format!("{rel} backward")),
            ]);
            prop_assert!(entity_set(&p, &kb).unwrap().contains(e));
        }
    }
}

#[test]
fn random_programs_mostly_succeed() {
    let mut r = rng(7);
    let mut ok = 0;
    for _ in 0..200 {
        let kb = random_kb(&mut r, 50);
        let p = random_program(&mut r, &kb, 8);
        ok += usize::from(execute(&p, &kb).is_ok());
    }
    assert!(ok >= 150, "only {ok} of 200 random programs executed");
}
