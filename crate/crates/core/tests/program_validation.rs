mod common;

use common::{random_kb, random_tokens, rng};
use program_transfer::executor::{brute_force_oracle, execute};
use program_transfer::program::{ArgumentCategory, FunctionKind};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn validate_agrees_with_stack_errors(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kb = random_kb(&mut r, 10);
        let p = random_tokens(&mut r, &kb, 8);
        let structural = matches!(execute(&p, &kb), Err(e) if e.is_structural());
        prop_assert_eq!(p.validate().is_ok(), !structural, "{}", p);
        let oracle_structural = matches!(brute_force_oracle(&p, &kb), Err(e) if e.is_structural());
        prop_assert_eq!(structural, oracle_structural);
    }
}

#[test]
fn every_function_has_one_category() {
    for f in FunctionKind::ALL {
        let c = f.category();
        let n = [
            ArgumentCategory::Entity,
            ArgumentCategory::Concept,
            ArgumentCategory::Relation,
            ArgumentCategory::Empty,
            ArgumentCategory::LiteralText,
        ]
        .iter()
        .filter(|&&x| x == c)
        .count();
        assert_eq!(n, 1, "{f:?}");
    }
}
