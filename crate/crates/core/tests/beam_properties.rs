use program_transfer::sketch::{ModelConfig, Parser, Vocabulary};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUESTION: &str = "which team does the owner own";

fn random_parser(seed: u64, scale: f64) -> Parser {
    let vocab = Vocabulary::build(["which team does the owner of the arena own", "how many players"]);
    let config = ModelConfig { d: 8, d_hat: 8, max_len: 10, ..ModelConfig::default() };
    let mut p = Parser::new(config, vocab, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
    let ids: Vec<_> = p.store.params.ids().collect();
    for id in ids {
        for x in p.store.params.get_mut(id).data_mut() {
            *x = rng.random_range(-scale..scale);
        }
    }
    p
}

fn best(p: &Parser, beam: usize, constrained: bool) -> f64 {
    let out = p.beam_decode(QUESTION, beam, 10, constrained).unwrap();
    out.iter().filter(|d| !d.truncated).map(|d| d.log_prob).fold(f64::NEG_INFINITY, f64::max)
}

/// Share of random parsers whose best finished score never drops as the
/// beam widens from 1 to 8.
fn monotone_share(constrained: bool, trials: u64) -> f64 {
    let mut ok = 0;
    for seed in 0..trials {
        let p = random_parser(seed, 0.2 + 1.8 * (seed % 10) as f64 / 10.0);
        let scores: Vec<f64> = (1..=8).map(|b| best(&p, b, constrained)).collect();
        ok += usize::from(scores.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }
    ok as f64 / trials as f64
}

#[test]
fn best_score_rarely_drops_with_wider_beams() {
    for constrained in [true, false] {
        let share = monotone_share(constrained, 200);
        println!("constrained={constrained}: monotone in {:.1}% of parsers", 100.0 * share);
        assert!(share >= 0.9, "constrained={constrained}: {share}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn beam_one_is_greedy(seed in any::<u64>(), scale in 0.2f64..2.0, constrained in any::<bool>()) {
        let p = random_parser(seed, scale);
        let g = p.greedy_decode(QUESTION, 10, constrained).unwrap();
        prop_assert_eq!(p.beam_decode(QUESTION, 1, 10, constrained).unwrap(), vec![g]);
    }

    #[test]
    fn exhaustive_beam_beats_every_narrower_one(seed in any::<u64>(), scale in 0.2f64..2.0) {
        let p = random_parser(seed, scale);
        let wide = p.beam_decode(QUESTION, 2000, 3, true).unwrap();
        let top = wide.iter().filter(|d| !d.truncated).map(|d| d.log_prob).fold(f64::NEG_INFINITY, f64::max);
        for b in 1..=8 {
            let narrow = p.beam_decode(QUESTION, b, 3, true).unwrap();
            for d in narrow.iter().filter(|d| !d.truncated) {
                prop_assert!(d.log_prob <= top + 1e-12);
            }
        }
    }

    #[test]
    fn constrained_beams_are_valid_and_sorted(seed in any::<u64>(), scale in 0.2f64..2.0, beam in 1usize..8) {
        let p = random_parser(seed, scale);
        let out = p.beam_decode(QUESTION, beam, 10, true).unwrap();
        prop_assert!(out.len() <= beam);
        for d in out.iter().filter(|d| !d.truncated) {
            prop_assert!(d.sketch.validate().is_ok(), "{}", d.sketch);
        }
        let finished: Vec<f64> = out.iter().filter(|d| !d.truncated).map(|d| d.log_prob).collect();
        prop_assert!(finished.windows(2).all(|w| w[0] >= w[1]));
    }
}
