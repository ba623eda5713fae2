//! Central finite-difference check of the hand-written backward pass of
//! the whole sketch parser.
//!
//! `cargo run --release --example gradient_check`

use program_transfer::nn::gradcheck::check_params;
use program_transfer::program::{FunctionKind, Sketch};
use program_transfer::sketch::{ModelConfig, Parser, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let question = "what teams does steve own";
    let mut parser = Parser::new(ModelConfig { d: 4, d_hat: 3, ..ModelConfig::default() }, Vocabulary::build([question]), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ids: Vec<_> = parser.store.params.ids().collect();
    for &id in &ids {
        parser.store.params.get_mut(id).data_mut().iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
    }
    let sketch = Sketch::new(vec![FunctionKind::Find, FunctionKind::Relate, FunctionKind::FilterConcept]);
    let (loss, grads) = parser.sketch_nll_grad(question, &sketch)?;
    let report = check_params(&mut parser.store.params.clone(), &ids, &grads, 1e-4, |p| {
        let mut probe = parser.clone();
        probe.store.params = p.clone();
        probe.sketch_nll(question, &sketch).expect("valid sketch")
    });
    println!("loss {loss:.4}");
    println!("{} scalars over {} tensors, max relative error {:.2e}", report.checked, ids.len(), report.max_rel_error);
    Ok(())
}
