//! Hand-set parameters for tests.

use super::Parser;
use crate::program::FunctionKind;

pub fn zero_all(parser: &mut Parser) {
    let ids: Vec<_> = parser.store.params.ids().collect();
    for id in ids {
        parser.store.params.get_mut(id).fill(0.0);
    }
}

/// Makes greedy decoding emit `chain` (distinct tokens, ending with END)
/// with probability ≈ 1 at every step, regardless of the question.
pub fn rig_chain(parser: &mut Parser, chain: &[FunctionKind]) {
    let d = parser.net.d;
    assert!(chain.len() <= d, "chain longer than hidden size");
    assert_eq!(parser.net.d, parser.net.d_hat, "rig assumes d = d̂");
    zero_all(parser);
    let net = parser.net.clone();
    let p = &mut parser.store.params;
    let b = p.get_mut(net.dec.b).data_mut();
    b[..d].iter_mut().for_each(|x| *x = -40.0);
    let w = p.get_mut(net.dec.w);
    for i in 0..d {
        w.row_mut(2 * d + i)[i] = 1.0;
    }
    for i in 0..d {
        p.get_mut(net.mlp1.w).row_mut(i)[i] = 1.0;
    }
    let mut input = FunctionKind::Start;
    for (k, &f) in chain.iter().enumerate() {
        p.get_mut(net.func_embed).row_mut(input.index())[k] = 3.0;
        p.get_mut(net.mlp2.w).row_mut(f.index())[k] = 30.0;
        input = f;
    }
}
