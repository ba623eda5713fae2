use std::collections::HashMap;

use crate::argument::{score_backward, ArgChoice, CandidateEncoding};
use crate::kb::KnowledgeBase;
use crate::nn::{add_into, Grads};
use crate::program::FunctionKind;
use crate::pruning::ArgId;
use crate::sketch::{token_losses, EncoderCache, Parser};

use super::TrainError;

struct LabelSlot {
    pooled: Vec<f64>,
    cache: EncoderCache,
    dpooled: Vec<f64>,
}

/// Gradient accumulator for one batch at fixed parameters. Candidate label
/// encodings are computed once per batch; their gradients are summed and
/// pushed through the encoder in [`Accumulator::finish`].
pub(crate) struct Accumulator<'a> {
    parser: &'a Parser,
    kb: &'a KnowledgeBase,
    grads: Grads,
    labels: HashMap<ArgId, LabelSlot>,
    order: Vec<ArgId>,
}

impl<'a> Accumulator<'a> {
    pub fn new(parser: &'a Parser, kb: &'a KnowledgeBase) -> Self {
        Accumulator { parser, kb, grads: Grads::like(&parser.store.params), labels: HashMap::new(), order: Vec::new() }
    }

    fn encoding(&mut self, choice: &ArgChoice) -> CandidateEncoding {
        let rows = choice
            .candidates
            .iter()
            .map(|&i| {
                let arg = ArgId::from_index(choice.kind, i);
                if !self.labels.contains_key(&arg) {
                    let (out, cache) = self.parser.encode_label(arg.label(self.kb));
                    let dpooled = vec![0.0; out.pooled.len()];
                    self.labels.insert(arg, LabelSlot { pooled: out.pooled, cache, dpooled });
                    self.order.push(arg);
                }
                self.labels[&arg].pooled.clone()
            })
            .collect();
        CandidateEncoding { kind: choice.kind, ids: choice.candidates.clone(), rows }
    }

    /// Adds `weight` times the gradient of the negative log-likelihood of
    /// `tokens` (sketch plus END, or a truncated prefix) and of each argument
    /// choice. Returns the unweighted loss.
    pub fn supervise(
        &mut self,
        question_ids: &[usize],
        tokens: &[FunctionKind],
        choices: &[ArgChoice],
        weight: f64,
        masked: bool,
    ) -> Result<f64, TrainError> {
        let replay = self.parser.replay(question_ids, tokens)?;
        let (mut loss, mut dlogits) = token_losses(&replay, masked);
        for d in &mut dlogits {
            d.iter_mut().for_each(|x| *x *= weight);
        }
        let mut dg: Vec<Option<Vec<f64>>> = vec![None; tokens.len()];
        for c in choices {
            let enc = self.encoding(c);
            let (l, g, drows) = score_backward(replay.g(c.step), &enc, c.chosen, weight);
            loss += l;
            match &mut dg[c.step] {
                Some(acc) => add_into(&g, acc),
                slot => *slot = Some(g),
            }
            for (&i, drow) in c.candidates.iter().zip(&drows) {
                let slot = self.labels.get_mut(&ArgId::from_index(c.kind, i)).expect("encoded above");
                add_into(drow, &mut slot.dpooled);
            }
        }
        self.parser.replay_backward(&mut self.grads, &replay, &dlogits, &dg);
        Ok(loss)
    }

    pub fn finish(mut self) -> Grads {
        let p = &self.parser.store.params;
        for arg in &self.order {
            let slot = &self.labels[arg];
            if slot.dpooled.iter().any(|&x| x != 0.0) {
                self.parser.net.encode_backward(p, &mut self.grads, &slot.cache, None, &slot.dpooled);
            }
        }
        self.grads
    }
}

/// Installs `grads` and takes one optimizer step.
pub(crate) fn apply(parser: &mut Parser, grads: Grads, opt: &crate::nn::AdamW) -> Result<(), TrainError> {
    parser.store.grads = grads;
    parser.store.step(opt)?;
    Ok(())
}
