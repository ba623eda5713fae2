//! Sketch parser: question → function sequence.
//!
//! A bidirectional recurrent encoder produces per-token vectors and their
//! mean; a recurrent decoder with dot attention emits one function per step
//! starting from START until END.

pub mod beam;
pub mod net;
pub mod vocab;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{check_finite, checkpoint, log_softmax, softmax, Grads, NnError, ParameterStore};
use crate::program::{can_extend, prefix_depth, FunctionKind, Sketch};
pub use beam::{beam_search, greedy, Hypothesis, StepModel};
pub use net::{EncoderCache, EncoderOutput, Net, StepCache, DECODER_GROUP, EMBEDDING_GROUP, ENCODER_GROUP};
pub use vocab::{Vocabulary, PAD, UNK};

pub const DEFAULT_MAX_LEN: usize = 24;

/// Initial embedding scale: rows have unit expected norm.
pub fn embed_std(d_hat: usize) -> f64 {
    1.0 / (d_hat.max(1) as f64).sqrt()
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error("decoder step {step} exceeds the length bound {max_len}")]
    StepLimit { step: usize, max_len: usize },
    #[error("sketch is not well formed: {0}")]
    InvalidSketch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Decoder hidden size.
    pub d: usize,
    /// Encoder output size.
    pub d_hat: usize,
    pub max_len: usize,
    pub encoder_lr: f64,
    pub decoder_lr: f64,
    /// Word-embedding learning rate; 0 keeps the random embeddings fixed.
    #[serde(default)]
    pub embed_lr: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d: 64, d_hat: 64, max_len: DEFAULT_MAX_LEN, encoder_lr: 1e-3, decoder_lr: 1e-3, embed_lr: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    /// Token fed at the next step.
    pub last: FunctionKind,
    /// Fused vector of the most recent step.
    pub g: Option<Vec<f64>>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSketch {
    pub sketch: Sketch,
    pub log_prob: f64,
    /// The length bound was hit before END.
    pub truncated: bool,
}

/// Forward record of teacher-forced decoding over a token sequence.
#[derive(Debug, Clone)]
pub struct Replay {
    pub enc: EncoderOutput,
    enc_cache: EncoderCache,
    pub steps: Vec<StepCache>,
    pub logits: Vec<Vec<f64>>,
    pub targets: Vec<FunctionKind>,
}

impl Replay {
    pub fn g(&self, t: usize) -> &[f64] {
        &self.steps[t].g
    }
}

#[derive(Debug, Clone)]
pub struct Parser {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub store: ParameterStore,
    pub net: Net,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    config: ModelConfig,
    vocab: Vocabulary,
}

impl Parser {
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Parser {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let net = Net::new(&mut store, vocab.len(), config.d, config.d_hat, (config.embed_lr, config.encoder_lr, config.decoder_lr), &mut rng);
        Parser { config, vocab, store, net }
    }

    /// Adds tokens from `texts` to the vocabulary; returns how many were
    /// added. New embedding rows are drawn at the scale of the existing ones.
    pub fn extend_vocab<'a>(&mut self, texts: impl IntoIterator<Item = &'a str>, seed: u64) -> usize {
        let added = self.vocab.extend(texts);
        if added > 0 {
            let emb = self.store.params.get(self.net.embed);
            let rms = (emb.data().iter().map(|x| x * x).sum::<f64>() / emb.len().max(1) as f64).sqrt();
            let std = if rms.is_finite() && rms > 0.0 { rms } else { embed_std(self.net.d_hat) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            self.store.grow_rows(self.net.embed, added, std, &mut rng);
        }
        added
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir).map_err(NnError::from)?;
        let meta = ModelFile { config: self.config, vocab: self.vocab.clone() };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| ModelError::Format(e.to_string()))?;
        std::fs::write(dir.join("model.json"), json + "\n").map_err(NnError::from)?;
        checkpoint::save(&self.store, &dir.join("params.bin"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Parser, ModelError> {
        let text = std::fs::read_to_string(dir.join("model.json")).map_err(NnError::from)?;
        let meta: ModelFile = serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        let c = meta.config;
        let store = checkpoint::load(&dir.join("params.bin"), |g| match g {
            EMBEDDING_GROUP => c.embed_lr,
            ENCODER_GROUP => c.encoder_lr,
            _ => c.decoder_lr,
        })?;
        let net = Net::bind(&store.params)?;
        if store.params.get(net.embed).rows() != meta.vocab.len() || net.d != c.d || net.d_hat != c.d_hat {
            return Err(ModelError::Format("parameters do not match model.json".into()));
        }
        Ok(Parser { config: c, vocab: meta.vocab, store, net })
    }

    pub fn question_ids(&self, question: &str) -> Result<Vec<usize>, ModelError> {
        let ids = self.vocab.encode(question);
        if ids.is_empty() {
            return Err(ModelError::EmptyQuestion);
        }
        Ok(ids)
    }

    pub fn encode(&self, question: &str) -> Result<EncoderOutput, ModelError> {
        let ids = self.question_ids(question)?;
        let (out, _) = self.net.encode(&self.store.params, &ids);
        check_finite(&out.pooled, "question encoding")?;
        Ok(out)
    }

    /// Encodes arbitrary text; an empty token list maps to a single UNK.
    pub fn encode_label(&self, label: &str) -> (EncoderOutput, EncoderCache) {
        let mut ids = self.vocab.encode(label);
        if ids.is_empty() {
            ids.push(UNK);
        }
        self.net.encode(&self.store.params, &ids)
    }

    pub fn initial_state(&self, enc: &EncoderOutput) -> DecoderState {
        DecoderState { h: self.net.initial_hidden(&self.store.params, enc), last: FunctionKind::Start, g: None, step: 0 }
    }

    /// Distribution over functions for the next token and the advanced
    /// state (whose `last` still needs the emitted token).
    pub fn decode_step(&self, state: &DecoderState, enc: &EncoderOutput) -> Result<(Vec<f64>, DecoderState), ModelError> {
        let (logits, next) = self.decode_logits(state, enc)?;
        Ok((softmax(&logits), next))
    }

    /// Raw next-token logits; see [`Parser::decode_step`].
    pub fn decode_logits(&self, state: &DecoderState, enc: &EncoderOutput) -> Result<(Vec<f64>, DecoderState), ModelError> {
        if state.step >= self.config.max_len {
            return Err(ModelError::StepLimit { step: state.step, max_len: self.config.max_len });
        }
        if state.h.len() != self.net.d || enc.vectors.iter().any(|v| v.len() != self.net.d_hat) {
            return Err(NnError::Shape(format!("decoder state {} / memories vs d={} d̂={}", state.h.len(), self.net.d, self.net.d_hat)).into());
        }
        let (logits, h, cache) = self.net.step(&self.store.params, &state.h, state.last, enc);
        check_finite(&logits, "decoder logits")?;
        let next = DecoderState { h, last: state.last, g: Some(cache.g), step: state.step + 1 };
        Ok((logits, next))
    }

    fn search<'a>(&'a self, enc: &'a EncoderOutput, constrained: bool) -> SketchSearch<'a> {
        SketchSearch { parser: self, enc, constrained }
    }

    pub fn greedy_decode(&self, question: &str, max_len: usize, constrained: bool) -> Result<DecodedSketch, ModelError> {
        let enc = self.encode(question)?;
        let h = greedy(&self.search(&enc, constrained), max_len.min(self.config.max_len))?;
        Ok(to_decoded(h))
    }

    /// Up to `beam` sketches, best first.
    pub fn beam_decode(&self, question: &str, beam: usize, max_len: usize, constrained: bool) -> Result<Vec<DecodedSketch>, ModelError> {
        let enc = self.encode(question)?;
        self.beam_decode_encoded(&enc, beam, max_len, constrained)
    }

    pub fn beam_decode_encoded(&self, enc: &EncoderOutput, beam: usize, max_len: usize, constrained: bool) -> Result<Vec<DecodedSketch>, ModelError> {
        let hyps = beam_search(&self.search(enc, constrained), beam, max_len.min(self.config.max_len))?;
        Ok(hyps.into_iter().map(to_decoded).collect())
    }

    /// Teacher-forced forward over `targets` (which should end with END).
    pub fn replay(&self, question_ids: &[usize], targets: &[FunctionKind]) -> Result<Replay, ModelError> {
        if targets.len() > self.config.max_len {
            return Err(ModelError::StepLimit { step: targets.len(), max_len: self.config.max_len });
        }
        let p = &self.store.params;
        let (enc, enc_cache) = self.net.encode(p, question_ids);
        let mut h = self.net.initial_hidden(p, &enc);
        let mut input = FunctionKind::Start;
        let mut steps = Vec::with_capacity(targets.len());
        let mut logits = Vec::with_capacity(targets.len());
        for &t in targets {
            let (l, next, cache) = self.net.step(p, &h, input, &enc);
            check_finite(&l, "decoder logits")?;
            logits.push(l);
            steps.push(cache);
            h = next;
            input = t;
        }
        Ok(Replay { enc, enc_cache, steps, logits, targets: targets.to_vec() })
    }

    /// Backward through a replay given per-step logit gradients and
    /// optional gradients on g_t and on the pooled question vector.
    pub fn replay_backward(&self, grads: &mut Grads, r: &Replay, dlogits: &[Vec<f64>], dg: &[Option<Vec<f64>>]) {
        let p = &self.store.params;
        let n = r.steps.len();
        let mut dvectors = vec![vec![0.0; self.net.d_hat]; r.enc.vectors.len()];
        let mut dh = vec![0.0; self.net.d];
        for t in (0..n).rev() {
            dh = self.net.step_backward(p, grads, &r.steps[t], &r.enc, &dlogits[t], dg[t].as_deref(), &dh, &mut dvectors);
        }
        let dpooled = self.net.initial_backward(p, grads, &r.enc, &dh);
        self.net.encode_backward(p, grads, &r.enc_cache, Some(&dvectors), &dpooled);
    }

    /// −Σ log p(o_t | o_<t, x) over the sketch and its END.
    pub fn sketch_nll(&self, question: &str, sketch: &Sketch) -> Result<f64, ModelError> {
        sketch.validate().map_err(|v| ModelError::InvalidSketch(v.to_string()))?;
        let ids = self.question_ids(question)?;
        let r = self.replay(&ids, &sketch.tokens())?;
        Ok(token_losses(&r, false).0)
    }

    /// Loss and analytic gradient of [`Parser::sketch_nll`].
    pub fn sketch_nll_grad(&self, question: &str, sketch: &Sketch) -> Result<(f64, Grads), ModelError> {
        let ids = self.question_ids(question)?;
        let r = self.replay(&ids, &sketch.tokens())?;
        let (loss, dlogits) = token_losses(&r, false);
        let mut grads = Grads::like(&self.store.params);
        self.replay_backward(&mut grads, &r, &dlogits, &vec![None; r.steps.len()]);
        Ok((loss, grads))
    }
}

/// Per-step negative log-likelihood of the replay's targets and the logit
/// gradients. With `masked`, probabilities renormalize over tokens that
/// keep the prefix stack-valid.
pub fn token_losses(r: &Replay, masked: bool) -> (f64, Vec<Vec<f64>>) {
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(r.targets.len());
    for (t, &target) in r.targets.iter().enumerate() {
        let mask = masked.then(|| allowed_mask(&r.targets[..t]));
        let lp = masked_log_softmax(&r.logits[t], mask.as_deref());
        let gold = target.index();
        loss -= lp[gold];
        let mut d: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        d[gold] -= 1.0;
        grads.push(d);
    }
    (loss, grads)
}

/// Log-softmax restricted to `mask` (disallowed entries get −∞).
pub fn masked_log_softmax(logits: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    match mask {
        None => log_softmax(logits),
        Some(m) => {
            let kept: Vec<f64> = logits.iter().zip(m).filter(|(_, &k)| k).map(|(l, _)| *l).collect();
            if kept.is_empty() {
                return vec![f64::NEG_INFINITY; logits.len()];
            }
            let lse = {
                let max = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                max + kept.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
            };
            logits.iter().zip(m).map(|(l, &k)| if k { l - lse } else { f64::NEG_INFINITY }).collect()
        }
    }
}

/// Tokens that may follow `prefix` without breaking stack validity.
pub fn allowed_mask(prefix: &[FunctionKind]) -> Vec<bool> {
    let depth = prefix_depth(prefix);
    FunctionKind::ALL.iter().map(|&f| depth.is_some_and(|d| can_extend(d, f))).collect()
}

fn to_decoded(h: Hypothesis) -> DecodedSketch {
    let functions = h.tokens.iter().map(|&i| FunctionKind::from_index(i).expect("valid index")).collect();
    DecodedSketch { sketch: Sketch::new(functions), log_prob: h.log_prob, truncated: !h.finished }
}

struct SketchSearch<'a> {
    parser: &'a Parser,
    enc: &'a EncoderOutput,
    constrained: bool,
}

impl StepModel for SketchSearch<'_> {
    type State = DecoderState;
    type Error = ModelError;

    fn vocab_size(&self) -> usize {
        FunctionKind::COUNT
    }

    fn end_token(&self) -> usize {
        FunctionKind::End.index()
    }

    fn start(&self) -> DecoderState {
        self.parser.initial_state(self.enc)
    }

    fn next(&self, state: &DecoderState) -> Result<(Vec<f64>, DecoderState), ModelError> {
        let (logits, next) = self.parser.decode_logits(state, self.enc)?;
        Ok((log_softmax(&logits), next))
    }

    fn feed(&self, mut state: DecoderState, token: usize) -> DecoderState {
        state.last = FunctionKind::from_index(token).expect("valid index");
        state
    }

    fn allowed(&self, prefix: &[usize], token: usize) -> bool {
        if !self.constrained {
            return token != FunctionKind::Start.index();
        }
        let prefix: Vec<FunctionKind> = prefix.iter().map(|&i| FunctionKind::from_index(i).expect("valid")).collect();
        let f = FunctionKind::from_index(token).expect("valid");
        prefix_depth(&prefix).is_some_and(|d| can_extend(d, f))
    }
}

#[cfg(test)]
pub(crate) mod rig;
