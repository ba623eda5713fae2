//! The encoder/decoder network and its backward pass.

use rand::Rng;

use crate::nn::layers::{relu, relu_backward};
use crate::nn::{
    add_into, attention, attention_backward, axpy, Attention, Grads, Gru, GruCache, Linear, NnError, ParamId,
    ParameterStore, Params,
};
use crate::program::FunctionKind;

pub const ENCODER_GROUP: &str = "encoder";
pub const EMBEDDING_GROUP: &str = "embedding";
pub const DECODER_GROUP: &str = "decoder";

/// Parameter handles of the parser network.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub d: usize,
    pub d_hat: usize,
    pub embed: ParamId,
    pub enc_fw: Gru,
    pub enc_bw: Gru,
    pub enc_proj: Linear,
    pub init: Linear,
    pub func_embed: ParamId,
    pub dec: Gru,
    pub adapter: Option<Linear>,
    pub mlp1: Linear,
    pub mlp2: Linear,
}

/// Per-token vectors and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub vectors: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    ids: Vec<usize>,
    fw: Vec<GruCache>,
    /// `bw[k]` belongs to position `n - 1 - k`.
    bw: Vec<GruCache>,
    concat: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct StepCache {
    input: FunctionKind,
    gru: GruCache,
    h: Vec<f64>,
    key: Vec<f64>,
    att: Attention,
    pub g: Vec<f64>,
    pre1: Vec<f64>,
    hid1: Vec<f64>,
}

impl Net {
    /// `lrs` are the embedding, encoder and decoder learning rates.
    pub fn new(store: &mut ParameterStore, vocab: usize, d: usize, d_hat: usize, lrs: (f64, f64, f64), rng: &mut impl Rng) -> Net {
        let emb = store.group(EMBEDDING_GROUP, lrs.0);
        let enc = store.group(ENCODER_GROUP, lrs.1);
        let dec = store.group(DECODER_GROUP, lrs.2);
        let embed = store.add_normal("embed", emb, &[vocab, d_hat], super::embed_std(d_hat), rng);
        let enc_fw = Gru::new(store, "enc.fw", enc, d_hat, d_hat, rng);
        let enc_bw = Gru::new(store, "enc.bw", enc, d_hat, d_hat, rng);
        let enc_proj = Linear::new(store, "enc.proj", enc, 2 * d_hat, d_hat, rng);
        let init = Linear::new(store, "dec.init", dec, d_hat, d, rng);
        let func_embed = store.add_normal("dec.func_embed", dec, &[FunctionKind::COUNT, d], 0.02, rng);
        let dec_gru = Gru::new(store, "dec.gru", dec, d, d, rng);
        let adapter = (d != d_hat).then(|| Linear::new(store, "dec.adapter", dec, d, d_hat, rng));
        let mlp1 = Linear::new(store, "dec.mlp1", dec, d_hat, d_hat, rng);
        let mlp2 = Linear::new(store, "dec.mlp2", dec, d_hat, FunctionKind::COUNT, rng);
        Net { d, d_hat, embed, enc_fw, enc_bw, enc_proj, init, func_embed, dec: dec_gru, adapter, mlp1, mlp2 }
    }

    /// Re-attaches handles to a store loaded from a checkpoint.
    pub fn bind(p: &Params) -> Result<Net, NnError> {
        let embed = p.id("embed")?;
        let func_embed = p.id("dec.func_embed")?;
        let d_hat = p.get(embed).cols();
        let d = p.get(func_embed).cols();
        let adapter = if d != d_hat { Some(Linear::bind(p, "dec.adapter")?) } else { None };
        Ok(Net {
            d,
            d_hat,
            embed,
            enc_fw: Gru::bind(p, "enc.fw")?,
            enc_bw: Gru::bind(p, "enc.bw")?,
            enc_proj: Linear::bind(p, "enc.proj")?,
            init: Linear::bind(p, "dec.init")?,
            func_embed,
            dec: Gru::bind(p, "dec.gru")?,
            adapter,
            mlp1: Linear::bind(p, "dec.mlp1")?,
            mlp2: Linear::bind(p, "dec.mlp2")?,
        })
    }

    pub fn encode(&self, p: &Params, ids: &[usize]) -> (EncoderOutput, EncoderCache) {
        let n = ids.len();
        let emb = p.get(self.embed);
        let mut h = vec![0.0; self.d_hat];
        let mut fw = Vec::with_capacity(n);
        let mut hf = Vec::with_capacity(n);
        for &id in ids {
            let (next, c) = self.enc_fw.forward(p, &h, emb.row(id));
            fw.push(c);
            hf.push(next.clone());
            h = next;
        }
        let mut h = vec![0.0; self.d_hat];
        let mut bw = Vec::with_capacity(n);
        let mut hb = vec![Vec::new(); n];
        for t in (0..n).rev() {
            let (next, c) = self.enc_bw.forward(p, &h, emb.row(ids[t]));
            bw.push(c);
            hb[t] = next.clone();
            h = next;
        }
        let mut vectors = Vec::with_capacity(n);
        let mut concat = Vec::with_capacity(n);
        let mut pooled = vec![0.0; self.d_hat];
        for t in 0..n {
            let mut c = hf[t].clone();
            c.extend_from_slice(&hb[t]);
            let x = self.enc_proj.forward(p, &c);
            axpy(1.0 / n as f64, &x, &mut pooled);
            vectors.push(x);
            concat.push(c);
        }
        (EncoderOutput { vectors, pooled }, EncoderCache { ids: ids.to_vec(), fw, bw, concat })
    }

    pub fn encode_backward(&self, p: &Params, g: &mut Grads, cache: &EncoderCache, dvectors: Option<&[Vec<f64>]>, dpooled: &[f64]) {
        let n = cache.ids.len();
        let d = self.d_hat;
        let mut dhf = Vec::with_capacity(n);
        let mut dhb = Vec::with_capacity(n);
        for t in 0..n {
            let mut dx: Vec<f64> = dpooled.iter().map(|v| v / n as f64).collect();
            if let Some(dv) = dvectors {
                add_into(&dv[t], &mut dx);
            }
            let dc = self.enc_proj.backward(p, g, &cache.concat[t], &dx);
            dhf.push(dc[..d].to_vec());
            dhb.push(dc[d..].to_vec());
        }
        let mut carry = vec![0.0; d];
        for t in (0..n).rev() {
            add_into(&dhf[t], &mut carry);
            let (dh, dx) = self.enc_fw.backward(p, g, &cache.fw[t], &carry);
            add_into(&dx, g.get_mut(self.embed).row_mut(cache.ids[t]));
            carry = dh;
        }
        let mut carry = vec![0.0; d];
        for k in (0..n).rev() {
            let t = n - 1 - k;
            add_into(&dhb[t], &mut carry);
            let (dh, dx) = self.enc_bw.backward(p, g, &cache.bw[k], &carry);
            add_into(&dx, g.get_mut(self.embed).row_mut(cache.ids[t]));
            carry = dh;
        }
    }

    pub fn initial_hidden(&self, p: &Params, enc: &EncoderOutput) -> Vec<f64> {
        self.init.forward(p, &enc.pooled)
    }

    /// One decoder step: returns logits over functions, the new hidden
    /// state and the cache (which holds g_t).
    pub fn step(&self, p: &Params, h_prev: &[f64], input: FunctionKind, enc: &EncoderOutput) -> (Vec<f64>, Vec<f64>, StepCache) {
        let x = p.get(self.func_embed).row(input.index());
        let (h, gru) = self.dec.forward(p, h_prev, x);
        let key = match &self.adapter {
            Some(a) => a.forward(p, &h),
            None => h.clone(),
        };
        let att = attention(&key, &enc.vectors);
        let mut gvec = key.clone();
        add_into(&att.context, &mut gvec);
        let pre1 = self.mlp1.forward(p, &gvec);
        let hid1 = relu(&pre1);
        let logits = self.mlp2.forward(p, &hid1);
        (logits, h.clone(), StepCache { input, gru, h, key, att, g: gvec, pre1, hid1 })
    }

    /// Backward through one step. `dg_extra` is gradient reaching g_t from
    /// argument scoring, `dh_next` from the following step. Adds to
    /// `dvectors` and returns the gradient for h_{t-1}.
    #[allow(clippy::too_many_arguments)]
    pub fn step_backward(
        &self,
        p: &Params,
        g: &mut Grads,
        c: &StepCache,
        enc: &EncoderOutput,
        dlogits: &[f64],
        dg_extra: Option<&[f64]>,
        dh_next: &[f64],
        dvectors: &mut [Vec<f64>],
    ) -> Vec<f64> {
        let dhid = self.mlp2.backward(p, g, &c.hid1, dlogits);
        let dpre = relu_backward(&c.pre1, &dhid);
        let mut dg = self.mlp1.backward(p, g, &c.g, &dpre);
        if let Some(extra) = dg_extra {
            add_into(extra, &mut dg);
        }
        let (mut dkey, dmem) = attention_backward(&c.key, &enc.vectors, &c.att, &dg);
        add_into(&dg, &mut dkey);
        for (acc, dm) in dvectors.iter_mut().zip(&dmem) {
            add_into(dm, acc);
        }
        let mut dh = match &self.adapter {
            Some(a) => a.backward(p, g, &c.h, &dkey),
            None => dkey,
        };
        add_into(dh_next, &mut dh);
        let (dh_prev, dx) = self.dec.backward(p, g, &c.gru, &dh);
        add_into(&dx, g.get_mut(self.func_embed).row_mut(c.input.index()));
        dh_prev
    }

    /// Gradient into x̄ through h_0.
    pub fn initial_backward(&self, p: &Params, g: &mut Grads, enc: &EncoderOutput, dh0: &[f64]) -> Vec<f64> {
        self.init.backward(p, g, &enc.pooled, dh0)
    }
}
