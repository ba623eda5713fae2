//! Layers with explicit forward caches and backward passes.

use rand::Rng;

use super::{axpy, dot, matvec, matvec_t_acc, outer_acc, Grads, ParamId, ParameterStore, Params};

/// Affine map `W x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParameterStore, name: &str, group: usize, input: usize, output: usize, rng: &mut impl Rng) -> Linear {
        let w = store.add_uniform(&format!("{name}.w"), group, &[output, input], 0.08, rng);
        let b = store.add_zeros(&format!("{name}.b"), group, &[output]);
        Linear { w, b, input, output }
    }

    pub fn bind(params: &Params, name: &str) -> Result<Linear, super::NnError> {
        let w = params.id(&format!("{name}.w"))?;
        let b = params.id(&format!("{name}.b"))?;
        let s = params.get(w).shape();
        Ok(Linear { w, b, input: s[1], output: s[0] })
    }

    pub fn forward(&self, p: &Params, x: &[f64]) -> Vec<f64> {
        let mut y = matvec(p.get(self.w), x);
        super::add_into(p.get(self.b).data(), &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, p: &Params, g: &mut Grads, x: &[f64], dy: &[f64]) -> Vec<f64> {
        outer_acc(g.get_mut(self.w), dy, x);
        super::add_into(dy, g.get_mut(self.b).data_mut());
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(p.get(self.w), dy, &mut dx);
        dx
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gated recurrent cell:
/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// n = tanh(W_n x + r ⊙ (U_n h) + b_n), h' = (1 − z) ⊙ n + z ⊙ h.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gru {
    /// `[3h × in]`, gate blocks in z, r, n order.
    pub w: ParamId,
    /// `[3h × h]`.
    pub u: ParamId,
    /// `[3h]`.
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    un: Vec<f64>,
}

impl Gru {
    pub fn new(store: &mut ParameterStore, name: &str, group: usize, input: usize, hidden: usize, rng: &mut impl Rng) -> Gru {
        let w = store.add_uniform(&format!("{name}.w"), group, &[3 * hidden, input], 0.08, rng);
        let u = store.add_uniform(&format!("{name}.u"), group, &[3 * hidden, hidden], 0.08, rng);
        let b = store.add_zeros(&format!("{name}.b"), group, &[3 * hidden]);
        Gru { w, u, b, input, hidden }
    }

    pub fn bind(params: &Params, name: &str) -> Result<Gru, super::NnError> {
        let w = params.id(&format!("{name}.w"))?;
        let u = params.id(&format!("{name}.u"))?;
        let b = params.id(&format!("{name}.b"))?;
        let s = params.get(w).shape();
        Ok(Gru { w, u, b, input: s[1], hidden: s[0] / 3 })
    }

    pub fn forward(&self, p: &Params, h: &[f64], x: &[f64]) -> (Vec<f64>, GruCache) {
        let d = self.hidden;
        let mut a = matvec(p.get(self.w), x);
        super::add_into(p.get(self.b).data(), &mut a);
        let uh = matvec(p.get(self.u), h);
        let mut z = vec![0.0; d];
        let mut r = vec![0.0; d];
        let mut n = vec![0.0; d];
        let mut out = vec![0.0; d];
        for i in 0..d {
            z[i] = sigmoid(a[i] + uh[i]);
            r[i] = sigmoid(a[d + i] + uh[d + i]);
            n[i] = (a[2 * d + i] + r[i] * uh[2 * d + i]).tanh();
            out[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
        }
        let un = uh[2 * d..].to_vec();
        (out, GruCache { x: x.to_vec(), h: h.to_vec(), z, r, n, un })
    }

    /// Returns `(dh, dx)`.
    pub fn backward(&self, p: &Params, g: &mut Grads, c: &GruCache, dout: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.hidden;
        let mut da = vec![0.0; 3 * d];
        let mut duh = vec![0.0; 3 * d];
        let mut dh = vec![0.0; d];
        for i in 0..d {
            let dn = dout[i] * (1.0 - c.z[i]);
            let dz = dout[i] * (c.h[i] - c.n[i]);
            dh[i] = dout[i] * c.z[i];
            let dpre_n = dn * (1.0 - c.n[i] * c.n[i]);
            let dr = dpre_n * c.un[i];
            let dpre_z = dz * c.z[i] * (1.0 - c.z[i]);
            let dpre_r = dr * c.r[i] * (1.0 - c.r[i]);
            da[i] = dpre_z;
            da[d + i] = dpre_r;
            da[2 * d + i] = dpre_n;
            duh[i] = dpre_z;
            duh[d + i] = dpre_r;
            duh[2 * d + i] = dpre_n * c.r[i];
        }
        outer_acc(g.get_mut(self.w), &da, &c.x);
        super::add_into(&da, g.get_mut(self.b).data_mut());
        outer_acc(g.get_mut(self.u), &duh, &c.h);
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(p.get(self.w), &da, &mut dx);
        matvec_t_acc(p.get(self.u), &duh, &mut dh);
        (dh, dx)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Cross-entropy of `gold` under softmax(logits); returns the loss and its
/// gradient with respect to the logits (softmax − one-hot).
pub fn softmax_xent(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    let lp = log_softmax(logits);
    let mut grad: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    grad[gold] -= 1.0;
    (-lp[gold], grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
}

/// Dot-product attention of `key` over the rows of `memories`.
pub fn attention(key: &[f64], memories: &[Vec<f64>]) -> Attention {
    let scores: Vec<f64> = memories.iter().map(|m| dot(m, key)).collect();
    let weights = softmax(&scores);
    let mut context = vec![0.0; key.len()];
    for (a, m) in weights.iter().zip(memories) {
        axpy(*a, m, &mut context);
    }
    Attention { weights, context }
}

/// Returns `(dkey, dmemories)` given the gradient of the context.
pub fn attention_backward(key: &[f64], memories: &[Vec<f64>], att: &Attention, dcontext: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dalpha: Vec<f64> = memories.iter().map(|m| dot(m, dcontext)).collect();
    let mean = dot(&att.weights, &dalpha);
    let mut dkey = vec![0.0; key.len()];
    let mut dmem = Vec::with_capacity(memories.len());
    for (i, m) in memories.iter().enumerate() {
        let ds = att.weights[i] * (dalpha[i] - mean);
        axpy(ds, m, &mut dkey);
        let mut dm = vec![0.0; key.len()];
        axpy(ds, key, &mut dm);
        axpy(att.weights[i], dcontext, &mut dm);
        dmem.push(dm);
    }
    (dkey, dmem)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through a rectifier given its pre-activation input.
pub fn relu_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter().zip(dy).map(|(&p, &d)| if p > 0.0 { d } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_maps_zero_to_zero() {
        let mut s = ParameterStore::new();
        let g = s.group("g", 0.1);
        let gru = Gru::new(&mut s, "gru", g, 4, 4, &mut ChaCha8Rng::seed_from_u64(0));
        for id in [gru.w, gru.u] {
            s.params.get_mut(id).fill(0.0);
        }
        let (h, _) = gru.forward(&s.params, &[0.0; 4], &[0.0; 4]);
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn cell_output_stays_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = ParameterStore::new();
        let g = s.group("g", 0.1);
        let gru = Gru::new(&mut s, "gru", g, 3, 5, &mut rng);
        for id in [gru.w, gru.u, gru.b] {
            s.params.get_mut(id).data_mut().iter_mut().for_each(|x| *x = rng.random_range(-3.0..3.0));
        }
        let mut h = vec![0.0; 5];
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            h = gru.forward(&s.params, &h, &x).0;
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn single_memory_gets_all_weight() {
        let att = attention(&[0.3, -1.0], &[vec![2.0, 5.0]]);
        assert_eq!(att.weights, vec![1.0]);
        assert_eq!(att.context, vec![2.0, 5.0]);
    }

    #[test]
    fn identical_memories_share_weight() {
        let m = vec![vec![0.5, 0.1]; 4];
        let att = attention(&[1.0, 2.0], &m);
        for w in att.weights {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn xent_limits() {
        let (loss, grad) = softmax_xent(&[0.0; 7], 2);
        assert!((loss - 7f64.ln()).abs() < 1e-12);
        assert!((grad.iter().sum::<f64>()).abs() < 1e-12);
        let (loss, _) = softmax_xent(&[0.0, 50.0, 0.0], 1);
        assert!(loss < 1e-20);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1000.0, -1000.0, 3.0]);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
