use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Parameter values plus their names and group membership.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    tensors: Vec<Tensor>,
    names: Vec<String>,
    group_of: Vec<usize>,
    by_name: BTreeMap<String, ParamId>,
}

impl Params {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Result<ParamId, NnError> {
        self.by_name.get(name).copied().ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group_of(&self, id: ParamId) -> usize {
        self.group_of[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Gradient accumulators, one per parameter with the same shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grads {
    tensors: Vec<Tensor>,
}

impl Grads {
    pub fn like(params: &Params) -> Grads {
        Grads { tensors: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            super::add_into(b.data(), a.data_mut());
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.data().iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.data().iter().all(|&x| x == 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub lr: f64,
}

/// Adaptive-moment optimizer with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-5, clip_norm: Some(5.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub params: Params,
    pub grads: Grads,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    groups: Vec<Group>,
    step: u64,
}

impl Default for ParameterStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore {
            params: Params::default(),
            grads: Grads::default(),
            m: Vec::new(),
            v: Vec::new(),
            groups: Vec::new(),
            step: 0,
        }
    }

    /// Returns the index of `name`, creating the group with `lr` if absent.
    pub fn group(&mut self, name: &str, lr: f64) -> usize {
        if let Some(i) = self.groups.iter().position(|g| g.name == name) {
            return i;
        }
        self.groups.push(Group { name: name.to_string(), lr });
        self.groups.len() - 1
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn set_lr(&mut self, group: &str, lr: f64) -> Result<(), NnError> {
        let g = self.groups.iter_mut().find(|g| g.name == group).ok_or_else(|| NnError::UnknownParam(group.to_string()))?;
        g.lr = lr;
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn add(&mut self, name: &str, group: usize, value: Tensor) -> Result<ParamId, NnError> {
        if self.params.by_name.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        assert!(group < self.groups.len(), "unknown group index {group}");
        let id = ParamId(self.params.tensors.len());
        self.grads.tensors.push(Tensor::zeros(value.shape()));
        self.m.push(Tensor::zeros(value.shape()));
        self.v.push(Tensor::zeros(value.shape()));
        self.params.tensors.push(value);
        self.params.names.push(name.to_string());
        self.params.group_of.push(group);
        self.params.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_uniform(&mut self, name: &str, group: usize, shape: &[usize], bound: f64, rng: &mut impl Rng) -> ParamId {
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|x| *x = dist.sample(rng));
        self.add(name, group, t).expect("fresh name")
    }

    pub fn add_normal(&mut self, name: &str, group: usize, shape: &[usize], std: f64, rng: &mut impl Rng) -> ParamId {
        let dist = Normal::new(0.0, std).expect("positive std");
        let mut t = Tensor::zeros(shape);
        t.data_mut().iter_mut().for_each(|x| *x = dist.sample(rng));
        self.add(name, group, t).expect("fresh name")
    }

    pub fn add_zeros(&mut self, name: &str, group: usize, shape: &[usize]) -> ParamId {
        self.add(name, group, Tensor::zeros(shape)).expect("fresh name")
    }

    /// Appends rows drawn from normal(0, std) to a matrix parameter, with
    /// zero gradients and moments.
    pub fn grow_rows(&mut self, id: ParamId, extra: usize, std: f64, rng: &mut impl Rng) {
        let dist = Normal::new(0.0, std).expect("positive std");
        let t = &mut self.params.tensors[id.0];
        let old = t.len();
        t.grow_rows(extra);
        t.data_mut()[old..].iter_mut().for_each(|x| *x = dist.sample(rng));
        self.grads.tensors[id.0].grow_rows(extra);
        self.m[id.0].grow_rows(extra);
        self.v[id.0].grow_rows(extra);
    }

    pub fn zero_grads(&mut self) {
        self.grads.zero();
    }

    /// One AdamW update using the accumulated gradients, which are then
    /// zeroed.
    pub fn step(&mut self, opt: &AdamW) -> Result<(), NnError> {
        for (i, g) in self.grads.tensors.iter().enumerate() {
            g.check_finite(&format!("gradient of {}", self.params.names[i]))?;
        }
        let scale = match opt.clip_norm {
            Some(c) => {
                let n = self.grads.norm();
                if n > c { c / n } else { 1.0 }
            }
            None => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - opt.beta1.powi(t);
        let bc2 = 1.0 - opt.beta2.powi(t);
        for i in 0..self.params.tensors.len() {
            let lr = self.groups[self.params.group_of[i]].lr;
            let p = self.params.tensors[i].data_mut();
            let g = self.grads.tensors[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for j in 0..p.len() {
                let gj = g[j] * scale;
                m[j] = opt.beta1 * m[j] + (1.0 - opt.beta1) * gj;
                v[j] = opt.beta2 * v[j] + (1.0 - opt.beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= lr * opt.weight_decay * p[j];
                p[j] -= lr * mhat / (vhat.sqrt() + opt.eps);
            }
            self.params.tensors[i].check_finite(&self.params.names[i])?;
        }
        self.grads.zero();
        Ok(())
    }

    /// Replaces values by name from `other`; shapes must agree.
    pub fn load_values(&mut self, other: &Params) -> Result<(), NnError> {
        for id in other.ids() {
            let name = other.name(id);
            let mine = self.params.id(name)?;
            let src = other.get(id);
            if src.shape() != self.params.get(mine).shape() {
                return Err(NnError::Shape(format!(
                    "{name}: checkpoint {:?} vs model {:?}",
                    src.shape(),
                    self.params.get(mine).shape()
                )));
            }
            *self.params.get_mut(mine) = src.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_store(x: f64, lr: f64) -> (ParameterStore, ParamId) {
        let mut s = ParameterStore::new();
        let g = s.group("all", lr);
        let id = s.add("x", g, Tensor::vector(vec![x])).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParameterStore::new();
        let g = s.group("all", 0.1);
        s.add_uniform("w", g, &[3, 4], 0.08, &mut rng);
        let before = s.params.clone();
        let opt = AdamW { weight_decay: 0.0, ..AdamW::default() };
        s.step(&opt).unwrap();
        assert_eq!(s.params, before);
    }

    #[test]
    fn constant_gradient_follows_closed_form() {
        // f(x) = (x - 3)^2 with the gradient frozen at x = 0: bias-corrected
        // moments equal g and g^2, so each step moves exactly lr * g / (|g| + eps).
        let (mut s, id) = scalar_store(0.0, 0.05);
        let opt = AdamW { weight_decay: 0.0, clip_norm: None, ..AdamW::default() };
        let f = |x: f64| (x - 3.0).powi(2);
        for k in 1..=40 {
            s.grads.get_mut(id).data_mut()[0] = -6.0;
            s.step(&opt).unwrap();
            let x = s.params.get(id).data()[0];
            let expect = k as f64 * 0.05 * 6.0 / (6.0 + opt.eps);
            assert!((x - expect).abs() < 1e-12, "step {k}: {x} vs {expect}");
            assert!(f(x) < f(expect - 0.05));
        }
    }

    #[test]
    fn converges_on_a_convex_quadratic() {
        let (mut s, id) = scalar_store(0.0, 0.05);
        let opt = AdamW { weight_decay: 0.0, clip_norm: None, ..AdamW::default() };
        for _ in 0..500 {
            let x = s.params.get(id).data()[0];
            s.grads.get_mut(id).data_mut()[0] = 2.0 * (x - 3.0);
            s.step(&opt).unwrap();
        }
        let x = s.params.get(id).data()[0];
        assert!((x - 3.0).abs() < 1e-2, "x = {x}");
    }

    #[test]
    fn decay_only_step_shrinks_norm() {
        let (mut s, id) = scalar_store(2.0, 0.1);
        s.step(&AdamW { weight_decay: 0.5, ..AdamW::default() }).unwrap();
        let x = s.params.get(id).data()[0];
        assert!((x - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn step_zeroes_gradients_and_rejects_nan() {
        let (mut s, id) = scalar_store(1.0, 0.1);
        s.grads.get_mut(id).data_mut()[0] = 1.0;
        s.step(&AdamW::default()).unwrap();
        assert!(s.grads.is_zero());
        s.grads.get_mut(id).data_mut()[0] = f64::NAN;
        assert!(matches!(s.step(&AdamW::default()), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn growing_rows_keeps_old_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParameterStore::new();
        let g = s.group("enc", 0.1);
        let id = s.add_normal("emb", g, &[2, 3], 0.02, &mut rng);
        let old = s.params.get(id).clone();
        s.grow_rows(id, 2, 0.02, &mut rng);
        assert_eq!(s.params.get(id).shape(), &[4, 3]);
        assert_eq!(&s.params.get(id).data()[..6], old.data());
        assert_eq!(s.grads.get(id).shape(), &[4, 3]);
    }
}
