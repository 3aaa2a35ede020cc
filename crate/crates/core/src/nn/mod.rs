//! Actor-critic networks with hand-written backpropagation.
//!
//! Everything is generic over the float type: training runs in `f32`,
//! gradient checks in `f64`. Parameters live in a [`ParamStore`] addressed by
//! [`ParamId`]; layers only hold ids, so one store can back several network
//! instances that share layers.

pub mod checkpoint;
pub mod dist;
pub mod gradcheck;
pub mod layers;
pub mod network;

use std::collections::HashMap;
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use dist::{categorical_log_prob, log_softmax, sample_action, softmax, SampledAction};
pub use layers::{Gru, Linear, SelfAttention};
pub use network::{
    ActorOutput, ActorTrace, Body, CriticTrace, InstanceConfig, NetworkConfig, PolicyKind, PolicyNet, LOW_LEVEL_HEADS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("trace was recorded against older parameters")]
    StaleTrace,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown network instance {0}")]
    UnknownInstance(usize),
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Float types the networks run on.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    /// Checkpoint dtype tag.
    const DTYPE: u8;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
}

impl Scalar for f32 {
    const DTYPE: u8 = 1;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Scalar for f64 {
    const DTYPE: u8 = 2;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

/// Dot product with eight independent accumulators so the compiler can
/// vectorize it without reordering a single running sum.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn tanh_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        *x = x.tanh();
    }
}

/// Multiplies an upstream gradient by the tanh derivative `1 - y^2`.
pub fn tanh_backward<T: Scalar>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter().zip(dy).map(|(&y, &d)| d * (T::one() - y * y)).collect()
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Named parameter arrays with gradients and Adam moments.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Vec<T>>,
    grads: Vec<Vec<T>>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    index: HashMap<String, ParamId>,
    /// Number of Adam steps taken.
    pub adam_steps: u64,
    version: u64,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            shapes: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            index: HashMap::new(),
            adam_steps: 0,
            version: 0,
        }
    }

    pub fn add(&mut self, name: &str, shape: Vec<usize>, values: Vec<T>) -> Result<ParamId, NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(NnError::Shape { expected: n, got: values.len() });
        }
        let id = ParamId(self.names.len());
        self.names.push(name.to_string());
        self.shapes.push(shape);
        self.values.push(values);
        self.grads.push(vec![T::zero(); n]);
        self.m.push(vec![T::zero(); n]);
        self.v.push(vec![T::zero(); n]);
        self.index.insert(name.to_string(), id);
        self.version += 1;
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.names.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.shapes[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        &self.values[id.0]
    }

    /// Mutable access to parameter values. Invalidates outstanding traces.
    pub fn value_mut(&mut self, id: ParamId) -> &mut [T] {
        self.version += 1;
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.grads[id.0]
    }

    /// Value and gradient of one parameter at once.
    pub fn value_and_grad(&mut self, id: ParamId) -> (&[T], &mut [T]) {
        (&self.values[id.0], &mut self.grads[id.0])
    }

    pub fn moments(&self, id: ParamId) -> (&[T], &[T]) {
        (&self.m[id.0], &self.v[id.0])
    }

    pub fn moments_mut(&mut self, id: ParamId) -> (&mut [T], &mut [T]) {
        (&mut self.m[id.0], &mut self.v[id.0])
    }

    /// Bumped whenever values change; traces remember it.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().flatten().map(|g| g.as_f64() * g.as_f64()).sum::<f64>().sqrt()
    }

    pub fn scale_grads(&mut self, s: f64) {
        let s = T::from_f64(s);
        for g in self.grads.iter_mut().flatten() {
            *g *= s;
        }
    }

    /// Rescales gradients so their global norm is at most `max_norm`; returns
    /// the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale_grads(max_norm / norm);
        }
        norm
    }

    pub fn grads_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.is_finite())
    }

    /// One bias-corrected Adam update from the accumulated gradients.
    pub fn adam_step(&mut self, lr: f64, cfg: &AdamConfig) {
        self.adam_steps += 1;
        self.version += 1;
        let t = self.adam_steps as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - cfg.beta1), T::from_f64(1.0 - cfg.beta2));
        let step = T::from_f64(lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(cfg.eps);
        for p in 0..self.values.len() {
            let (vals, grads, m, v) = (&mut self.values[p], &self.grads[p], &mut self.m[p], &mut self.v[p]);
            for i in 0..vals.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                vals[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
            }
        }
    }

    /// SHA-256 over parameter names, shapes and little-endian values.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        let mut buf = Vec::new();
        for p in 0..self.names.len() {
            h.update(self.names[p].as_bytes());
            for &d in &self.shapes[p] {
                h.update((d as u64).to_le_bytes());
            }
            buf.clear();
            for &x in &self.values[p] {
                x.write_le(&mut buf);
            }
            h.update(&buf);
        }
        hex::encode(h.finalize())
    }

    /// Same layout and values in another float type; gradients and moments
    /// are reset.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::<U>::new();
        for p in 0..self.names.len() {
            let vals = self.values[p].iter().map(|&x| U::from_f64(x.as_f64())).collect();
            out.add(&self.names[p], self.shapes[p].clone(), vals).expect("names are unique");
        }
        out.adam_steps = self.adam_steps;
        out
    }

    /// Copies values (not moments) from a store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore<T>) -> Result<(), NnError> {
        if other.names != self.names || other.shapes != self.shapes {
            return Err(NnError::Checkpoint("parameter layouts differ".into()));
        }
        self.values.clone_from(&other.values);
        self.version += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(vals: Vec<f64>) -> (ParamStore<f64>, ParamId) {
        let mut s = ParamStore::new();
        let n = vals.len();
        let id = s.add("p", vec![n], vals).unwrap();
        (s, id)
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let (mut s, id) = store(vec![1.0, -2.0, 3.0]);
        for _ in 0..10 {
            s.adam_step(1e-3, &AdamConfig::default());
        }
        assert_eq!(s.value(id), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_is_bias_corrected() {
        let (mut s, id) = store(vec![0.0, 0.0]);
        s.grad_mut(id).copy_from_slice(&[0.5, -4.0]);
        s.adam_step(0.1, &AdamConfig::default());
        // m_hat = g, v_hat = g^2 after correction, so the step is lr * g / (|g| + eps)
        let expect = |g: f64| -0.1 * g / (g.abs() + 1e-8);
        assert!((s.value(id)[0] - expect(0.5)).abs() < 1e-12);
        assert!((s.value(id)[1] - expect(-4.0)).abs() < 1e-12);
    }

    #[test]
    fn adam_constant_gradient_step_tends_to_lr() {
        let (mut s, id) = store(vec![0.0]);
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..2000 {
            s.grad_mut(id)[0] = 3.0;
            s.adam_step(1e-3, &AdamConfig::default());
            last = prev - s.value(id)[0];
            prev = s.value(id)[0];
        }
        assert!((last - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn clip_and_norm() {
        let (mut s, id) = store(vec![0.0, 0.0]);
        s.grad_mut(id).copy_from_slice(&[3.0, 4.0]);
        assert_eq!(s.clip_grad_norm(1.0), 5.0);
        assert!((s.grad_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn names_are_unique_and_checksum_tracks_values() {
        let (mut s, id) = store(vec![1.0]);
        assert!(s.add("p", vec![1], vec![0.0]).is_err());
        let before = s.checksum();
        s.value_mut(id)[0] = 2.0;
        assert_ne!(before, s.checksum());
        let f32s: ParamStore<f32> = s.cast();
        assert_eq!(f32s.value(ParamId(0)), &[2.0f32]);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64 * 0.25).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }
}
