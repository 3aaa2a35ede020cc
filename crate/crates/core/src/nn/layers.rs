//! Layers: affine maps, single-head self-attention over entity tokens and a
//! GRU cell. Each layer exposes `forward` returning whatever its backward pass
//! needs, and `backward` accumulating parameter gradients into the store.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{axpy, dot, sigmoid, ParamId, ParamStore, Scalar};

/// Orthogonal matrix of shape `rows x cols` (row-major) scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    // Orthonormalize the shorter side with modified Gram-Schmidt.
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vecs.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    out
}

/// `y = W x + b` with `W` stored row-major as `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        inp: usize,
        out: usize,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let w = orthogonal(out, inp, gain, rng).into_iter().map(T::from_f64).collect();
        let w = store.add(&format!("{name}.w"), vec![out, inp], w).expect("unique layer name");
        let b = store.add(&format!("{name}.b"), vec![out], vec![T::zero(); out]).expect("unique layer name");
        Self { w, b, inp, out }
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inp);
        let w = store.value(self.w);
        let b = store.value(self.b);
        (0..self.out).map(|o| b[o] + dot(&w[o * self.inp..(o + 1) * self.inp], x)).collect()
    }

    /// Accumulates `dW += dy x^T`, `db += dy` and, when asked, `dx += W^T dy`.
    pub fn backward<T: Scalar>(&self, store: &mut ParamStore<T>, x: &[T], dy: &[T], dx: Option<&mut [T]>) {
        {
            let gw = store.grad_mut(self.w);
            for o in 0..self.out {
                if dy[o] != T::zero() {
                    axpy(dy[o], x, &mut gw[o * self.inp..(o + 1) * self.inp]);
                }
            }
        }
        {
            let gb = store.grad_mut(self.b);
            for o in 0..self.out {
                gb[o] += dy[o];
            }
        }
        if let Some(dx) = dx {
            let w = store.value(self.w);
            for o in 0..self.out {
                if dy[o] != T::zero() {
                    axpy(dy[o], &w[o * self.inp..(o + 1) * self.inp], dx);
                }
            }
        }
    }
}

/// Single-head scaled dot-product self-attention with a residual connection
/// and mean pooling over tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub width: usize,
    pub key_width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCache<T> {
    pub q: Vec<Vec<T>>,
    pub k: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    /// Row-stochastic attention weights `a[i][j]`.
    pub a: Vec<Vec<T>>,
}

impl SelfAttention {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        width: usize,
        key_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            q: Linear::new(store, &format!("{name}.q"), width, key_width, 1.0, rng),
            k: Linear::new(store, &format!("{name}.k"), width, key_width, 1.0, rng),
            v: Linear::new(store, &format!("{name}.v"), width, width, 1.0, rng),
            width,
            key_width,
        }
    }

    /// Returns the mean over tokens of `x_i + sum_j a_ij v_j`.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, tokens: &[Vec<T>]) -> (Vec<T>, AttentionCache<T>) {
        let n = tokens.len();
        let q: Vec<Vec<T>> = tokens.iter().map(|x| self.q.forward(store, x)).collect();
        let k: Vec<Vec<T>> = tokens.iter().map(|x| self.k.forward(store, x)).collect();
        let v: Vec<Vec<T>> = tokens.iter().map(|x| self.v.forward(store, x)).collect();
        let scale = T::from_f64(1.0 / (self.key_width as f64).sqrt());
        let mut a = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            let s: Vec<T> = (0..n).map(|j| dot(&q[i], &k[j]) * scale).collect();
            let m = s.iter().copied().fold(T::neg_infinity(), T::max);
            let e: Vec<T> = s.iter().map(|&x| (x - m).exp()).collect();
            let z: T = e.iter().copied().sum();
            for j in 0..n {
                a[i][j] = e[j] / z;
            }
        }
        let inv_n = T::from_f64(1.0 / n as f64);
        let mut pooled = vec![T::zero(); self.width];
        for i in 0..n {
            axpy(inv_n, &tokens[i], &mut pooled);
            for j in 0..n {
                axpy(a[i][j] * inv_n, &v[j], &mut pooled);
            }
        }
        (pooled, AttentionCache { q, k, v, a })
    }

    /// Backpropagates a gradient on the pooled output; returns token
    /// gradients.
    pub fn backward<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        tokens: &[Vec<T>],
        cache: &AttentionCache<T>,
        dpooled: &[T],
    ) -> Vec<Vec<T>> {
        let n = tokens.len();
        let inv_n = T::from_f64(1.0 / n as f64);
        let scale = T::from_f64(1.0 / (self.key_width as f64).sqrt());
        let dy: Vec<T> = dpooled.iter().map(|&g| g * inv_n).collect();
        let mut dx: Vec<Vec<T>> = vec![dy.clone(); n];

        let mut dv = vec![vec![T::zero(); self.width]; n];
        let mut dq = vec![vec![T::zero(); self.key_width]; n];
        let mut dk = vec![vec![T::zero(); self.key_width]; n];
        for i in 0..n {
            let da: Vec<T> = (0..n).map(|j| dot(&dy, &cache.v[j])).collect();
            let mean: T = (0..n).map(|j| cache.a[i][j] * da[j]).sum();
            for j in 0..n {
                axpy(cache.a[i][j], &dy, &mut dv[j]);
                let ds = cache.a[i][j] * (da[j] - mean) * scale;
                axpy(ds, &cache.k[j], &mut dq[i]);
                axpy(ds, &cache.q[i], &mut dk[j]);
            }
        }
        for i in 0..n {
            self.q.backward(store, &tokens[i], &dq[i], Some(&mut dx[i]));
            self.k.backward(store, &tokens[i], &dk[i], Some(&mut dx[i]));
            self.v.backward(store, &tokens[i], &dv[i], Some(&mut dx[i]));
        }
        dx
    }
}

/// Gated recurrent unit:
/// `z = σ(W_z x + U_z h)`, `r = σ(W_r x + U_r h)`,
/// `n = tanh(W_n x + r ⊙ (U_n h))`, `h' = (1 - z) ⊙ n + z ⊙ h`
/// (every affine term has its own bias).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gru {
    pub x: Linear,
    pub h: Linear,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCache<T> {
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
    /// `U_n h + b` before gating by `r`.
    pub hn: Vec<T>,
}

impl Gru {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, inp: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            x: Linear::new(store, &format!("{name}.x"), inp, 3 * hidden, 1.0, rng),
            h: Linear::new(store, &format!("{name}.h"), hidden, 3 * hidden, 1.0, rng),
            hidden,
        }
    }

    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &[T], h_prev: &[T]) -> (Vec<T>, GruCache<T>) {
        let hd = self.hidden;
        let gx = self.x.forward(store, x);
        let gh = self.h.forward(store, h_prev);
        let mut z = vec![T::zero(); hd];
        let mut r = vec![T::zero(); hd];
        let mut n = vec![T::zero(); hd];
        let mut h = vec![T::zero(); hd];
        for i in 0..hd {
            z[i] = sigmoid(gx[i] + gh[i]);
            r[i] = sigmoid(gx[hd + i] + gh[hd + i]);
            n[i] = (gx[2 * hd + i] + r[i] * gh[2 * hd + i]).tanh();
            h[i] = (T::one() - z[i]) * n[i] + z[i] * h_prev[i];
        }
        let hn = gh[2 * hd..].to_vec();
        (h, GruCache { h_prev: h_prev.to_vec(), z, r, n, hn })
    }

    /// Returns `(dx, dh_prev)` for a gradient `dh` on the new hidden state.
    pub fn backward<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        x: &[T],
        cache: &GruCache<T>,
        dh: &[T],
    ) -> (Vec<T>, Vec<T>) {
        let hd = self.hidden;
        let mut dgx = vec![T::zero(); 3 * hd];
        let mut dgh = vec![T::zero(); 3 * hd];
        let mut dh_prev = vec![T::zero(); hd];
        for i in 0..hd {
            let (z, r, n) = (cache.z[i], cache.r[i], cache.n[i]);
            let dn = dh[i] * (T::one() - z);
            let dz = dh[i] * (cache.h_prev[i] - n);
            dh_prev[i] = dh[i] * z;
            let dan = dn * (T::one() - n * n);
            let dr = dan * cache.hn[i];
            let daz = dz * z * (T::one() - z);
            let dar = dr * r * (T::one() - r);
            dgx[i] = daz;
            dgh[i] = daz;
            dgx[hd + i] = dar;
            dgh[hd + i] = dar;
            dgx[2 * hd + i] = dan;
            dgh[2 * hd + i] = dan * r;
        }
        let mut dx = vec![T::zero(); x.len()];
        self.x.backward(store, x, &dgx, Some(&mut dx));
        self.h.backward(store, &cache.h_prev, &dgh, Some(&mut dh_prev));
        (dx, dh_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (r, c) in [(4, 9), (9, 4), (5, 5)] {
            let w = orthogonal(r, c, 1.0, &mut rng);
            let short_is_rows = r <= c;
            let n = r.min(c);
            for a in 0..n {
                for b in 0..n {
                    let d: f64 = if short_is_rows {
                        (0..c).map(|k| w[a * c + k] * w[b * c + k]).sum()
                    } else {
                        (0..r).map(|k| w[k * c + a] * w[k * c + b]).sum()
                    };
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::<f64>::new();
        let lin = Linear::new(&mut s, "l", 3, 2, 1.0, &mut rng);
        let x = [1.0, -2.0, 0.5];
        let dy = [0.3, -1.0];
        let mut dx = [0.0; 3];
        lin.backward(&mut s, &x, &dy, Some(&mut dx));
        let gw = s.grad(lin.w);
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(gw[o * 3 + i], dy[o] * x[i]);
            }
        }
        assert_eq!(s.grad(lin.b), &dy);
        let w = s.value(lin.w).to_vec();
        for i in 0..3 {
            assert!((dx[i] - (w[i] * dy[0] + w[3 + i] * dy[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_weights_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = ParamStore::<f64>::new();
        let att = SelfAttention::new(&mut s, "a", 6, 3, &mut rng);
        let tokens: Vec<Vec<f64>> = (0..3).map(|t| (0..6).map(|i| (t * 6 + i) as f64 * 0.1).collect()).collect();
        let (p, c) = att.forward(&s, &tokens);
        assert_eq!(p.len(), 6);
        for row in &c.a {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
