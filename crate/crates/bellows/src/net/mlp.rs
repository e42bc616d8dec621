//! Feedforward tanh core with manual reverse-mode gradients.
//!
//! Samples live in matrix columns (`features × batch`), which keeps every
//! layer a plain `W · A + b` product in column-major storage. Besides the
//! usual forward/backward pair there is a forward-tangent sweep (one
//! directional derivative with respect to the inputs) together with the
//! matching second-order backward pass, which is what a prediction-time
//! derivative penalty needs.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::RngExt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Hidden layers use tanh, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer activations kept for the backward pass. `a[0]` is the input.
pub struct Cache {
    pub a: Vec<DMatrix<f64>>,
}

/// Forward-tangent sweep cache: activations, tangents `v`, and the raw
/// products `s_l = W_l v_{l-1}` that the second-order backward pass needs.
pub struct TangentCache {
    pub a: Vec<DMatrix<f64>>,
    pub v: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
}

/// Gradients with the same shapes as the layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Layer {
                    w: DMatrix::zeros(l.w.nrows(), l.w.ncols()),
                    b: DVector::zeros(l.b.len()),
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, factor: f64) {
        for (g, o) in self.layers.iter_mut().zip(&other.layers) {
            g.w.zip_apply(&o.w, |a, b| *a += factor * b);
            g.b.zip_apply(&o.b, |a, b| *a += factor * b);
        }
    }

    /// Same flat layout as [`Mlp::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend_from_slice(l.w.as_slice());
            v.extend_from_slice(l.b.as_slice());
        }
        v
    }
}

fn broadcast_add(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut col in z.column_iter_mut() {
        col += b;
    }
}

impl Mlp {
    /// Xavier-uniform initialization for the given `[in, hidden.., out]`
    /// layer sizes.
    pub fn xavier(sizes: &[usize], rng: &mut StdRng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|wnd| {
                let (fan_in, fan_out) = (wnd[0], wnd[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit)),
                    b: DVector::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameters as one flat vector (layer order, weights then bias).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            v.extend_from_slice(l.w.as_slice());
            v.extend_from_slice(l.b.as_slice());
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let wlen = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&flat[at..at + wlen]);
            at += wlen;
            let blen = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&flat[at..at + blen]);
            at += blen;
        }
        debug_assert_eq!(at, flat.len());
    }

    fn check_input(&self, input: &DMatrix<f64>) -> Result<()> {
        if input.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: input.nrows(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping activations for [`Mlp::backward`].
    pub fn forward(&self, input: &DMatrix<f64>) -> Result<(DMatrix<f64>, Cache)> {
        self.check_input(input)?;
        let depth = self.layers.len();
        let mut a = Vec::with_capacity(depth + 1);
        a.push(input.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &a[l];
            broadcast_add(&mut z, &layer.b);
            if l + 1 < depth {
                z.apply(|v| *v = v.tanh());
            }
            a.push(z);
        }
        Ok((a[depth].clone(), Cache { a }))
    }

    /// Forward pass without bookkeeping.
    pub fn forward_only(&self, input: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(input)?;
        let depth = self.layers.len();
        let mut act = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &act;
            broadcast_add(&mut z, &layer.b);
            if l + 1 < depth {
                z.apply(|v| *v = v.tanh());
            }
            act = z;
        }
        Ok(act)
    }

    /// Single-sample convenience wrapper.
    pub fn forward_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.forward_only(&m)?.column(0).into_owned())
    }

    /// Reverse pass. `grad_out` is `∂L/∂output` with the batch in columns;
    /// returns parameter gradients and `∂L/∂input`.
    pub fn backward(&self, cache: &Cache, grad_out: &DMatrix<f64>) -> (Gradients, DMatrix<f64>) {
        let depth = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_out.clone();
        for l in (0..depth).rev() {
            if l + 1 < depth {
                // tanh layer: delta ⊙ (1 - a²)
                let act = &cache.a[l + 1];
                delta.zip_apply(act, |d, a| *d *= 1.0 - a * a);
            }
            grads.layers[l].w = &delta * cache.a[l].transpose();
            grads.layers[l].b = delta.column_sum();
            delta = self.layers[l].w.transpose() * delta;
        }
        (grads, delta)
    }

    /// Forward pass propagating one tangent direction alongside the values.
    pub fn forward_with_tangent(
        &self,
        input: &DMatrix<f64>,
        tangent: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, TangentCache)> {
        self.check_input(input)?;
        let depth = self.layers.len();
        let mut a = Vec::with_capacity(depth + 1);
        let mut v = Vec::with_capacity(depth + 1);
        let mut s = Vec::with_capacity(depth);
        a.push(input.clone());
        v.push(tangent.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.w * &a[l];
            broadcast_add(&mut z, &layer.b);
            let sv = &layer.w * &v[l];
            if l + 1 < depth {
                z.apply(|val| *val = val.tanh());
                // v = (1 - a²) ⊙ s
                let mut vt = sv.clone();
                vt.zip_apply(&z, |t, act| *t *= 1.0 - act * act);
                v.push(vt);
            } else {
                v.push(sv.clone());
            }
            s.push(sv);
            a.push(z);
        }
        Ok((
            a[depth].clone(),
            v[depth].clone(),
            TangentCache { a, v, s },
        ))
    }

    /// Reverse pass for a loss that reads both the output and its tangent.
    ///
    /// `grad_out` is `∂L/∂y`, `grad_tan` is `∂L/∂(∂y/∂direction)`. Returns
    /// parameter gradients and `∂L/∂input`.
    pub fn backward_with_tangent(
        &self,
        cache: &TangentCache,
        grad_out: &DMatrix<f64>,
        grad_tan: &DMatrix<f64>,
    ) -> (Gradients, DMatrix<f64>) {
        let depth = self.layers.len();
        let mut grads = Gradients::zeros_like(self);
        let mut a_bar = grad_out.clone();
        let mut v_bar = grad_tan.clone();
        for l in (0..depth).rev() {
            let (z_bar, s_bar);
            if l + 1 < depth {
                let act = &cache.a[l + 1];
                // z̄ = φ'(z) ⊙ ā + φ''(z) ⊙ s ⊙ v̄, with φ = tanh:
                // φ' = 1 - a², φ'' = -2a (1 - a²)
                let mut zb = DMatrix::zeros(a_bar.nrows(), a_bar.ncols());
                for c in 0..zb.ncols() {
                    for r in 0..zb.nrows() {
                        let a = act[(r, c)];
                        let phi1 = 1.0 - a * a;
                        zb[(r, c)] = phi1 * a_bar[(r, c)]
                            - 2.0 * a * phi1 * cache.s[l][(r, c)] * v_bar[(r, c)];
                    }
                }
                let mut sb = v_bar.clone();
                sb.zip_apply(act, |s, a| *s *= 1.0 - a * a);
                z_bar = zb;
                s_bar = sb;
            } else {
                z_bar = a_bar.clone();
                s_bar = v_bar.clone();
            }
            grads.layers[l].w = &z_bar * cache.a[l].transpose() + &s_bar * cache.v[l].transpose();
            grads.layers[l].b = z_bar.column_sum();
            a_bar = self.layers[l].w.transpose() * z_bar;
            v_bar = self.layers[l].w.transpose() * s_bar;
        }
        (grads, a_bar)
    }
}
