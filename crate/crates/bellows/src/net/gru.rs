//! Gated recurrent unit with a linear readout, trained by truncated BPTT.
//!
//! Gate equations (σ is the logistic function):
//!
//! ```text
//! z  = σ(Wz i + Uz h + bz)            update gate
//! r  = σ(Wr i + Ur h + br)            reset gate
//! ñ  = tanh(Wn i + r ⊙ (Un h) + bn)   candidate
//! h' = (1 − z) ⊙ ñ + z ⊙ h
//! x̂  = Wo h' + bo
//! ```

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::RngExt;

#[derive(Debug, Clone)]
pub struct Gru {
    pub wz: DMatrix<f64>,
    pub uz: DMatrix<f64>,
    pub bz: DVector<f64>,
    pub wr: DMatrix<f64>,
    pub ur: DMatrix<f64>,
    pub br: DVector<f64>,
    pub wn: DMatrix<f64>,
    pub un: DMatrix<f64>,
    pub bn: DVector<f64>,
    pub wo: DMatrix<f64>,
    pub bo: DVector<f64>,
}

/// Everything the backward pass needs about one step.
pub struct GruStepCache {
    pub input: DVector<f64>,
    pub h_prev: DVector<f64>,
    pub z: DVector<f64>,
    pub r: DVector<f64>,
    pub n: DVector<f64>,
    pub un_h: DVector<f64>,
    pub h_new: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub wz: DMatrix<f64>,
    pub uz: DMatrix<f64>,
    pub bz: DVector<f64>,
    pub wr: DMatrix<f64>,
    pub ur: DMatrix<f64>,
    pub br: DVector<f64>,
    pub wn: DMatrix<f64>,
    pub un: DMatrix<f64>,
    pub bn: DVector<f64>,
    pub wo: DMatrix<f64>,
    pub bo: DVector<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Gru {
    pub fn new(input_dim: usize, hidden: usize, output: usize, rng: &mut StdRng) -> Self {
        let mut mat = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
        };
        Self {
            wz: mat(hidden, input_dim),
            uz: mat(hidden, hidden),
            bz: DVector::zeros(hidden),
            wr: mat(hidden, input_dim),
            ur: mat(hidden, hidden),
            br: DVector::zeros(hidden),
            wn: mat(hidden, input_dim),
            un: mat(hidden, hidden),
            bn: DVector::zeros(hidden),
            wo: mat(output, hidden),
            bo: DVector::zeros(output),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.uz.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.wz.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.wo.nrows()
    }

    /// One step: `(h', x̂) = f(h, input)`.
    pub fn step(&self, h: &DVector<f64>, input: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (h_new, out, _) = self.step_cached(h, input);
        (h_new, out)
    }

    pub fn step_cached(
        &self,
        h: &DVector<f64>,
        input: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, GruStepCache) {
        let mut z = &self.wz * input + &self.uz * h + &self.bz;
        z.apply(|v| *v = sigmoid(*v));
        let mut r = &self.wr * input + &self.ur * h + &self.br;
        r.apply(|v| *v = sigmoid(*v));
        let un_h = &self.un * h;
        let mut n = &self.wn * input + r.component_mul(&un_h) + &self.bn;
        n.apply(|v| *v = v.tanh());
        let h_new = DVector::from_fn(h.len(), |i, _| (1.0 - z[i]) * n[i] + z[i] * h[i]);
        let out = &self.wo * &h_new + &self.bo;
        let cache = GruStepCache {
            input: input.clone(),
            h_prev: h.clone(),
            z,
            r,
            n,
            un_h,
            h_new: h_new.clone(),
        };
        (h_new, out, cache)
    }

    /// Backward through one step. `grad_h_new` flows in from the future,
    /// `grad_out` from this step's readout loss. Accumulates parameter
    /// gradients into `grads` and returns `(grad_h_prev, grad_input)`.
    pub fn backward_step(
        &self,
        cache: &GruStepCache,
        grad_h_new: &DVector<f64>,
        grad_out: &DVector<f64>,
        grads: &mut GruGrads,
    ) -> (DVector<f64>, DVector<f64>) {
        let GruStepCache {
            input,
            h_prev,
            z,
            r,
            n,
            un_h,
            h_new,
        } = cache;

        grads.wo += grad_out * h_new.transpose();
        grads.bo += grad_out;
        let gh = grad_h_new + self.wo.transpose() * grad_out;

        // h' = (1 − z) ⊙ n + z ⊙ h
        let dz = DVector::from_fn(z.len(), |i, _| gh[i] * (h_prev[i] - n[i]));
        let dn = DVector::from_fn(z.len(), |i, _| gh[i] * (1.0 - z[i]));
        let mut gh_prev = DVector::from_fn(z.len(), |i, _| gh[i] * z[i]);

        // candidate: n = tanh(Wn i + r ⊙ (Un h) + bn)
        let dpn = DVector::from_fn(n.len(), |i, _| dn[i] * (1.0 - n[i] * n[i]));
        grads.wn += &dpn * input.transpose();
        grads.bn += &dpn;
        let mut gi = self.wn.transpose() * &dpn;
        let dr = dpn.component_mul(un_h);
        let d_un_h = dpn.component_mul(r);
        grads.un += &d_un_h * h_prev.transpose();
        gh_prev += self.un.transpose() * &d_un_h;

        // gates
        let dpz = DVector::from_fn(z.len(), |i, _| dz[i] * z[i] * (1.0 - z[i]));
        grads.wz += &dpz * input.transpose();
        grads.bz += &dpz;
        grads.uz += &dpz * h_prev.transpose();
        gi += self.wz.transpose() * &dpz;
        gh_prev += self.uz.transpose() * &dpz;

        let dpr = DVector::from_fn(r.len(), |i, _| dr[i] * r[i] * (1.0 - r[i]));
        grads.wr += &dpr * input.transpose();
        grads.br += &dpr;
        grads.ur += &dpr * h_prev.transpose();
        gi += self.wr.transpose() * &dpr;
        gh_prev += self.ur.transpose() * &dpr;

        (gh_prev, gi)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for m in [
            &self.wz, &self.uz, &self.wr, &self.ur, &self.wn, &self.un, &self.wo,
        ] {
            v.extend_from_slice(m.as_slice());
        }
        for b in [&self.bz, &self.br, &self.bn, &self.bo] {
            v.extend_from_slice(b.as_slice());
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for m in [
            &mut self.wz,
            &mut self.uz,
            &mut self.wr,
            &mut self.ur,
            &mut self.wn,
            &mut self.un,
            &mut self.wo,
        ] {
            let len = m.len();
            m.as_mut_slice().copy_from_slice(&flat[at..at + len]);
            at += len;
        }
        for b in [&mut self.bz, &mut self.br, &mut self.bn, &mut self.bo] {
            let len = b.len();
            b.as_mut_slice().copy_from_slice(&flat[at..at + len]);
            at += len;
        }
        debug_assert_eq!(at, flat.len());
    }

    pub fn parameter_count(&self) -> usize {
        self.wz.len() * 3 + self.uz.len() * 3 + self.wo.len() + self.bz.len() * 3 + self.bo.len()
    }
}

impl GruGrads {
    pub fn zeros_like(gru: &Gru) -> Self {
        Self {
            wz: DMatrix::zeros(gru.wz.nrows(), gru.wz.ncols()),
            uz: DMatrix::zeros(gru.uz.nrows(), gru.uz.ncols()),
            bz: DVector::zeros(gru.bz.len()),
            wr: DMatrix::zeros(gru.wr.nrows(), gru.wr.ncols()),
            ur: DMatrix::zeros(gru.ur.nrows(), gru.ur.ncols()),
            br: DVector::zeros(gru.br.len()),
            wn: DMatrix::zeros(gru.wn.nrows(), gru.wn.ncols()),
            un: DMatrix::zeros(gru.un.nrows(), gru.un.ncols()),
            bn: DVector::zeros(gru.bn.len()),
            wo: DMatrix::zeros(gru.wo.nrows(), gru.wo.ncols()),
            bo: DVector::zeros(gru.bo.len()),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for m in [
            &self.wz, &self.uz, &self.wr, &self.ur, &self.wn, &self.un, &self.wo,
        ] {
            v.extend_from_slice(m.as_slice());
        }
        for b in [&self.bz, &self.br, &self.bn, &self.bo] {
            v.extend_from_slice(b.as_slice());
        }
        v
    }
}
