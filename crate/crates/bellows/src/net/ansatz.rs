//! Damped-harmonic ansatz head.
//!
//! Each output channel is a superposition of `n_a` damped oscillations
//!
//! ```text
//! a_k(α, t) = Σ_i α1_ik · (exp(-α4_ik t) · sin(α2_ik t + α3_ik) - sin(α3_ik))
//! ```
//!
//! The subtraction makes `a(α, 0) ≡ 0` hold exactly, so a prediction built as
//! `x0 + a(α, t)` satisfies its initial condition structurally, and the time
//! derivative is available in closed form instead of through automatic
//! differentiation.
//!
//! The coefficient vector is laid out as `[α1, α2, α3, α4]`, each block
//! holding `n_a` sub-vectors of the channel dimension.

/// Index of coefficient `α_{j,term,channel}` (j is 0-based here).
#[inline]
pub fn alpha_index(j: usize, term: usize, channel: usize, n_a: usize, dim: usize) -> usize {
    (j * n_a + term) * dim + channel
}

/// Evaluate `a(α, t)` into `out` (length `dim`).
pub fn ansatz_eval(alpha: &[f64], n_a: usize, dim: usize, t: f64, out: &mut [f64]) {
    debug_assert_eq!(alpha.len(), 4 * n_a * dim);
    out.fill(0.0);
    for term in 0..n_a {
        let base1 = term * dim;
        let base2 = (n_a + term) * dim;
        let base3 = (2 * n_a + term) * dim;
        let base4 = (3 * n_a + term) * dim;
        for k in 0..dim {
            let a1 = alpha[base1 + k];
            let a2 = alpha[base2 + k];
            let a3 = alpha[base3 + k];
            let a4 = alpha[base4 + k];
            out[k] += a1 * ((-a4 * t).exp() * (a2 * t + a3).sin() - a3.sin());
        }
    }
}

/// Evaluate the exact time derivative `ȧ(α, t)` into `out`.
pub fn ansatz_dt(alpha: &[f64], n_a: usize, dim: usize, t: f64, out: &mut [f64]) {
    debug_assert_eq!(alpha.len(), 4 * n_a * dim);
    out.fill(0.0);
    for term in 0..n_a {
        let base1 = term * dim;
        let base2 = (n_a + term) * dim;
        let base3 = (2 * n_a + term) * dim;
        let base4 = (3 * n_a + term) * dim;
        for k in 0..dim {
            let a1 = alpha[base1 + k];
            let a2 = alpha[base2 + k];
            let a3 = alpha[base3 + k];
            let a4 = alpha[base4 + k];
            let (s, c) = (a2 * t + a3).sin_cos();
            out[k] += a1 * (-a4 * t).exp() * (-a4 * s + a2 * c);
        }
    }
}

/// Accumulate `∂(cotanᵀ a)/∂α` into `grad` (both length `4·n_a·dim`).
pub fn ansatz_grad_alpha(
    alpha: &[f64],
    n_a: usize,
    dim: usize,
    t: f64,
    cotan: &[f64],
    grad: &mut [f64],
) {
    for term in 0..n_a {
        let base1 = term * dim;
        let base2 = (n_a + term) * dim;
        let base3 = (2 * n_a + term) * dim;
        let base4 = (3 * n_a + term) * dim;
        for k in 0..dim {
            let a1 = alpha[base1 + k];
            let a2 = alpha[base2 + k];
            let a3 = alpha[base3 + k];
            let a4 = alpha[base4 + k];
            let e = (-a4 * t).exp();
            let (s, c) = (a2 * t + a3).sin_cos();
            let w = cotan[k];
            grad[base1 + k] += w * (e * s - a3.sin());
            grad[base2 + k] += w * a1 * e * t * c;
            grad[base3 + k] += w * a1 * (e * c - a3.cos());
            grad[base4 + k] += w * (-a1 * t * e * s);
        }
    }
}

/// Accumulate `∂(cotanᵀ ȧ)/∂α` into `grad`.
pub fn ansatz_dt_grad_alpha(
    alpha: &[f64],
    n_a: usize,
    dim: usize,
    t: f64,
    cotan: &[f64],
    grad: &mut [f64],
) {
    for term in 0..n_a {
        let base1 = term * dim;
        let base2 = (n_a + term) * dim;
        let base3 = (2 * n_a + term) * dim;
        let base4 = (3 * n_a + term) * dim;
        for k in 0..dim {
            let a1 = alpha[base1 + k];
            let a2 = alpha[base2 + k];
            let a3 = alpha[base3 + k];
            let a4 = alpha[base4 + k];
            let e = (-a4 * t).exp();
            let (s, c) = (a2 * t + a3).sin_cos();
            let w = cotan[k];
            grad[base1 + k] += w * e * (-a4 * s + a2 * c);
            grad[base2 + k] += w * a1 * e * (c - t * (a4 * c + a2 * s));
            grad[base3 + k] += w * a1 * e * (-a4 * c - a2 * s);
            grad[base4 + k] += w * a1 * e * (t * (a4 * s - a2 * c) - s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn rand_alpha(rng: &mut StdRng, n_a: usize, dim: usize) -> Vec<f64> {
        (0..4 * n_a * dim).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    /// Literal scalar transcription of the printed double sum.
    fn naive_eval(alpha: &[f64], n_a: usize, dim: usize, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for k in 0..dim {
            for i in 0..n_a {
                let a1 = alpha[alpha_index(0, i, k, n_a, dim)];
                let a2 = alpha[alpha_index(1, i, k, n_a, dim)];
                let a3 = alpha[alpha_index(2, i, k, n_a, dim)];
                let a4 = alpha[alpha_index(3, i, k, n_a, dim)];
                out[k] += a1 * ((-a4 * t).exp() * (a2 * t + a3).sin() - a3.sin());
            }
        }
        out
    }

    #[test]
    fn zero_at_t_zero_for_any_alpha() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let alpha = rand_alpha(&mut rng, 7, 4);
            let mut out = vec![1.0; 4];
            ansatz_eval(&alpha, 7, 4, 0.0, &mut out);
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_undamped_term_is_plain_sine() {
        // n_a = 1, α1 = 1, α2 = 1, α3 = 0, α4 = 0  →  a(t) = sin(t)
        let alpha = vec![1.0, 1.0, 0.0, 0.0];
        let mut out = vec![0.0];
        for t in [0.0, 0.3, 1.0, 2.5] {
            ansatz_eval(&alpha, 1, 1, t, &mut out);
            assert!((out[0] - t.sin()).abs() < 1e-15);
            ansatz_dt(&alpha, 1, 1, t, &mut out);
            assert!((out[0] - t.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_loop_oracle() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..20 {
            let (n_a, dim) = (rng.random_range(1..6), rng.random_range(1..5));
            let alpha = rand_alpha(&mut rng, n_a, dim);
            let t = rng.random_range(0.0..1.5);
            let mut out = vec![0.0; dim];
            ansatz_eval(&alpha, n_a, dim, t, &mut out);
            let oracle = naive_eval(&alpha, n_a, dim, t);
            for k in 0..dim {
                assert!((out[k] - oracle[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn dt_matches_finite_difference() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let (n_a, dim) = (4, 3);
            let alpha = rand_alpha(&mut rng, n_a, dim);
            let t = rng.random_range(0.05..1.0);
            let h = 1e-6;
            let mut dplus = vec![0.0; dim];
            let mut dminus = vec![0.0; dim];
            ansatz_eval(&alpha, n_a, dim, t + h, &mut dplus);
            ansatz_eval(&alpha, n_a, dim, t - h, &mut dminus);
            let mut dt = vec![0.0; dim];
            ansatz_dt(&alpha, n_a, dim, t, &mut dt);
            for k in 0..dim {
                let fd = (dplus[k] - dminus[k]) / (2.0 * h);
                let denom = dt[k].abs().max(fd.abs()).max(1e-6);
                assert!(
                    (dt[k] - fd).abs() / denom < 1e-7,
                    "channel {k}: {} vs {}",
                    dt[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn zero_amplitude_zeroes_the_derivative() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut alpha = rand_alpha(&mut rng, 3, 2);
        for term in 0..3 {
            for k in 0..2 {
                alpha[alpha_index(0, term, k, 3, 2)] = 0.0;
            }
        }
        let mut out = vec![0.0; 2];
        ansatz_dt(&alpha, 3, 2, 0.7, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_gradients_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(5);
        let (n_a, dim) = (3, 2);
        for _ in 0..20 {
            let alpha = rand_alpha(&mut rng, n_a, dim);
            let t = rng.random_range(0.05..1.0);
            let cotan: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut grad = vec![0.0; alpha.len()];
            ansatz_grad_alpha(&alpha, n_a, dim, t, &cotan, &mut grad);
            let mut grad_dt = vec![0.0; alpha.len()];
            ansatz_dt_grad_alpha(&alpha, n_a, dim, t, &cotan, &mut grad_dt);

            let h = 1e-6;
            for idx in 0..alpha.len() {
                let mut ap = alpha.clone();
                let mut am = alpha.clone();
                ap[idx] += h;
                am[idx] -= h;
                let mut op = vec![0.0; dim];
                let mut om = vec![0.0; dim];
                ansatz_eval(&ap, n_a, dim, t, &mut op);
                ansatz_eval(&am, n_a, dim, t, &mut om);
                let fd: f64 = (0..dim).map(|k| cotan[k] * (op[k] - om[k])).sum::<f64>() / (2.0 * h);
                // the floor absorbs FD rounding noise on near-zero entries
                let denom = grad[idx].abs().max(fd.abs()).max(1e-3);
                assert!((grad[idx] - fd).abs() / denom < 1e-6);

                ansatz_dt(&ap, n_a, dim, t, &mut op);
                ansatz_dt(&am, n_a, dim, t, &mut om);
                let fd: f64 = (0..dim).map(|k| cotan[k] * (op[k] - om[k])).sum::<f64>() / (2.0 * h);
                let denom = grad_dt[idx].abs().max(fd.abs()).max(1e-3);
                assert!((grad_dt[idx] - fd).abs() / denom < 1e-6);
            }
        }
    }
}
