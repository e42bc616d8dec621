//! The three training losses and their exact parameter gradients.
//!
//! Everything is computed in scaled units. The physics residual compares the
//! model's time derivative per normalized time (over the trained span) with
//! the plant derivative converted by the same factors, which keeps the terms
//! O(1) regardless of physical units.

use nalgebra::DMatrix;

use crate::dynamics::Scratch;
use crate::error::Result;
use crate::model::RobotModel;
use crate::net::ansatz::{ansatz_dt, ansatz_dt_grad_alpha, ansatz_eval, ansatz_grad_alpha};
use crate::net::mlp::Gradients;
use crate::net::scaler::Scaler;
use crate::net::surrogate::{Head, SurrogateModel};

/// Plant dynamics expressed in the scaler's units: `d x_s / d t_norm`.
pub trait ScaledDynamics {
    fn state_dim(&self) -> usize;

    /// Evaluate the scaled derivative. Returns `Ok(false)` when the result is
    /// not finite, in which case the caller drops the row.
    fn deriv(&mut self, x_s: &[f64], u_s: &[f64], d_s: &[f64; 2], out: &mut [f64])
        -> Result<bool>;

    /// `∂ deriv / ∂ x_s`, central differences by default.
    fn jacobian_x(
        &mut self,
        x_s: &[f64],
        u_s: &[f64],
        d_s: &[f64; 2],
        out: &mut DMatrix<f64>,
    ) -> Result<bool> {
        let dim = self.state_dim();
        let h = 1e-5;
        let mut xp = x_s.to_vec();
        let mut fp = vec![0.0; dim];
        let mut fm = vec![0.0; dim];
        for k in 0..dim {
            xp[k] = x_s[k] + h;
            if !self.deriv(&xp, u_s, d_s, &mut fp)? {
                return Ok(false);
            }
            xp[k] = x_s[k] - h;
            if !self.deriv(&xp, u_s, d_s, &mut fm)? {
                return Ok(false);
            }
            xp[k] = x_s[k];
            for r in 0..dim {
                out[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(true)
    }
}

/// The robot model seen through a scaler.
pub struct FpScaled<'a> {
    pub model: &'a RobotModel,
    pub scaler: Scaler,
    ws: Scratch,
    x_phys: Vec<f64>,
    u_phys: Vec<f64>,
    dx_phys: Vec<f64>,
}

impl<'a> FpScaled<'a> {
    pub fn new(model: &'a RobotModel, scaler: Scaler) -> Self {
        let n = model.n;
        Self {
            model,
            scaler,
            ws: Scratch::new(model),
            x_phys: vec![0.0; 2 * n],
            u_phys: vec![0.0; 2 * n],
            dx_phys: vec![0.0; 2 * n],
        }
    }
}

impl ScaledDynamics for FpScaled<'_> {
    fn state_dim(&self) -> usize {
        2 * self.model.n
    }

    fn deriv(
        &mut self,
        x_s: &[f64],
        u_s: &[f64],
        d_s: &[f64; 2],
        out: &mut [f64],
    ) -> Result<bool> {
        self.scaler.unscale_state_slice(x_s, &mut self.x_phys);
        self.scaler.unscale_input_slice(u_s, &mut self.u_phys);
        let domain = self.scaler.unscale_domain(d_s);
        let span = self.scaler.time_span();
        let ok = self
            .model
            .state_derivative_into(&mut self.ws, &self.x_phys, &self.u_phys, &domain, &mut self.dx_phys)
            .is_ok();
        if !ok {
            return Ok(false);
        }
        let mut finite = true;
        for i in 0..out.len() {
            out[i] = span * self.scaler.state_factor(i) * self.dx_phys[i];
            finite &= out[i].is_finite();
        }
        Ok(finite)
    }
}

/// Value of one loss term plus exclusion bookkeeping.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossTerm {
    pub value: f64,
    pub rows: usize,
    pub excluded: usize,
}

/// Physics residual MSE over collocation columns (channel layout
/// `[t, x0, u0, δ]`), forward only.
pub fn physics_loss(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    fp: &mut dyn ScaledDynamics,
) -> Result<LossTerm> {
    physics_loss_impl(model, pts, fp, None).map(|(t, _)| t)
}

/// Physics residual MSE and its parameter gradient scaled by `weight`.
pub fn physics_loss_grad(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    fp: &mut dyn ScaledDynamics,
    weight: f64,
) -> Result<(LossTerm, Gradients)> {
    physics_loss_impl(model, pts, fp, Some(weight)).map(|(t, g)| (t, g.unwrap()))
}

fn physics_loss_impl(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    fp: &mut dyn ScaledDynamics,
    weight: Option<f64>,
) -> Result<(LossTerm, Option<Gradients>)> {
    let n2 = 2 * model.n;
    let batch = pts.ncols();
    debug_assert_eq!(pts.nrows(), 4 * model.n + 3);

    // residual pieces shared by both heads
    let mut excluded = 0usize;
    let mut kept = Vec::with_capacity(batch);
    let mut target = vec![0.0; n2];
    let mut jac = DMatrix::zeros(n2, n2);

    match model.head {
        Head::DdPinn { n_a } => {
            let input = pts.rows(1, 4 * model.n + 2).into_owned();
            let (alpha, cache) = model.core.forward(&input)?;
            let mut residuals = DMatrix::zeros(n2, batch);
            let mut xhat = vec![0.0; n2];
            let mut adt = vec![0.0; n2];
            for b in 0..batch {
                let t_n = (pts[(0, b)] + 1.0) / 2.0;
                let a_col = alpha.column(b);
                let x0: Vec<f64> = (0..n2).map(|i| pts[(1 + i, b)]).collect();
                let u: Vec<f64> = (0..n2).map(|i| pts[(1 + n2 + i, b)]).collect();
                let d = [pts[(1 + 2 * n2, b)], pts[(2 + 2 * n2, b)]];
                ansatz_eval(a_col.as_slice(), n_a, n2, t_n, &mut xhat);
                for i in 0..n2 {
                    xhat[i] += x0[i];
                }
                if !fp.deriv(&xhat, &u, &d, &mut target)? {
                    excluded += 1;
                    continue;
                }
                ansatz_dt(a_col.as_slice(), n_a, n2, t_n, &mut adt);
                for i in 0..n2 {
                    residuals[(i, b)] = adt[i] - target[i];
                }
                kept.push(b);
            }
            let denom = (kept.len() * n2).max(1) as f64;
            let value = kept
                .iter()
                .map(|&b| residuals.column(b).norm_squared())
                .sum::<f64>()
                / denom;
            let term = LossTerm {
                value,
                rows: batch,
                excluded,
            };
            let Some(w) = weight else {
                return Ok((term, None));
            };
            // cotangents through ȧ and through x̂ into the plant Jacobian
            let mut alpha_bar = DMatrix::zeros(alpha.nrows(), batch);
            let mut cot = vec![0.0; n2];
            let mut cot_x = vec![0.0; n2];
            for &b in &kept {
                let t_n = (pts[(0, b)] + 1.0) / 2.0;
                let a_col = alpha.column(b);
                let x0: Vec<f64> = (0..n2).map(|i| pts[(1 + i, b)]).collect();
                let u: Vec<f64> = (0..n2).map(|i| pts[(1 + n2 + i, b)]).collect();
                let d = [pts[(1 + 2 * n2, b)], pts[(2 + 2 * n2, b)]];
                ansatz_eval(a_col.as_slice(), n_a, n2, t_n, &mut xhat);
                for i in 0..n2 {
                    xhat[i] += x0[i];
                    cot[i] = 2.0 * w * residuals[(i, b)] / denom;
                }
                if !fp.jacobian_x(&xhat, &u, &d, &mut jac)? {
                    continue;
                }
                // ∂L/∂x̂ = -Jᵀ (2 r / N)
                for k in 0..n2 {
                    let mut acc = 0.0;
                    for r in 0..n2 {
                        acc -= jac[(r, k)] * cot[r];
                    }
                    cot_x[k] = acc;
                }
                let mut grad_col = vec![0.0; alpha.nrows()];
                ansatz_dt_grad_alpha(a_col.as_slice(), n_a, n2, t_n, &cot, &mut grad_col);
                ansatz_grad_alpha(a_col.as_slice(), n_a, n2, t_n, &cot_x, &mut grad_col);
                for (i, g) in grad_col.iter().enumerate() {
                    alpha_bar[(i, b)] = *g;
                }
            }
            let (grads, _) = model.core.backward(&cache, &alpha_bar);
            Ok((term, Some(grads)))
        }
        Head::Pinc => {
            let input = pts.clone();
            let mut dir = DMatrix::zeros(input.nrows(), batch);
            for b in 0..batch {
                dir[(0, b)] = 1.0;
            }
            let (y, v, cache) = model.core.forward_with_tangent(&input, &dir)?;
            let mut residuals = DMatrix::zeros(n2, batch);
            for b in 0..batch {
                let u: Vec<f64> = (0..n2).map(|i| pts[(1 + n2 + i, b)]).collect();
                let d = [pts[(1 + 2 * n2, b)], pts[(2 + 2 * n2, b)]];
                let xhat: Vec<f64> = (0..n2).map(|i| y[(i, b)]).collect();
                if !fp.deriv(&xhat, &u, &d, &mut target)? {
                    excluded += 1;
                    continue;
                }
                for i in 0..n2 {
                    // d t_scaled / d t_norm = 2
                    residuals[(i, b)] = 2.0 * v[(i, b)] - target[i];
                }
                kept.push(b);
            }
            let denom = (kept.len() * n2).max(1) as f64;
            let value = kept
                .iter()
                .map(|&b| residuals.column(b).norm_squared())
                .sum::<f64>()
                / denom;
            let term = LossTerm {
                value,
                rows: batch,
                excluded,
            };
            let Some(w) = weight else {
                return Ok((term, None));
            };
            let mut grad_y = DMatrix::zeros(n2, batch);
            let mut grad_v = DMatrix::zeros(n2, batch);
            for &b in &kept {
                let u: Vec<f64> = (0..n2).map(|i| pts[(1 + n2 + i, b)]).collect();
                let d = [pts[(1 + 2 * n2, b)], pts[(2 + 2 * n2, b)]];
                let xhat: Vec<f64> = (0..n2).map(|i| y[(i, b)]).collect();
                if !fp.jacobian_x(&xhat, &u, &d, &mut jac)? {
                    continue;
                }
                for k in 0..n2 {
                    let mut acc = 0.0;
                    for r in 0..n2 {
                        acc -= jac[(r, k)] * 2.0 * w * residuals[(r, b)] / denom;
                    }
                    grad_y[(k, b)] = acc;
                }
                for i in 0..n2 {
                    grad_v[(i, b)] = 4.0 * w * residuals[(i, b)] / denom;
                }
            }
            let (grads, _) = model.core.backward_with_tangent(&cache, &grad_y, &grad_v);
            Ok((term, Some(grads)))
        }
    }
}

/// Initial-condition loss on points with the time channel forced to zero.
/// Structurally zero for the ansatz head.
pub fn ic_loss(model: &SurrogateModel, pts: &DMatrix<f64>) -> Result<LossTerm> {
    ic_loss_impl(model, pts, None).map(|(t, _)| t)
}

pub fn ic_loss_grad(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    weight: f64,
) -> Result<(LossTerm, Option<Gradients>)> {
    ic_loss_impl(model, pts, Some(weight))
}

fn ic_loss_impl(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    weight: Option<f64>,
) -> Result<(LossTerm, Option<Gradients>)> {
    let n2 = 2 * model.n;
    let batch = pts.ncols();
    if model.head.is_structural_ic() {
        return Ok((
            LossTerm {
                value: 0.0,
                rows: batch,
                excluded: 0,
            },
            None,
        ));
    }
    let mut input = pts.clone();
    for b in 0..batch {
        input[(0, b)] = model.scaler.scale_time(0.0);
    }
    let (y, cache) = model.core.forward(&input)?;
    let denom = (batch * n2) as f64;
    let mut diff = DMatrix::zeros(n2, batch);
    for b in 0..batch {
        for i in 0..n2 {
            diff[(i, b)] = y[(i, b)] - pts[(1 + i, b)];
        }
    }
    let value = diff.norm_squared() / denom;
    let term = LossTerm {
        value,
        rows: batch,
        excluded: 0,
    };
    match weight {
        None => Ok((term, None)),
        Some(w) => {
            let grad_out = diff * (2.0 * w / denom);
            let (grads, _) = model.core.backward(&cache, &grad_out);
            Ok((term, Some(grads)))
        }
    }
}

/// One-step measurement loss on `(x0, u0, δ, x(T_s))` tuples, all scaled.
/// `x0_u_d` uses the collocation channel layout with the time row ignored;
/// `targets` holds the scaled measured next states as columns.
pub fn data_loss(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> Result<LossTerm> {
    data_loss_impl(model, pts, targets, None).map(|(t, _)| t)
}

pub fn data_loss_grad(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    weight: f64,
) -> Result<(LossTerm, Gradients)> {
    data_loss_impl(model, pts, targets, Some(weight)).map(|(t, g)| (t, g.unwrap()))
}

fn data_loss_impl(
    model: &SurrogateModel,
    pts: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    weight: Option<f64>,
) -> Result<(LossTerm, Option<Gradients>)> {
    let n2 = 2 * model.n;
    let batch = pts.ncols();
    let denom = (batch * n2) as f64;
    match model.head {
        Head::DdPinn { n_a } => {
            let input = pts.rows(1, 4 * model.n + 2).into_owned();
            let (alpha, cache) = model.core.forward(&input)?;
            let t_n = model.time_norm(model.t_s);
            let mut add = vec![0.0; n2];
            let mut diff = DMatrix::zeros(n2, batch);
            for b in 0..batch {
                ansatz_eval(alpha.column(b).as_slice(), n_a, n2, t_n, &mut add);
                for i in 0..n2 {
                    diff[(i, b)] = pts[(1 + i, b)] + add[i] - targets[(i, b)];
                }
            }
            let value = diff.norm_squared() / denom;
            let term = LossTerm {
                value,
                rows: batch,
                excluded: 0,
            };
            let Some(w) = weight else {
                return Ok((term, None));
            };
            let mut alpha_bar = DMatrix::zeros(alpha.nrows(), batch);
            let mut cot = vec![0.0; n2];
            for b in 0..batch {
                for i in 0..n2 {
                    cot[i] = 2.0 * w * diff[(i, b)] / denom;
                }
                let mut grad_col = vec![0.0; alpha.nrows()];
                ansatz_grad_alpha(alpha.column(b).as_slice(), n_a, n2, t_n, &cot, &mut grad_col);
                for (i, g) in grad_col.iter().enumerate() {
                    alpha_bar[(i, b)] = *g;
                }
            }
            let (grads, _) = model.core.backward(&cache, &alpha_bar);
            Ok((term, Some(grads)))
        }
        Head::Pinc => {
            let mut input = pts.clone();
            for b in 0..batch {
                input[(0, b)] = model.scaler.scale_time(model.t_s);
            }
            let (y, cache) = model.core.forward(&input)?;
            let diff = &y - targets;
            let value = diff.norm_squared() / denom;
            let term = LossTerm {
                value,
                rows: batch,
                excluded: 0,
            };
            let Some(w) = weight else {
                return Ok((term, None));
            };
            let grad_out = diff * (2.0 * w / denom);
            let (grads, _) = model.core.backward(&cache, &grad_out);
            Ok((term, Some(grads)))
        }
    }
}

/// Loss-weight recalibration after the first epoch:
/// `η_j = max(L̄) / L̄_j`, with zero weights for vanished terms and the
/// initial-condition slot pinned for structural-IC heads.
pub fn calibrate_weights(mean_losses: &[f64; 3], structural_ic: bool) -> [f64; 3] {
    let max = mean_losses.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return [1.0, 1.0, 1.0];
    }
    let inv = |l: f64| if l > 0.0 { max / l } else { 0.0 };
    let eta0 = if structural_ic { max } else { inv(mean_losses[2]) };
    [inv(mean_losses[0]), inv(mean_losses[1]), eta0]
}
