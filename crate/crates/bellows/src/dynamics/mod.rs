//! First-principles dynamics of the articulated soft robot.
//!
//! The equation of motion balances actuation torque against gravitational,
//! elastic, inertial, Coriolis, friction, and soft-boundary contact torques:
//!
//! ```text
//! τ(p) = g(q) + s(q) + M(q)q̈ + c(q, q̇) + d(q̇) + b(q, q̇)
//! ```
//!
//! All terms are exposed individually; [`RobotModel::forward_dynamics`] and
//! [`RobotModel::inverse_dynamics`] assemble them. Everything here is a pure
//! function of the model and its arguments, so concurrent callers are fine.

mod scratch;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};

pub use scratch::Scratch;

use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::types::{Domain, Input, State};

/// Joint frames in base coordinates, index 0 being the base frame.
#[derive(Debug, Clone)]
pub struct Frames {
    pub rot: Vec<Matrix3<f64>>,
    pub org: Vec<Vector3<f64>>,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.org.len()
    }

    pub fn is_empty(&self) -> bool {
        self.org.is_empty()
    }

    /// Frame `i` as a homogeneous transform.
    pub fn homogeneous(&self, i: usize) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rot[i]);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.org[i]);
        t
    }
}

/// Time derivative of the state, `[q̇, q̈]`.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub qd: DVector<f64>,
    pub qdd: DVector<f64>,
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

impl RobotModel {
    /// Forward kinematics along the DH chain; returns `n + 1` frames.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Frames> {
        check_len("joint angles", q.len(), self.n)?;
        let mut ws = Scratch::new(self);
        ws.fk(q.as_slice());
        Ok(Frames {
            rot: ws.rot.clone(),
            org: ws.org.clone(),
        })
    }

    /// Gravity torque vector `g(q) = ∂V/∂q`, including the payload.
    pub fn gravity_torques(&self, q: &DVector<f64>, domain: &Domain) -> Result<DVector<f64>> {
        check_len("joint angles", q.len(), self.n)?;
        let mut ws = Scratch::new(self);
        ws.fk(q.as_slice());
        ws.body_props(self, domain);
        let mut out = DVector::zeros(self.n);
        let g = Scratch::gravity_vector(self, domain);
        ws.rnea(None, None, Some(g), out.as_mut_slice());
        Ok(out)
    }

    /// Symmetric positive definite mass matrix `M(q)`, including the payload.
    pub fn mass_matrix(&self, q: &DVector<f64>, domain: &Domain) -> Result<DMatrix<f64>> {
        check_len("joint angles", q.len(), self.n)?;
        let mut ws = Scratch::new(self);
        ws.fk(q.as_slice());
        ws.body_props(self, domain);
        ws.crba();
        Ok(ws.mass_matrix())
    }

    /// Coriolis/centrifugal torque vector `c(q, q̇)`.
    pub fn coriolis_torques(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        domain: &Domain,
    ) -> Result<DVector<f64>> {
        check_len("joint angles", q.len(), self.n)?;
        check_len("joint velocities", qd.len(), self.n)?;
        let mut ws = Scratch::new(self);
        ws.fk(q.as_slice());
        ws.body_props(self, domain);
        let mut out = DVector::zeros(self.n);
        ws.rnea(Some(qd.as_slice()), None, None, out.as_mut_slice());
        Ok(out)
    }

    /// Elastic joint torques `s = k_s ⊙ q`.
    pub fn stiffness_torques(&self, q: &DVector<f64>) -> DVector<f64> {
        self.stiffness.component_mul(q)
    }

    /// Viscous plus Coulomb friction `d = k_v ⊙ q̇ + k_C ⊙ tanh(q̇ π / q̇_C)`.
    pub fn friction_torques(&self, qd: &DVector<f64>) -> DVector<f64> {
        let scale = std::f64::consts::PI / self.coulomb_threshold;
        DVector::from_fn(qd.len(), |i, _| {
            self.viscous[i] * qd[i] + self.coulomb[i] * (qd[i] * scale).tanh()
        })
    }

    /// Soft-boundary contact torques. Zero strictly inside `±q_bt`; outside,
    /// a 3/2-power spring with square-root velocity damping acting on the
    /// penetration depth.
    pub fn contact_torques(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(q.len(), |i, _| {
            let pen = q[i].abs() - self.boundary_threshold;
            if pen > 0.0 {
                let root = pen.sqrt();
                q[i].signum() * pen * root * self.contact_stiffness
                    + root * qd[i] * self.contact_damping
            } else {
                0.0
            }
        })
    }

    /// Actuation torques `τ = A_p r_p Δp` from the antagonistic pressures.
    pub fn actuation_torques(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("bellows pressures", p.len(), 2 * self.n)?;
        let gain = self.pressure_area * self.lever_arm;
        Ok(DVector::from_fn(self.n, |i, _| {
            gain * (p[2 * i] - p[2 * i + 1])
        }))
    }

    /// State-space right-hand side: `q̈ = M(q)⁻¹ (τ(p) − g − s − c − d − b)`.
    pub fn forward_dynamics(
        &self,
        state: &State,
        input: &Input,
        domain: &Domain,
    ) -> Result<StateDerivative> {
        check_len("joint angles", state.q.len(), self.n)?;
        check_len("bellows pressures", input.p_d.len(), 2 * self.n)?;
        let mut ws = Scratch::new(self);
        let x = state.to_vector();
        let mut out = vec![0.0; 2 * self.n];
        self.state_derivative_into(&mut ws, x.as_slice(), input.p_d.as_slice(), domain, &mut out)?;
        Ok(StateDerivative {
            qd: DVector::from_row_slice(&out[..self.n]),
            qdd: DVector::from_row_slice(&out[self.n..]),
        })
    }

    /// Joint torques required for a given motion:
    /// `τ = g + s + M q̈ + c + d + b`.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        domain: &Domain,
    ) -> Result<DVector<f64>> {
        check_len("joint angles", q.len(), self.n)?;
        check_len("joint velocities", qd.len(), self.n)?;
        check_len("joint accelerations", qdd.len(), self.n)?;
        let mut ws = Scratch::new(self);
        ws.fk(q.as_slice());
        ws.body_props(self, domain);
        let mut out = DVector::zeros(self.n);
        let g = Scratch::gravity_vector(self, domain);
        ws.rnea(
            Some(qd.as_slice()),
            Some(qdd.as_slice()),
            Some(g),
            out.as_mut_slice(),
        );
        out += self.stiffness_torques(q) + self.friction_torques(qd) + self.contact_torques(q, qd);
        Ok(out)
    }

    /// Allocation-free state derivative for integrator hot loops.
    ///
    /// `x` is the flat `[q, q̇]` vector, `p` the `2n` bellows pressures, and
    /// `out` receives `[q̇, q̈]`.
    pub fn state_derivative_into(
        &self,
        ws: &mut Scratch,
        x: &[f64],
        p: &[f64],
        domain: &Domain,
        out: &mut [f64],
    ) -> Result<()> {
        let n = self.n;
        debug_assert_eq!(x.len(), 2 * n);
        debug_assert_eq!(p.len(), 2 * n);
        debug_assert_eq!(out.len(), 2 * n);
        let (q, qd) = x.split_at(n);

        ws.fk(q);
        ws.body_props(self, domain);
        // bias = g(q) + c(q, q̇) in one sweep
        let g = Scratch::gravity_vector(self, domain);
        {
            let mut bias = std::mem::take(&mut ws.rhs);
            ws.rnea(Some(qd), None, Some(g), &mut bias);
            ws.rhs = bias;
        }
        ws.crba();

        let gain = self.pressure_area * self.lever_arm;
        let vel_scale = std::f64::consts::PI / self.coulomb_threshold;
        for i in 0..n {
            let tau = gain * (p[2 * i] - p[2 * i + 1]);
            let stiff = self.stiffness[i] * q[i];
            let fric = self.viscous[i] * qd[i] + self.coulomb[i] * (qd[i] * vel_scale).tanh();
            let pen = q[i].abs() - self.boundary_threshold;
            let contact = if pen > 0.0 {
                let root = pen.sqrt();
                q[i].signum() * pen * root * self.contact_stiffness
                    + root * qd[i] * self.contact_damping
            } else {
                0.0
            };
            ws.rhs[i] = tau - ws.rhs[i] - stiff - fric - contact;
        }
        ws.solve_mass()?;
        out[..n].copy_from_slice(qd);
        out[n..].copy_from_slice(&ws.rhs);
        Ok(())
    }

    /// Gravitational potential of the chain and payload (zero datum at the
    /// base origin).
    pub fn potential_energy(&self, q: &DVector<f64>, domain: &Domain) -> Result<f64> {
        check_len("joint angles", q.len(), self.n)?;
        let frames = self.forward_kinematics(q)?;
        let g = Scratch::gravity_vector(self, domain);
        let mut v = 0.0;
        for i in 0..self.n {
            let com = frames.org[i + 1] + frames.rot[i + 1] * self.com[i];
            v -= self.masses[i] * g.dot(&com);
        }
        v -= domain.payload * g.dot(&frames.org[self.n]);
        Ok(v)
    }

    /// Kinetic energy `½ q̇ᵀ M(q) q̇`.
    pub fn kinetic_energy(&self, q: &DVector<f64>, qd: &DVector<f64>, domain: &Domain) -> Result<f64> {
        let m = self.mass_matrix(q, domain)?;
        Ok(0.5 * qd.dot(&(&m * qd)))
    }

    /// Total mechanical energy: kinetic + gravitational + elastic.
    pub fn total_energy(&self, state: &State, domain: &Domain) -> Result<f64> {
        let elastic = 0.5
            * self
                .stiffness
                .iter()
                .zip(state.q.iter())
                .map(|(k, q)| k * q * q)
                .sum::<f64>();
        Ok(self.kinetic_energy(&state.q, &state.qd, domain)?
            + self.potential_energy(&state.q, domain)?
            + elastic)
    }
}
