//! Preallocated workspace for the dynamics hot path.
//!
//! One rollout evaluates the state derivative hundreds of millions of times,
//! so the recursions below run on fixed buffers without heap traffic. A
//! [`Scratch`] caches the constant part of the DH table; build a fresh one if
//! the model geometry changes.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::RobotModel;
use crate::types::Domain;

pub struct Scratch {
    pub(crate) n: usize,
    // DH constants
    sa: Vec<f64>,
    ca: Vec<f64>,
    a: Vec<f64>,
    d: Vec<f64>,
    th: Vec<f64>,
    // forward kinematics in base coordinates (index 0 = base frame)
    pub(crate) rot: Vec<Matrix3<f64>>,
    pub(crate) org: Vec<Vector3<f64>>,
    pub(crate) axis: Vec<Vector3<f64>>,
    // effective body properties with the payload folded into the last segment
    meff: Vec<f64>,
    comw: Vec<Vector3<f64>>,
    jw: Vec<Matrix3<f64>>,
    // Newton-Euler buffers
    omega: Vec<Vector3<f64>>,
    domega: Vec<Vector3<f64>>,
    acc: Vec<Vector3<f64>>,
    // composite-body buffers
    cm: Vec<f64>,
    cx: Vec<Vector3<f64>>,
    cj: Vec<Matrix3<f64>>,
    // linear algebra (flat row-major n×n buffers; the hot path avoids
    // bounds-checked matrix indexing)
    pub(crate) mass: Vec<f64>,
    chol: Vec<f64>,
    pub(crate) rhs: Vec<f64>,
}

#[inline]
fn skew_shift(m: f64, d: Vector3<f64>) -> Matrix3<f64> {
    // parallel-axis term m (|d|^2 I - d d^T)
    let dd = d.norm_squared();
    Matrix3::new(
        m * (dd - d.x * d.x),
        -m * d.x * d.y,
        -m * d.x * d.z,
        -m * d.y * d.x,
        m * (dd - d.y * d.y),
        -m * d.y * d.z,
        -m * d.z * d.x,
        -m * d.z * d.y,
        m * (dd - d.z * d.z),
    )
}

impl Scratch {
    pub fn new(model: &RobotModel) -> Self {
        let n = model.n;
        Self {
            n,
            sa: model.dh.iter().map(|r| r.alpha.sin()).collect(),
            ca: model.dh.iter().map(|r| r.alpha.cos()).collect(),
            a: model.dh.iter().map(|r| r.a).collect(),
            d: model.dh.iter().map(|r| r.d).collect(),
            th: model.dh.iter().map(|r| r.theta).collect(),
            rot: vec![Matrix3::identity(); n + 1],
            org: vec![Vector3::zeros(); n + 1],
            axis: vec![Vector3::zeros(); n],
            meff: vec![0.0; n],
            comw: vec![Vector3::zeros(); n],
            jw: vec![Matrix3::zeros(); n],
            omega: vec![Vector3::zeros(); n + 1],
            domega: vec![Vector3::zeros(); n + 1],
            acc: vec![Vector3::zeros(); n + 1],
            cm: vec![0.0; n],
            cx: vec![Vector3::zeros(); n],
            cj: vec![Matrix3::zeros(); n],
            mass: vec![0.0; n * n],
            chol: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }

    /// Gravity acceleration vector in base coordinates: `-g0 x̂` tilted about
    /// the base y-axis, so a straight chain at `q = 0` feels no joint torque.
    pub(crate) fn gravity_vector(model: &RobotModel, domain: &Domain) -> Vector3<f64> {
        let (sb, cb) = domain.tilt.sin_cos();
        Vector3::new(-model.gravity * cb, 0.0, model.gravity * sb)
    }

    /// Forward kinematics into the workspace buffers.
    pub(crate) fn fk(&mut self, q: &[f64]) {
        debug_assert_eq!(q.len(), self.n);
        self.rot[0] = Matrix3::identity();
        self.org[0] = Vector3::zeros();
        for i in 0..self.n {
            let (s, c) = (self.th[i] + q[i]).sin_cos();
            let (sa, ca) = (self.sa[i], self.ca[i]);
            let step = Matrix3::new(
                c,
                -s * ca,
                s * sa,
                s,
                c * ca,
                -c * sa,
                0.0,
                sa,
                ca,
            );
            let p_step = Vector3::new(self.a[i] * c, self.a[i] * s, self.d[i]);
            self.axis[i] = self.rot[i].column(2).into_owned();
            self.rot[i + 1] = self.rot[i] * step;
            self.org[i + 1] = self.org[i] + self.rot[i] * p_step;
        }
    }

    /// World-frame mass, COM, and COM inertia per segment, with the payload
    /// attached to the distal end of the last segment. Call after [`Self::fk`].
    pub(crate) fn body_props(&mut self, model: &RobotModel, domain: &Domain) {
        let n = self.n;
        for i in 0..n {
            let rot = &self.rot[i + 1];
            self.meff[i] = model.masses[i];
            self.comw[i] = self.org[i + 1] + rot * model.com[i];
            self.jw[i] = rot * model.inertia[i] * rot.transpose();
        }
        let me = domain.payload;
        if me > 0.0 {
            let tip = self.org[n];
            let m0 = self.meff[n - 1];
            let m1 = m0 + me;
            let com = (self.comw[n - 1] * m0 + tip * me) / m1;
            self.jw[n - 1] += skew_shift(m0, self.comw[n - 1] - com) + skew_shift(me, tip - com);
            self.meff[n - 1] = m1;
            self.comw[n - 1] = com;
        }
    }

    /// Recursive Newton-Euler: joint torques `M(q)q̈ + c(q, q̇) [+ g(q)]`.
    ///
    /// Pass `qd = None` or `qdd = None` for zero vectors and
    /// `gravity = None` to drop the gravitational contribution.
    pub(crate) fn rnea(
        &mut self,
        qd: Option<&[f64]>,
        qdd: Option<&[f64]>,
        gravity: Option<Vector3<f64>>,
        out: &mut [f64],
    ) {
        let n = self.n;
        self.omega[0] = Vector3::zeros();
        self.domega[0] = Vector3::zeros();
        self.acc[0] = -gravity.unwrap_or_else(Vector3::zeros);

        for i in 0..n {
            let zi = self.axis[i];
            let qdi = qd.map_or(0.0, |v| v[i]);
            let qddi = qdd.map_or(0.0, |v| v[i]);
            self.omega[i + 1] = self.omega[i] + zi * qdi;
            self.domega[i + 1] = self.domega[i] + zi * qddi + self.omega[i].cross(&(zi * qdi));
            let r = self.org[i + 1] - self.org[i];
            self.acc[i + 1] = self.acc[i]
                + self.domega[i + 1].cross(&r)
                + self.omega[i + 1].cross(&self.omega[i + 1].cross(&r));
        }

        // backward sweep: subtree force and moment about each joint origin
        let mut f_child = Vector3::zeros();
        let mut g_child = Vector3::zeros();
        for i in (0..n).rev() {
            let w = self.omega[i + 1];
            let dw = self.domega[i + 1];
            let rc = self.comw[i] - self.org[i + 1];
            let a_com =
                self.acc[i + 1] + dw.cross(&rc) + w.cross(&w.cross(&rc));
            let force = a_com * self.meff[i];
            let moment = self.jw[i] * dw + w.cross(&(self.jw[i] * w));
            let g_here = moment
                + (self.comw[i] - self.org[i]).cross(&force)
                + g_child
                + (self.org[i + 1] - self.org[i]).cross(&f_child);
            f_child += force;
            g_child = g_here;
            out[i] = self.axis[i].dot(&g_here);
        }
    }

    /// Composite-rigid-body mass matrix into `self.mass`. Call after
    /// [`Self::fk`] and [`Self::body_props`].
    pub(crate) fn crba(&mut self) {
        let n = self.n;
        self.cm[n - 1] = self.meff[n - 1];
        self.cx[n - 1] = self.comw[n - 1];
        self.cj[n - 1] = self.jw[n - 1];
        for i in (0..n - 1).rev() {
            let m_sub = self.cm[i + 1];
            let m = self.meff[i] + m_sub;
            let x = (self.comw[i] * self.meff[i] + self.cx[i + 1] * m_sub) / m;
            self.cj[i] = self.jw[i]
                + skew_shift(self.meff[i], self.comw[i] - x)
                + self.cj[i + 1]
                + skew_shift(m_sub, self.cx[i + 1] - x);
            self.cm[i] = m;
            self.cx[i] = x;
        }
        for k in (0..n).rev() {
            let zk = self.axis[k];
            let ok = self.org[k];
            let r = self.cx[k] - ok;
            let a_com = zk.cross(&r);
            let force = a_com * self.cm[k];
            let n_ok = self.cj[k] * zk + r.cross(&a_com) * self.cm[k];
            self.mass[k * n + k] = zk.dot(&n_ok);
            for j in 0..k {
                let m_jk = self.axis[j].dot(&(n_ok + (ok - self.org[j]).cross(&force)));
                self.mass[j * n + k] = m_jk;
                self.mass[k * n + j] = m_jk;
            }
        }
    }

    /// The mass matrix as a proper matrix (convenience path).
    pub(crate) fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| self.mass[r * self.n + c])
    }

    /// In-place Cholesky solve of `mass · x = rhs`, overwriting `self.rhs`.
    pub(crate) fn solve_mass(&mut self) -> Result<()> {
        let n = self.n;
        debug_assert_eq!(self.mass.len(), n * n);
        self.chol.copy_from_slice(&self.mass);
        // SAFETY: all indices below are < n*n (or < n for rhs) by the loop
        // bounds; the buffers are sized in `new`.
        unsafe {
            let c = self.chol.as_mut_ptr();
            let rhs = self.rhs.as_mut_ptr();
            for j in 0..n {
                let mut diag = *c.add(j * n + j);
                for k in 0..j {
                    let v = *c.add(j * n + k);
                    diag -= v * v;
                }
                if !(diag > 0.0) {
                    return Err(Error::SingularMassMatrix);
                }
                let diag = diag.sqrt();
                *c.add(j * n + j) = diag;
                let inv = 1.0 / diag;
                for i in j + 1..n {
                    let mut v = *c.add(i * n + j);
                    for k in 0..j {
                        v -= *c.add(i * n + k) * *c.add(j * n + k);
                    }
                    *c.add(i * n + j) = v * inv;
                }
            }
            for i in 0..n {
                let mut v = *rhs.add(i);
                for k in 0..i {
                    v -= *c.add(i * n + k) * *rhs.add(k);
                }
                *rhs.add(i) = v / *c.add(i * n + i);
            }
            for i in (0..n).rev() {
                let mut v = *rhs.add(i);
                for k in i + 1..n {
                    v -= *c.add(k * n + i) * *rhs.add(k);
                }
                *rhs.add(i) = v / *c.add(i * n + i);
            }
        }
        Ok(())
    }
}
