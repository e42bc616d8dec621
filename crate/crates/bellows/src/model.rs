//! Kinematic, inertial, and identified parameters of the robot.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEG: f64 = std::f64::consts::PI / 180.0;

/// One Denavit-Hartenberg row (standard convention, radians).
///
/// The transform from frame `i-1` to frame `i` is
/// `Rz(theta + q_i) · Tz(d) · Tx(a) · Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta: f64,
}

/// Everything the first-principles model needs: geometry, inertia, and the
/// identified joint parameters. Angles and angle-derived units are SI
/// (radians) throughout; file I/O converts from the degree-based convention.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    /// Joint count.
    pub n: usize,
    /// Actuator height (link length along the chain), m.
    pub actuator_height: f64,
    /// DH table with exactly `n` rows.
    pub dh: Vec<DhRow>,
    /// Per-segment mass, kg.
    pub masses: Vec<f64>,
    /// Per-segment center of mass, expressed in the segment frame, m.
    pub com: Vec<Vector3<f64>>,
    /// Per-segment inertia tensor about the COM, segment frame, kg·m².
    pub inertia: Vec<Matrix3<f64>>,
    /// Bellows pressure area, m².
    pub pressure_area: f64,
    /// Actuation lever arm, m.
    pub lever_arm: f64,
    /// Joint stiffness k_s, N·m/rad.
    pub stiffness: DVector<f64>,
    /// Viscous friction k_v, N·m·s/rad.
    pub viscous: DVector<f64>,
    /// Coulomb friction k_C, N·m.
    pub coulomb: DVector<f64>,
    /// Soft-boundary contact stiffness k_bs, N·m/rad^(3/2).
    pub contact_stiffness: f64,
    /// Soft-boundary contact damping k_bd, N·m·s/rad^(3/2).
    pub contact_damping: f64,
    /// Coulomb velocity threshold q̇_C, rad/s.
    pub coulomb_threshold: f64,
    /// Soft-boundary position threshold q_bt, rad.
    pub boundary_threshold: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl RobotModel {
    /// The five-joint chain with the default identified parameters.
    ///
    /// Geometry: a serial chain with 90° twist between successive joint axes,
    /// segment length 53.4 mm, straight along the base x-axis at `q = 0`.
    /// Segment masses split 1.0 kg evenly; inertia modeled as solid cylinders
    /// (radius 30 mm) about each segment midpoint.
    pub fn default_5dof() -> Self {
        Self::chain(5)
    }

    /// Like [`RobotModel::default_5dof`] but for an arbitrary joint count
    /// (parameters of joints past the fifth repeat the fifth row).
    pub fn chain(n: usize) -> Self {
        const K_S: [f64; 5] = [0.035, 0.034, 0.043, 0.035, 0.041]; // N·m/deg
        const K_V: [f64; 5] = [0.008, 0.008, 0.010, 0.011, 0.011]; // N·m·s/deg
        const K_C: [f64; 5] = [0.171, 0.214, 0.233, 0.204, 0.232]; // N·m

        let h = 0.0534;
        let seg_mass = 1.0 / 5.0;
        let r_cyl = 0.03;
        let i_axis = 0.5 * seg_mass * r_cyl * r_cyl;
        let i_perp = seg_mass * (3.0 * r_cyl * r_cyl + h * h) / 12.0;
        let pick = |t: &[f64; 5], i: usize| t[i.min(4)];

        Self {
            n,
            actuator_height: h,
            dh: (0..n)
                .map(|_| DhRow {
                    a: h,
                    alpha: 90.0 * DEG,
                    d: 0.0,
                    theta: 0.0,
                })
                .collect(),
            masses: vec![seg_mass; n],
            com: vec![Vector3::new(-h / 2.0, 0.0, 0.0); n],
            inertia: vec![Matrix3::from_diagonal(&Vector3::new(i_axis, i_perp, i_perp)); n],
            pressure_area: 639.8e-6,
            lever_arm: 24.1e-3,
            stiffness: DVector::from_fn(n, |i, _| pick(&K_S, i) / DEG),
            viscous: DVector::from_fn(n, |i, _| pick(&K_V, i) / DEG),
            coulomb: DVector::from_fn(n, |i, _| pick(&K_C, i)),
            contact_stiffness: 0.010 / DEG.powf(1.5),
            contact_damping: 0.005 / DEG.powf(1.5),
            coulomb_threshold: 1.0 * DEG,
            boundary_threshold: 10.0 * DEG,
            gravity: 9.81,
        }
    }

    /// Check the structural invariants. Called by the JSON loader; call it
    /// yourself after building a model by hand.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::Config("joint count must be positive".into()));
        }
        for (what, len) in [
            ("dh table", self.dh.len()),
            ("masses", self.masses.len()),
            ("com", self.com.len()),
            ("inertia", self.inertia.len()),
            ("k_s", self.stiffness.len()),
            ("k_v", self.viscous.len()),
            ("k_C", self.coulomb.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if self.masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Config("all segment masses must be positive".into()));
        }
        for inertia in &self.inertia {
            let sym = (inertia - inertia.transpose()).abs().max();
            if sym > 1e-12 {
                return Err(Error::Config("inertia tensors must be symmetric".into()));
            }
            if inertia.clone_owned().cholesky().is_none() {
                return Err(Error::Config(
                    "inertia tensors must be positive definite".into(),
                ));
            }
        }
        let nonneg = self
            .stiffness
            .iter()
            .chain(self.viscous.iter())
            .chain(self.coulomb.iter())
            .all(|&k| k >= 0.0);
        if !nonneg || self.contact_stiffness < 0.0 || self.contact_damping < 0.0 {
            return Err(Error::Config("joint parameters must be nonnegative".into()));
        }
        if !(self.coulomb_threshold > 0.0) || !(self.boundary_threshold > 0.0) {
            return Err(Error::Config(
                "coulomb and boundary thresholds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Replace the identified parameters `k = [k_s, k_v, k_C, k_bs, k_bd]`
    /// (SI units), e.g. with the output of an identification run.
    pub fn with_identified(
        mut self,
        k_s: DVector<f64>,
        k_v: DVector<f64>,
        k_c: DVector<f64>,
        k_bs: f64,
        k_bd: f64,
    ) -> Self {
        self.stiffness = k_s;
        self.viscous = k_v;
        self.coulomb = k_c;
        self.contact_stiffness = k_bs;
        self.contact_damping = k_bd;
        self
    }
}

const ROBOT_SCHEMA: &str = "robot-model/1";

/// On-disk form of [`RobotModel`]. Angle-based quantities use degrees, the
/// same convention as every other file boundary of this crate.
#[derive(Debug, Serialize, Deserialize)]
struct RobotModelFile {
    schema: String,
    units: serde_json::Value,
    n: usize,
    h: f64,
    dh: Vec<[f64; 4]>,
    masses: Vec<f64>,
    com: Vec<[f64; 3]>,
    inertia: Vec<[f64; 9]>,
    #[serde(rename = "A_p")]
    a_p: f64,
    r_p: f64,
    k_s: Vec<f64>,
    k_v: Vec<f64>,
    #[serde(rename = "k_C")]
    k_c: Vec<f64>,
    k_bs: f64,
    k_bd: f64,
    #[serde(rename = "qdot_C_deg")]
    qdot_c_deg: f64,
    q_bt_deg: f64,
}

impl RobotModel {
    pub fn to_json(&self) -> Result<String> {
        let file = RobotModelFile {
            schema: ROBOT_SCHEMA.to_string(),
            units: serde_json::json!({
                "h": "m", "dh": "[a m, alpha deg, d m, theta deg]",
                "masses": "kg", "com": "m (segment frame)",
                "inertia": "kg m^2 (row-major, segment frame, about COM)",
                "A_p": "m^2", "r_p": "m",
                "k_s": "N m/deg", "k_v": "N m s/deg", "k_C": "N m",
                "k_bs": "N m/deg^(3/2)", "k_bd": "N m s/deg^(3/2)",
                "qdot_C_deg": "deg/s", "q_bt_deg": "deg",
            }),
            n: self.n,
            h: self.actuator_height,
            dh: self
                .dh
                .iter()
                .map(|r| [r.a, r.alpha / DEG, r.d, r.theta / DEG])
                .collect(),
            masses: self.masses.clone(),
            com: self.com.iter().map(|c| [c.x, c.y, c.z]).collect(),
            inertia: self
                .inertia
                .iter()
                .map(|m| {
                    let mut row = [0.0; 9];
                    for r in 0..3 {
                        for c in 0..3 {
                            row[3 * r + c] = m[(r, c)];
                        }
                    }
                    row
                })
                .collect(),
            a_p: self.pressure_area,
            r_p: self.lever_arm,
            k_s: self.stiffness.iter().map(|k| k * DEG).collect(),
            k_v: self.viscous.iter().map(|k| k * DEG).collect(),
            k_c: self.coulomb.iter().cloned().collect(),
            k_bs: self.contact_stiffness * DEG.powf(1.5),
            k_bd: self.contact_damping * DEG.powf(1.5),
            qdot_c_deg: self.coulomb_threshold / DEG,
            q_bt_deg: self.boundary_threshold / DEG,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RobotModelFile = serde_json::from_str(text)?;
        if file.schema != ROBOT_SCHEMA {
            return Err(Error::Schema {
                expected: ROBOT_SCHEMA.into(),
                found: file.schema,
            });
        }
        let model = Self {
            n: file.n,
            actuator_height: file.h,
            dh: file
                .dh
                .iter()
                .map(|r| DhRow {
                    a: r[0],
                    alpha: r[1] * DEG,
                    d: r[2],
                    theta: r[3] * DEG,
                })
                .collect(),
            masses: file.masses,
            com: file.com.iter().map(|c| Vector3::new(c[0], c[1], c[2])).collect(),
            inertia: file
                .inertia
                .iter()
                .map(|v| Matrix3::from_fn(|r, c| v[3 * r + c]))
                .collect(),
            pressure_area: file.a_p,
            lever_arm: file.r_p,
            stiffness: DVector::from_iterator(file.k_s.len(), file.k_s.iter().map(|k| k / DEG)),
            viscous: DVector::from_iterator(file.k_v.len(), file.k_v.iter().map(|k| k / DEG)),
            coulomb: DVector::from_vec(file.k_c),
            contact_stiffness: file.k_bs / DEG.powf(1.5),
            contact_damping: file.k_bd / DEG.powf(1.5),
            coulomb_threshold: file.qdot_c_deg * DEG,
            boundary_threshold: file.q_bt_deg * DEG,
            gravity: 9.81,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        RobotModel::default_5dof().validate().unwrap();
    }

    #[test]
    fn table_defaults_in_si() {
        let m = RobotModel::default_5dof();
        // 0.043 N·m/deg is 2.4637 N·m/rad
        assert!((m.stiffness[2] - 2.4637).abs() < 1e-3);
        assert!((m.coulomb_threshold - 0.0174533).abs() < 1e-7);
        assert!((m.boundary_threshold - 0.1745329).abs() < 1e-7);
        // degree-based contact stiffness converts with the 3/2 power
        assert!((m.contact_stiffness - 0.010 * (180.0 / std::f64::consts::PI).powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let m = RobotModel::default_5dof();
        let back = RobotModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m.n, back.n);
        assert!((m.stiffness.clone() - back.stiffness).abs().max() < 1e-12);
        assert!((m.contact_stiffness - back.contact_stiffness).abs() < 1e-12);
        assert_eq!(m.dh, back.dh);
    }

    #[test]
    fn unknown_schema_rejected() {
        let m = RobotModel::default_5dof();
        let txt = m.to_json().unwrap().replace("robot-model/1", "robot-model/9");
        match RobotModel::from_json(&txt) {
            Err(Error::Schema { .. }) => {}
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_dh_length_rejected() {
        let mut m = RobotModel::default_5dof();
        m.dh.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn negative_mass_rejected() {
        let mut m = RobotModel::default_5dof();
        m.masses[1] = -0.1;
        assert!(m.validate().is_err());
    }
}
