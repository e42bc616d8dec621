//! Differentiable building blocks, written from scratch on `f64`.

pub mod ansatz;
pub mod gru;
pub mod mlp;
pub mod scaler;
pub mod surrogate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use ansatz::{ansatz_dt, ansatz_eval};
pub use gru::{Gru, GruGrads};
pub use mlp::{Gradients, Layer, Mlp};
pub use scaler::{Boundaries, Scaler};
pub use surrogate::{Head, SurrogateModel};

const SURROGATE_SCHEMA: &str = "surrogate/1";
const GRU_SCHEMA: &str = "gru/1";

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    /// Row-major weight entries.
    w: Vec<f64>,
    b: Vec<f64>,
}

fn layer_to_file(l: &Layer) -> LayerFile {
    let (rows, cols) = (l.w.nrows(), l.w.ncols());
    let mut w = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            w.push(l.w[(r, c)]);
        }
    }
    LayerFile {
        rows,
        cols,
        w,
        b: l.b.as_slice().to_vec(),
    }
}

fn layer_from_file(f: &LayerFile) -> Result<Layer> {
    if f.w.len() != f.rows * f.cols || f.b.len() != f.rows {
        return Err(Error::Parse("layer shape mismatch".into()));
    }
    Ok(Layer {
        w: DMatrix::from_fn(f.rows, f.cols, |r, c| f.w[r * f.cols + c]),
        b: DVector::from_row_slice(&f.b),
    })
}

#[derive(Serialize, Deserialize)]
struct SurrogateFile {
    schema: String,
    kind: String,
    n: usize,
    n_a: usize,
    t_s: f64,
    boundaries: Boundaries,
    scaler: Scaler,
    layers: Vec<LayerFile>,
}

impl SurrogateModel {
    pub fn to_json(&self) -> Result<String> {
        let (kind, n_a) = match self.head {
            Head::Pinc => ("pinc", 0),
            Head::DdPinn { n_a } => ("dd-pinn", n_a),
        };
        let file = SurrogateFile {
            schema: SURROGATE_SCHEMA.into(),
            kind: kind.into(),
            n: self.n,
            n_a,
            t_s: self.t_s,
            boundaries: self.boundaries,
            scaler: self.scaler.clone(),
            layers: self.core.layers.iter().map(layer_to_file).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SurrogateFile = serde_json::from_str(text)?;
        if file.schema != SURROGATE_SCHEMA {
            return Err(Error::Schema {
                expected: SURROGATE_SCHEMA.into(),
                found: file.schema,
            });
        }
        let head = match file.kind.as_str() {
            "pinc" => Head::Pinc,
            "dd-pinn" => Head::DdPinn { n_a: file.n_a },
            other => return Err(Error::Parse(format!("unknown surrogate kind `{other}`"))),
        };
        let layers = file
            .layers
            .iter()
            .map(layer_from_file)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scaler: file.scaler,
            core: Mlp { layers },
            head,
            t_s: file.t_s,
            boundaries: file.boundaries,
            n: file.n,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GruFile {
    schema: String,
    n: usize,
    t_s: f64,
    scaler: Scaler,
    layers: Vec<LayerFile>,
}

/// A trained GRU bundled with its scaler, mirroring the surrogate interface.
#[derive(Debug, Clone)]
pub struct GruModel {
    pub scaler: Scaler,
    pub gru: Gru,
    pub t_s: f64,
    pub n: usize,
}

impl GruModel {
    pub fn to_json(&self) -> Result<String> {
        let g = &self.gru;
        let pairs = [
            (&g.wz, &g.bz),
            (&g.uz, &DVector::zeros(0)),
            (&g.wr, &g.br),
            (&g.ur, &DVector::zeros(0)),
            (&g.wn, &g.bn),
            (&g.un, &DVector::zeros(0)),
            (&g.wo, &g.bo),
        ];
        let layers = pairs
            .iter()
            .map(|(w, b)| {
                layer_to_file(&Layer {
                    w: (*w).clone(),
                    b: if b.is_empty() {
                        DVector::zeros(w.nrows())
                    } else {
                        (*b).clone()
                    },
                })
            })
            .collect();
        let file = GruFile {
            schema: GRU_SCHEMA.into(),
            n: self.n,
            t_s: self.t_s,
            scaler: self.scaler.clone(),
            layers,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GruFile = serde_json::from_str(text)?;
        if file.schema != GRU_SCHEMA {
            return Err(Error::Schema {
                expected: GRU_SCHEMA.into(),
                found: file.schema,
            });
        }
        if file.layers.len() != 7 {
            return Err(Error::Parse("gru file needs exactly 7 blocks".into()));
        }
        let l: Vec<Layer> = file
            .layers
            .iter()
            .map(layer_from_file)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gru: Gru {
                wz: l[0].w.clone(),
                bz: l[0].b.clone(),
                uz: l[1].w.clone(),
                wr: l[2].w.clone(),
                br: l[2].b.clone(),
                ur: l[3].w.clone(),
                wn: l[4].w.clone(),
                bn: l[4].b.clone(),
                un: l[5].w.clone(),
                wo: l[6].w.clone(),
                bo: l[6].b.clone(),
            },
            scaler: file.scaler,
            t_s: file.t_s,
            n: file.n,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Self-loop rollout from measured initial state, hidden state zeroed.
    pub fn self_loop_rollout(
        &self,
        x0: &crate::types::State,
        u_traj: &[crate::types::Input],
    ) -> Result<crate::integrate::Trajectory> {
        let mut h = DVector::zeros(self.gru.hidden_dim());
        let mut x_s = self.scaler.scale_state(x0);
        let mut states = vec![x0.clone()];
        for (k, u) in u_traj.iter().enumerate() {
            let u_s = self.scaler.scale_input(u);
            let mut input = DVector::zeros(4 * self.n);
            input.rows_mut(0, 2 * self.n).copy_from(&x_s);
            input.rows_mut(2 * self.n, 2 * self.n).copy_from(&u_s);
            let (h_new, out) = self.gru.step(&h, &input);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step: k,
                    what: "gru self-loop produced a non-finite state".into(),
                });
            }
            h = h_new;
            x_s = out;
            states.push(self.scaler.unscale_state(&x_s)?);
        }
        Ok(crate::integrate::Trajectory {
            t_s: self.t_s,
            states,
        })
    }
}
