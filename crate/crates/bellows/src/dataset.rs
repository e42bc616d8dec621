//! Timestamped sample logs: the currency of identification, training, and
//! evaluation.
//!
//! File convention: CSV with a `#` metadata line, angles in degrees and
//! pressures in bar at the file boundary, SI units (radians, Pa) in memory.
//! Floats are written in Rust's shortest round-trip decimal form, so
//! write → read → write reproduces a file byte for byte.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::model::DEG;
use crate::types::{Domain, Input, State};

const BAR: f64 = 1e5;

/// Uniformly sampled `[q, q̇, p, p_d]` log tagged with its domain.
///
/// Rows are samples; `q`/`qd` have `n` columns, `p`/`p_d` have `2n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rate: f64,
    pub domain: Domain,
    pub q: DMatrix<f64>,
    pub qd: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub p_d: DMatrix<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.nrows() == 0
    }

    pub fn dof(&self) -> usize {
        self.q.ncols()
    }

    pub fn duration(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.len() - 1) as f64 / self.rate
        }
    }

    pub fn time(&self, row: usize) -> f64 {
        row as f64 / self.rate
    }

    pub fn state(&self, row: usize) -> State {
        State {
            q: self.q.row(row).transpose(),
            qd: self.qd.row(row).transpose(),
        }
    }

    pub fn input(&self, row: usize) -> Input {
        Input {
            p_d: self.p_d.row(row).transpose(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dof();
        if self.qd.ncols() != n || self.p.ncols() != 2 * n || self.p_d.ncols() != 2 * n {
            return Err(Error::Config("dataset column widths are inconsistent".into()));
        }
        if self.q.nrows() != self.qd.nrows()
            || self.q.nrows() != self.p.nrows()
            || self.q.nrows() != self.p_d.nrows()
        {
            return Err(Error::Config("dataset row counts are inconsistent".into()));
        }
        if !(self.rate > 0.0) {
            return Err(Error::Config("dataset rate must be positive".into()));
        }
        Ok(())
    }

    /// Keep every `factor`-th row starting at row 0 (no interpolation).
    pub fn downsample(&self, factor: usize) -> Result<Dataset> {
        if factor == 0 {
            return Err(Error::Config("downsample factor must be >= 1".into()));
        }
        let rows: Vec<usize> = (0..self.len()).step_by(factor).collect();
        let pick =
            |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)]);
        Ok(Dataset {
            rate: self.rate / factor as f64,
            domain: self.domain,
            q: pick(&self.q),
            qd: pick(&self.qd),
            p: pick(&self.p),
            p_d: pick(&self.p_d),
        })
    }

    pub fn to_csv(&self) -> String {
        let n = self.dof();
        let mut out = String::new();
        out.push_str(&format!(
            "# bellows-dataset v1 rate_hz={} n={} me_kg={} beta_deg={}\n",
            self.rate,
            n,
            self.domain.payload,
            self.domain.tilt / DEG
        ));
        out.push('t');
        for i in 1..=n {
            out.push_str(&format!(",q{i}_deg"));
        }
        for i in 1..=n {
            out.push_str(&format!(",qd{i}_degs"));
        }
        for i in 1..=n {
            out.push_str(&format!(",p{i}1_bar,p{i}2_bar"));
        }
        for i in 1..=n {
            out.push_str(&format!(",pd{i}1_bar,pd{i}2_bar"));
        }
        out.push('\n');
        for r in 0..self.len() {
            out.push_str(&format!("{}", self.time(r)));
            for c in 0..n {
                out.push_str(&format!(",{}", self.q[(r, c)] / DEG));
            }
            for c in 0..n {
                out.push_str(&format!(",{}", self.qd[(r, c)] / DEG));
            }
            for c in 0..2 * n {
                out.push_str(&format!(",{}", self.p[(r, c)] / BAR));
            }
            for c in 0..2 * n {
                out.push_str(&format!(",{}", self.p_d[(r, c)] / BAR));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Dataset> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        if !meta.starts_with("# bellows-dataset v1") {
            return Err(Error::Schema {
                expected: "bellows-dataset v1".into(),
                found: meta.chars().take(40).collect(),
            });
        }
        let mut rate = None;
        let mut n = None;
        let mut me = 0.0;
        let mut beta = 0.0;
        for tok in meta.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad metadata value in `{tok}`")))?;
                match k {
                    "rate_hz" => rate = Some(v),
                    "n" => n = Some(v as usize),
                    "me_kg" => me = v,
                    "beta_deg" => beta = v * DEG,
                    _ => {}
                }
            }
        }
        let rate = rate.ok_or_else(|| Error::Parse("missing rate_hz".into()))?;
        let n = n.ok_or_else(|| Error::Parse("missing n".into()))?;
        let _header = lines.next();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let width = 1 + 2 * n + 4 * n;
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad float on data line {}", ln + 1)))?;
            if vals.len() != width {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    ln + 1,
                    width,
                    vals.len()
                )));
            }
            rows.push(vals);
        }
        let m = rows.len();
        let mut q = DMatrix::zeros(m, n);
        let mut qd = DMatrix::zeros(m, n);
        let mut p = DMatrix::zeros(m, 2 * n);
        let mut p_d = DMatrix::zeros(m, 2 * n);
        for (r, vals) in rows.iter().enumerate() {
            for c in 0..n {
                q[(r, c)] = vals[1 + c] * DEG;
                qd[(r, c)] = vals[1 + n + c] * DEG;
            }
            for c in 0..2 * n {
                p[(r, c)] = vals[1 + 2 * n + c] * BAR;
                p_d[(r, c)] = vals[1 + 4 * n + c] * BAR;
            }
        }
        let ds = Dataset {
            rate,
            domain: Domain::new(me, beta)?,
            q,
            qd,
            p,
            p_d,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Dataset> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Write a state trajectory as `t, q1..qn, qd1..qn` (degrees at the boundary).
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |s| s.dof());
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        out.push_str(&format!(",q{i}_deg"));
    }
    for i in 1..=n {
        out.push_str(&format!(",qd{i}_degs"));
    }
    out.push('\n');
    for (k, s) in traj.states.iter().enumerate() {
        out.push_str(&format!("{}", traj.time(k)));
        for v in s.q.iter() {
            out.push_str(&format!(",{}", v / DEG));
        }
        for v in s.qd.iter() {
            out.push_str(&format!(",{}", v / DEG));
        }
        out.push('\n');
    }
    out
}
