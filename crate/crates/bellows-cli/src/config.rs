//! File-boundary configuration structures (degrees and bar, like every other
//! file in the pipeline) and the domain flag parser.

use bellows::net::Boundaries;
use bellows::train::{GruTrainConfig, TrainConfig};
use bellows::{Domain, Error, Result, DEG};
use serde::{Deserialize, Serialize};

/// Parse a `"me=0.1,beta=45"` domain flag (kilograms and degrees).
pub fn parse_domain(spec: &str) -> Result<Domain> {
    let mut me = None;
    let mut beta = None;
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{part}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad number in `{part}`")))?;
        match key.trim() {
            "me" => me = Some(value),
            "beta" => beta = Some(value * DEG),
            other => return Err(Error::Parse(format!("unknown domain key `{other}`"))),
        }
    }
    Domain::new(me.unwrap_or(0.0), beta.unwrap_or(0.0))
}

const TRAIN_SCHEMA: &str = "train-config/1";

/// On-disk training configuration; see the library's `TrainConfig` for the
/// field meanings. Boundary quantities use degrees and bar.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainConfigFile {
    pub schema: String,
    pub epochs: usize,
    pub resample_every: usize,
    pub collocation_points: usize,
    pub ic_points: usize,
    pub batch_size: usize,
    pub ansatz_terms: usize,
    pub plateau_patience: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub t_s: f64,
    pub seed: u64,
    pub q_max_deg: f64,
    pub qd_max_degs: f64,
    pub p_max_bar: f64,
    pub payload_max_kg: f64,
    pub tilt_max_deg: f64,
    pub kappa: f64,
}

impl TrainConfigFile {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        let b = cfg.boundaries;
        Self {
            schema: TRAIN_SCHEMA.into(),
            epochs: cfg.epochs,
            resample_every: cfg.resample_every,
            collocation_points: cfg.collocation_points,
            ic_points: cfg.ic_points,
            batch_size: cfg.batch_size,
            ansatz_terms: cfg.ansatz_terms,
            plateau_patience: cfg.plateau_patience,
            lr0: cfg.lr0,
            lr_min: cfg.lr_min,
            hidden_layers: cfg.hidden_layers,
            neurons: cfg.neurons,
            t_s: cfg.t_s,
            seed: cfg.seed,
            q_max_deg: b.q_max / DEG,
            qd_max_degs: b.qd_max / DEG,
            p_max_bar: b.p_max / 1e5,
            payload_max_kg: b.payload_max,
            tilt_max_deg: b.tilt_max / DEG,
            kappa: b.kappa,
        }
    }

    pub fn into_config(self) -> Result<TrainConfig> {
        if self.schema != TRAIN_SCHEMA {
            return Err(Error::Schema {
                expected: TRAIN_SCHEMA.into(),
                found: self.schema,
            });
        }
        Ok(TrainConfig {
            epochs: self.epochs,
            resample_every: self.resample_every,
            collocation_points: self.collocation_points,
            ic_points: self.ic_points,
            batch_size: self.batch_size,
            ansatz_terms: self.ansatz_terms,
            plateau_patience: self.plateau_patience,
            lr0: self.lr0,
            lr_min: self.lr_min,
            hidden_layers: self.hidden_layers,
            neurons: self.neurons,
            boundaries: Boundaries {
                q_max: self.q_max_deg * DEG,
                qd_max: self.qd_max_degs * DEG,
                p_max: self.p_max_bar * 1e5,
                payload_max: self.payload_max_kg,
                tilt_max: self.tilt_max_deg * DEG,
                kappa: self.kappa,
            },
            t_s: self.t_s,
            seed: self.seed,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path)?;
        let file: TrainConfigFile = serde_json::from_str(&text)?;
        file.into_config()
    }

    pub fn save(cfg: &TrainConfig, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&Self::from_config(cfg))?)?;
        Ok(())
    }
}

/// GRU training knobs exposed on the command line.
pub fn gru_config(epochs: usize, window: usize, hidden: usize, seed: u64) -> GruTrainConfig {
    GruTrainConfig {
        epochs,
        window,
        hidden,
        seed,
        ..GruTrainConfig::desk_default()
    }
}

const SPACE_SCHEMA: &str = "hpo-space/1";

/// Search-space bounds for the hyperparameter search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HpoSpaceFile {
    pub schema: String,
    pub neurons: [usize; 2],
    pub hidden_layers: [usize; 2],
    pub lr0_log10: [f64; 2],
    pub ansatz_terms: [usize; 2],
}

impl Default for HpoSpaceFile {
    fn default() -> Self {
        Self {
            schema: SPACE_SCHEMA.into(),
            neurons: [32, 96],
            hidden_layers: [1, 3],
            lr0_log10: [-3.5, -2.5],
            ansatz_terms: [10, 40],
        }
    }
}

impl HpoSpaceFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: HpoSpaceFile = serde_json::from_str(&text)?;
        if file.schema != SPACE_SCHEMA {
            return Err(Error::Schema {
                expected: SPACE_SCHEMA.into(),
                found: file.schema,
            });
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_flag_round_trips() {
        let d = parse_domain("me=0,beta=0").unwrap();
        assert_eq!(d, Domain::training());
        let d = parse_domain("me=0.2,beta=90").unwrap();
        assert!((d.payload - 0.2).abs() < 1e-12);
        assert!((d.tilt - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn bad_domain_flags_error() {
        assert!(parse_domain("me=-1,beta=0").is_err());
        assert!(parse_domain("mass=1").is_err());
        assert!(parse_domain("me=abc").is_err());
    }

    #[test]
    fn train_config_file_round_trips() {
        let cfg = TrainConfig::desk_default();
        let file = TrainConfigFile::from_config(&cfg);
        let back = serde_json::from_str::<TrainConfigFile>(
            &serde_json::to_string(&file).unwrap(),
        )
        .unwrap()
        .into_config()
        .unwrap();
        assert_eq!(back.epochs, cfg.epochs);
        assert!((back.boundaries.q_max - cfg.boundaries.q_max).abs() < 1e-12);
        assert!((back.boundaries.kappa - cfg.boundaries.kappa).abs() < 1e-15);
    }
}
