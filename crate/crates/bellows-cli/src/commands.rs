//! Individual subcommand implementations.

use std::path::PathBuf;

use bellows::control::{closed_loop, generate_reference, Controller, MpcConfig, PiConfig};
use bellows::dataset::Dataset;
use bellows::ident::{identify_all, IdentConfig};
use bellows::integrate::RolloutConfig;
use bellows::net::{GruModel, SurrogateModel};
use bellows::testbench::{
    bench_speed, domain_grid, evaluate_generalization, generate_excitation, simulate_plant,
    EvalModel, ExcitationProtocol, PlantFidelity, SensorModel,
};
use bellows::train::{
    asha_optimize, train_gru, train_pinn, AshaConfig, FpScaled, TrainConfig,
};
use bellows::{Error, Result, RobotModel};
use clap::Args;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::config::{gru_config, parse_domain, HpoSpaceFile, TrainConfigFile};

fn load_robot(path: &PathBuf) -> Result<RobotModel> {
    RobotModel::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read robot model {path:?}: {io}")),
        other => other,
    })
}

#[derive(Args)]
pub struct InitRobotArgs {
    /// Output path for the robot JSON.
    #[arg(long, default_value = "robot.json")]
    out: PathBuf,
    /// Joint count.
    #[arg(long, default_value_t = 5)]
    joints: usize,
}

pub fn init_robot(args: InitRobotArgs) -> Result<()> {
    let model = RobotModel::chain(args.joints);
    model.save(&args.out)?;
    println!("wrote {:?}", args.out);
    Ok(())
}

#[derive(Args)]
pub struct GenDataArgs {
    #[arg(long)]
    robot: PathBuf,
    /// Dataset duration, s.
    #[arg(long, default_value_t = 900.0)]
    duration: f64,
    /// Hold time preset: `train` holds 3 s, `test` holds 1 s.
    #[arg(long, default_value = "train")]
    protocol: String,
    /// Operating domain, e.g. "me=0.1,beta=45" (kg, deg).
    #[arg(long, default_value = "me=0,beta=0")]
    domain: String,
    /// Apply encoder/pressure quantization and the filtered velocity channel.
    #[arg(long)]
    sensors: bool,
    /// Plant integration: `oracle` (RK4 at 5 µs) or `fast` (Euler at 20 µs).
    #[arg(long, default_value = "fast")]
    fidelity: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let robot = load_robot(&args.robot)?;
    let domain = parse_domain(&args.domain)?;
    let protocol = match args.protocol.as_str() {
        "train" => ExcitationProtocol::train(args.duration),
        "test" => ExcitationProtocol::test(args.duration),
        other => return Err(Error::Config(format!("unknown protocol `{other}`"))),
    };
    let fidelity = match args.fidelity.as_str() {
        "oracle" => PlantFidelity::Oracle,
        "fast" => PlantFidelity::Fast,
        other => return Err(Error::Config(format!("unknown fidelity `{other}`"))),
    };
    let mut rng = StdRng::seed_from_u64(args.seed);
    let excitation = generate_excitation(&protocol, robot.n, &mut rng)?;
    let sensors = SensorModel::default();
    let dataset = simulate_plant(
        &robot,
        &excitation,
        &domain,
        &protocol,
        args.sensors.then_some(&sensors),
        fidelity,
    )?;
    dataset.save(&args.out)?;
    println!(
        "wrote {:?}: {} rows at {} Hz",
        args.out,
        dataset.len(),
        dataset.rate
    );
    Ok(())
}

#[derive(Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the robot model with the identified parameters applied.
    #[arg(long)]
    apply: Option<PathBuf>,
}

pub fn identify(args: IdentifyArgs) -> Result<()> {
    let robot = load_robot(&args.model)?;
    let dataset = Dataset::load(&args.data)?;
    let result = identify_all(&dataset, &robot, &IdentConfig::default())?;
    std::fs::write(&args.out, result.to_json()?)?;
    println!(
        "wrote {:?}; regime fractions {:.1}%/{:.1}%/{:.1}%, residual RMS {:?} N·m",
        args.out,
        result.subset_fractions[0] * 100.0,
        result.subset_fractions[1] * 100.0,
        result.subset_fractions[2] * 100.0,
        result.residual_rms
    );
    if !result.unidentifiable.is_empty() {
        println!("unidentifiable: {:?}", result.unidentifiable);
    }
    if let Some(path) = args.apply {
        result.apply_to(&robot).save(&path)?;
        println!("wrote {path:?}");
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training configuration JSON; defaults to the desk-scale preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Loss history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Train the GRU baseline on this dataset instead of a surrogate.
    #[arg(long)]
    gru_data: Option<PathBuf>,
    /// Optional measured one-step data for the surrogate's data loss.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 120)]
    gru_epochs: usize,
    #[arg(long, default_value_t = 50)]
    gru_window: usize,
    #[arg(long, default_value_t = 48)]
    gru_hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the default config to the --config path and exit.
    #[arg(long)]
    write_default_config: bool,
}

pub fn train(args: TrainArgs) -> Result<()> {
    if args.write_default_config {
        let path = args
            .config
            .ok_or_else(|| Error::Config("--write-default-config needs --config".into()))?;
        TrainConfigFile::save(&TrainConfig::desk_default(), &path)?;
        println!("wrote {path:?}");
        return Ok(());
    }
    let robot = load_robot(&args.model)?;
    if let Some(data_path) = &args.gru_data {
        let dataset = Dataset::load(data_path)?;
        let cfg = gru_config(args.gru_epochs, args.gru_window, args.gru_hidden, args.seed);
        let (model, report) = train_gru(&cfg, &dataset)?;
        model.save(&args.out)?;
        println!(
            "wrote {:?}; best validation MSE {:.3e}",
            args.out, report.best_val
        );
        if let Some(path) = args.history {
            std::fs::write(path, report.history_csv())?;
        }
        return Ok(());
    }
    let mut cfg = match &args.config {
        Some(path) => TrainConfigFile::load(path)?,
        None => TrainConfig::desk_default(),
    };
    if args.seed != 0 {
        cfg.seed = args.seed;
    }
    let data = args.data.as_ref().map(Dataset::load).transpose()?;
    let (model, report) = train_pinn(
        robot.n,
        &cfg,
        |scaler| FpScaled::new(&robot, scaler.clone()),
        data.as_ref(),
    )?;
    model.save(&args.out)?;
    println!(
        "wrote {:?}; best validation loss {:.4}{}",
        args.out,
        report.best_val,
        if report.excluded_flag {
            format!(
                " (warning: {:.1}% collocation rows excluded)",
                report.excluded_fraction * 100.0
            )
        } else {
            String::new()
        }
    );
    if let Some(path) = args.history {
        std::fs::write(path, report.history_csv())?;
    }
    Ok(())
}

#[derive(Args)]
pub struct HpoArgs {
    /// Search-space JSON; defaults to a built-in desk-scale space.
    #[arg(long)]
    space: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 12)]
    trials: usize,
    #[arg(long, default_value_t = 30)]
    grace: usize,
    #[arg(long, default_value_t = 2)]
    reduction: usize,
    /// Full training budget per trial, epochs.
    #[arg(long, default_value_t = 120)]
    budget: usize,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the winning training configuration.
    #[arg(long)]
    out: PathBuf,
    /// Trial table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
}

pub fn hpo(args: HpoArgs) -> Result<()> {
    let robot = load_robot(&args.model)?;
    let space = match &args.space {
        Some(path) => HpoSpaceFile::load(path)?,
        None => HpoSpaceFile::default(),
    };
    let asha = AshaConfig {
        trials: args.trials,
        grace: args.grace,
        reduction: args.reduction,
        max_budget: args.budget,
        workers: args.workers,
        seed: args.seed,
    };
    let base = TrainConfig::desk_default();
    let sampler = {
        let space = space.clone();
        move |rng: &mut StdRng| {
            vec![
                rng.random_range(space.neurons[0]..=space.neurons[1]) as f64,
                rng.random_range(space.hidden_layers[0]..=space.hidden_layers[1]) as f64,
                10f64.powf(rng.random_range(space.lr0_log10[0]..space.lr0_log10[1])),
                rng.random_range(space.ansatz_terms[0]..=space.ansatz_terms[1]) as f64,
            ]
        }
    };
    let robot_ref = &robot;
    let evaluate = move |cfg_vec: &[f64], budget: usize, seed: u64| -> Result<f64> {
        let cfg = TrainConfig {
            neurons: cfg_vec[0] as usize,
            hidden_layers: cfg_vec[1] as usize,
            lr0: cfg_vec[2],
            ansatz_terms: cfg_vec[3] as usize,
            epochs: budget,
            seed,
            ..base
        };
        let (_, report) = train_pinn(
            robot_ref.n,
            &cfg,
            |scaler| FpScaled::new(robot_ref, scaler.clone()),
            None,
        )?;
        Ok(report.best_val)
    };
    let (best, table) = asha_optimize(sampler, evaluate, &asha)?;
    let winner = TrainConfig {
        neurons: best[0] as usize,
        hidden_layers: best[1] as usize,
        lr0: best[2],
        ansatz_terms: best[3] as usize,
        ..base
    };
    TrainConfigFile::save(&winner, &args.out)?;
    println!(
        "wrote {:?}: n_n={} n_h={} lr0={:.2e} n_a={}",
        args.out, winner.neurons, winner.hidden_layers, winner.lr0, winner.ansatz_terms
    );
    if let Some(path) = args.table {
        let mut csv = String::from("trial,budget,loss,failed\n");
        for rec in &table {
            if rec.rungs.is_empty() {
                csv.push_str(&format!("{},,,{}\n", rec.id, rec.failed));
            }
            for (budget, loss) in &rec.rungs {
                csv.push_str(&format!("{},{},{},{}\n", rec.id, budget, loss, rec.failed));
            }
        }
        std::fs::write(path, csv)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalGenArgs {
    #[arg(long)]
    robot: PathBuf,
    /// Trained surrogate weights (repeatable, `name=path`).
    #[arg(long = "weights")]
    weights: Vec<String>,
    /// Trained GRU weights, `name=path`.
    #[arg(long)]
    gru: Option<String>,
    /// Include the first-principles model at macro-step resolution.
    #[arg(long)]
    with_fp: bool,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn split_named(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((name, path)) => Ok((name.to_string(), PathBuf::from(path))),
        None => Ok((
            spec.rsplit('/').next().unwrap_or(spec).to_string(),
            PathBuf::from(spec),
        )),
    }
}

pub fn eval_gen(args: EvalGenArgs) -> Result<()> {
    let robot = load_robot(&args.robot)?;
    let mut surrogates = Vec::new();
    for spec in &args.weights {
        let (name, path) = split_named(spec)?;
        surrogates.push((name, SurrogateModel::load(path)?));
    }
    let gru = args
        .gru
        .as_ref()
        .map(|spec| -> Result<_> {
            let (name, path) = split_named(spec)?;
            Ok((name, GruModel::load(path)?))
        })
        .transpose()?;
    let mut models: Vec<(String, EvalModel)> = Vec::new();
    if args.with_fp {
        models.push(("fp-rk4".into(), EvalModel::Fp(RolloutConfig::rk4_default())));
    }
    for (name, model) in &surrogates {
        models.push((name.clone(), EvalModel::Surrogate(model)));
    }
    if let Some((name, model)) = &gru {
        models.push((name.clone(), EvalModel::Gru(model)));
    }
    if models.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let report = evaluate_generalization(
        &models,
        &robot,
        &domain_grid(),
        args.duration,
        0.02,
        args.seed,
    )?;
    std::fs::write(&args.out, report.to_csv())?;
    println!("wrote {:?}", args.out);
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    robot: PathBuf,
    /// Surrogates to time, `name=path`.
    #[arg(long = "weights")]
    weights: Vec<String>,
    #[arg(long, default_value_t = 100.0)]
    duration: f64,
    #[arg(long, default_value = "me=0,beta=0")]
    domain: String,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let robot = load_robot(&args.robot)?;
    let domain = parse_domain(&args.domain)?;
    let mut surrogates = Vec::new();
    for spec in &args.weights {
        let (name, path) = split_named(spec)?;
        surrogates.push((name, SurrogateModel::load(path)?));
    }
    let named: Vec<(String, &SurrogateModel)> = surrogates
        .iter()
        .map(|(n, m)| (n.clone(), m))
        .collect();
    let table = bench_speed(
        &named,
        &[
            ("euler".into(), RolloutConfig::euler_default()),
            ("rk4".into(), RolloutConfig::rk4_default()),
        ],
        &robot,
        &domain,
        args.duration,
        0.02,
        args.seed,
    )?;
    std::fs::write(&args.out, table.to_csv())?;
    println!("wrote {:?}", args.out);
    for row in &table.rows {
        println!(
            "  {:<10} mean {:.4} ms  max {:.4}  min {:.4}  n_calls {}",
            row.method, row.mean_ms, row.max_ms, row.min_ms, row.n_calls
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct MpcSimArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    robot: PathBuf,
    #[arg(long, default_value = "me=0,beta=0")]
    domain: String,
    #[arg(long, default_value_t = 40.0)]
    duration: f64,
    /// `mpc` or `pi`.
    #[arg(long, default_value = "mpc")]
    controller: String,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn mpc_sim(args: MpcSimArgs) -> Result<()> {
    let robot = load_robot(&args.robot)?;
    let domain = parse_domain(&args.domain)?;
    let surrogate = SurrogateModel::load(&args.weights)?;
    let mut rng = StdRng::seed_from_u64(args.seed);
    let reference = generate_reference(robot.n, args.duration, surrogate.t_s, &mut rng);
    let controller = match args.controller.as_str() {
        "mpc" => Controller::Mpc {
            config: MpcConfig::default_for(&surrogate, 0.7e5),
            surrogate: &surrogate,
        },
        "pi" => Controller::Pi {
            config: PiConfig::default_gains(robot.n),
        },
        other => return Err(Error::Config(format!("unknown controller `{other}`"))),
    };
    let log = closed_loop(&robot, &controller, &reference, &domain, args.duration)?;
    std::fs::write(&args.out, log.to_csv())?;
    println!(
        "wrote {:?}: MAE {:.3} deg, mean rate {:.1} Hz",
        args.out,
        log.mae_q / bellows::DEG,
        log.mean_rate_hz
    );
    Ok(())
}
