//! The end-to-end pipeline: data → identification → training → evaluation →
//! benchmark → closed-loop control, with a manifest of every artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use bellows::control::{closed_loop, generate_reference, Controller, MpcConfig, PiConfig};
use bellows::ident::{identify_all, IdentConfig};
use bellows::integrate::RolloutConfig;
use bellows::testbench::{
    bench_speed, domain_grid, evaluate_generalization, generate_excitation, EvalModel,
    ExcitationProtocol, PlantFidelity, SensorModel,
};
use bellows::train::{train_gru, train_pinn, FpScaled, GruTrainConfig, TrainConfig};
use bellows::{Error, Result, RobotModel};
use clap::Args;
use rand::rngs::StdRng;
use rand::SeedableRng;
use sha2::{Digest, Sha256};

use crate::config::parse_domain;

#[derive(Args)]
pub struct RunAllArgs {
    /// Artifact directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Two-joint, 60 s, 50-epoch preset that finishes in minutes.
    #[arg(long)]
    smoke: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Control-experiment domain.
    #[arg(long, default_value = "me=0.1,beta=45")]
    domain: String,
}

struct Stage<'a> {
    name: &'a str,
    started: Instant,
}

impl<'a> Stage<'a> {
    fn begin(name: &'a str) -> Self {
        println!("[{name}] ...");
        Self {
            name,
            started: Instant::now(),
        }
    }

    fn done(self) -> f64 {
        let dt = self.started.elapsed().as_secs_f64();
        println!("[{}] done in {:.1} s", self.name, dt);
        dt
    }
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

pub fn run_all(args: RunAllArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let out = |name: &str| args.out.join(name);
    let mut artifacts: Vec<(String, PathBuf)> = Vec::new();
    let mut stage_seconds: Vec<(String, f64)> = Vec::new();
    let timed = |name: &str, secs: f64, stage_seconds: &mut Vec<(String, f64)>| {
        stage_seconds.push((name.to_string(), secs));
    };

    let (n_joints, data_duration, train_cfg, gru_cfg, control_duration, eval_duration) =
        if args.smoke {
            (
                2usize,
                60.0,
                TrainConfig {
                    epochs: 50,
                    collocation_points: 4_000,
                    ic_points: 800,
                    neurons: 32,
                    ansatz_terms: 10,
                    resample_every: 25,
                    seed: args.seed,
                    ..TrainConfig::desk_default()
                },
                GruTrainConfig {
                    epochs: 30,
                    hidden: 24,
                    seed: args.seed,
                    ..GruTrainConfig::desk_default()
                },
                8.0,
                4.0,
            )
        } else {
            (
                5,
                900.0,
                TrainConfig {
                    seed: args.seed,
                    ..TrainConfig::desk_default()
                },
                GruTrainConfig {
                    seed: args.seed,
                    ..GruTrainConfig::desk_default()
                },
                40.0,
                10.0,
            )
        };

    // stage 0: the robot model
    let robot = RobotModel::chain(n_joints);
    robot.save(out("robot.json"))?;
    artifacts.push(("robot.json".into(), out("robot.json")));

    // stage 1: training data from the simulated plant
    let stage = Stage::begin("gen-data");
    let protocol = ExcitationProtocol::train(data_duration);
    let mut rng = StdRng::seed_from_u64(args.seed);
    let excitation = generate_excitation(&protocol, robot.n, &mut rng)?;
    let dataset = simulate(&robot, &excitation, &protocol, args.seed)?;
    dataset.save(out("data_train.csv"))?;
    artifacts.push(("data_train.csv".into(), out("data_train.csv")));
    timed("gen-data", stage.done(), &mut stage_seconds);

    // stage 2: identification
    let stage = Stage::begin("identify");
    let ident = identify_all(&dataset, &robot, &IdentConfig::default())?;
    std::fs::write(out("ident.json"), ident.to_json()?)?;
    let robot_identified = ident.apply_to(&robot);
    robot_identified.save(out("robot_identified.json"))?;
    artifacts.push(("ident.json".into(), out("ident.json")));
    artifacts.push(("robot_identified.json".into(), out("robot_identified.json")));
    timed("identify", stage.done(), &mut stage_seconds);

    // stage 3: surrogate and baseline training on the identified model
    let stage = Stage::begin("train");
    let (surrogate, report) = train_pinn(
        robot.n,
        &train_cfg,
        |scaler| FpScaled::new(&robot_identified, scaler.clone()),
        None,
    )?;
    surrogate.save(out("weights_dd.json"))?;
    std::fs::write(out("history_dd.csv"), report.history_csv())?;
    let (gru, gru_report) = train_gru(&gru_cfg, &dataset)?;
    gru.save(out("weights_gru.json"))?;
    std::fs::write(out("history_gru.csv"), gru_report.history_csv())?;
    artifacts.push(("weights_dd.json".into(), out("weights_dd.json")));
    artifacts.push(("history_dd.csv".into(), out("history_dd.csv")));
    artifacts.push(("weights_gru.json".into(), out("weights_gru.json")));
    artifacts.push(("history_gru.csv".into(), out("history_gru.csv")));
    timed("train", stage.done(), &mut stage_seconds);

    // stage 4: generalization grid
    let stage = Stage::begin("eval-gen");
    let models: Vec<(String, EvalModel)> = vec![
        ("fp-rk4".into(), EvalModel::Fp(RolloutConfig::rk4_default())),
        ("dd-pinn".into(), EvalModel::Surrogate(&surrogate)),
        ("gru".into(), EvalModel::Gru(&gru)),
    ];
    let report = evaluate_generalization(
        &models,
        &robot,
        &domain_grid(),
        eval_duration,
        surrogate.t_s,
        args.seed ^ 0x5eed,
    )?;
    std::fs::write(out("evalgen.csv"), report.to_csv())?;
    artifacts.push(("evalgen.csv".into(), out("evalgen.csv")));
    timed("eval-gen", stage.done(), &mut stage_seconds);

    // stage 5: speed benchmark
    let stage = Stage::begin("bench");
    let table = bench_speed(
        &[("dd-pinn".into(), &surrogate)],
        &[
            ("euler".into(), RolloutConfig::euler_default()),
            ("rk4".into(), RolloutConfig::rk4_default()),
        ],
        &robot,
        &bellows::Domain::training(),
        if args.smoke { 10.0 } else { 100.0 },
        surrogate.t_s,
        args.seed,
    )?;
    std::fs::write(out("bench.csv"), table.to_csv())?;
    artifacts.push(("bench.csv".into(), out("bench.csv")));
    timed("bench", stage.done(), &mut stage_seconds);

    // stage 6: closed-loop control
    let stage = Stage::begin("mpc-sim");
    let control_domain = parse_domain(&args.domain)?;
    let mut rng = StdRng::seed_from_u64(args.seed ^ 0xc0de);
    let reference = generate_reference(robot.n, control_duration, surrogate.t_s, &mut rng);
    let mpc = Controller::Mpc {
        config: MpcConfig::default_for(&surrogate, 0.7e5),
        surrogate: &surrogate,
    };
    let log = closed_loop(&robot, &mpc, &reference, &control_domain, control_duration)?;
    std::fs::write(out("mpc_log.csv"), log.to_csv())?;
    artifacts.push(("mpc_log.csv".into(), out("mpc_log.csv")));
    let pi = Controller::Pi {
        config: PiConfig::default_gains(robot.n),
    };
    let pi_log = closed_loop(&robot, &pi, &reference, &control_domain, control_duration)?;
    std::fs::write(out("pi_log.csv"), pi_log.to_csv())?;
    artifacts.push(("pi_log.csv".into(), out("pi_log.csv")));
    println!(
        "  MPC MAE {:.3} deg at {:.1} Hz | PI MAE {:.3} deg",
        log.mae_q / bellows::DEG,
        log.mean_rate_hz,
        pi_log.mae_q / bellows::DEG
    );
    timed("mpc-sim", stage.done(), &mut stage_seconds);

    // manifest: versions, seeds, and artifact hashes (timing-dependent
    // artifacts carry their hash too, but reruns only reproduce the rest)
    let mut files = serde_json::Map::new();
    for (name, path) in &artifacts {
        files.insert(name.clone(), serde_json::json!(sha256_hex(path)?));
    }
    let manifest = serde_json::json!({
        "schema": "manifest/1",
        "crate_version": env!("CARGO_PKG_VERSION"),
        "seed": args.seed,
        "smoke": args.smoke,
        "joints": robot.n,
        "stages_seconds": stage_seconds.iter().map(|(n, s)| serde_json::json!({"stage": n, "seconds": s})).collect::<Vec<_>>(),
        "deterministic_artifacts": ["robot.json", "data_train.csv", "ident.json", "robot_identified.json", "weights_dd.json", "history_dd.csv", "weights_gru.json", "history_gru.csv", "evalgen.csv"],
        "files": files,
    });
    std::fs::write(out("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {:?}", out("manifest.json"));
    Ok(())
}

fn simulate(
    robot: &RobotModel,
    excitation: &bellows::testbench::Excitation,
    protocol: &ExcitationProtocol,
    _seed: u64,
) -> Result<bellows::dataset::Dataset> {
    bellows::testbench::simulate_plant(
        robot,
        excitation,
        &bellows::Domain::training(),
        protocol,
        None::<&SensorModel>,
        PlantFidelity::Fast,
    )
    .map_err(|e| match e {
        Error::Diverged { step, what } => Error::Diverged {
            step,
            what: format!("plant diverged while generating data: {what}"),
        },
        other => other,
    })
}
