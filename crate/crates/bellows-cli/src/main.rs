//! Command-line front end: data generation, identification, training,
//! hyperparameter search, evaluation, benchmarking, and closed-loop control
//! against the simulated plant.

mod commands;
mod config;
mod pipeline;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bellows", version, about = "Soft-robot surrogate pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default five-joint robot model to a JSON file.
    InitRobot(commands::InitRobotArgs),
    /// Simulate the plant under a random excitation and log a dataset.
    GenData(commands::GenDataArgs),
    /// Three-step least-squares identification from a dataset.
    Identify(commands::IdentifyArgs),
    /// Train a surrogate (ansatz or direct head) or the GRU baseline.
    Train(commands::TrainArgs),
    /// Hyperparameter search with asynchronous successive halving.
    Hpo(commands::HpoArgs),
    /// Self-loop accuracy of trained models over the payload/tilt grid.
    EvalGen(commands::EvalGenArgs),
    /// Prediction-speed benchmark: surrogates vs fixed-step integrators.
    Bench(commands::BenchArgs),
    /// Closed-loop tracking with MPC or the PI baseline.
    MpcSim(commands::MpcSimArgs),
    /// The full pipeline end to end into an artifact directory.
    RunAll(pipeline::RunAllArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::InitRobot(args) => commands::init_robot(args),
        Command::GenData(args) => commands::gen_data(args),
        Command::Identify(args) => commands::identify(args),
        Command::Train(args) => commands::train(args),
        Command::Hpo(args) => commands::hpo(args),
        Command::EvalGen(args) => commands::eval_gen(args),
        Command::Bench(args) => commands::bench(args),
        Command::MpcSim(args) => commands::mpc_sim(args),
        Command::RunAll(args) => pipeline::run_all(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
