//! `explore`: run one simulated exploration mission and write its logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;
use voxplore_core::mission::{run_mission_with_sink, ConfigError, DirectorySink, MissionConfig, MissionError, MissionOutcome};
use voxplore_core::world::WorldError;
use voxplore_core::World;

#[derive(Debug, Parser)]
#[command(name = "explore", about = "Run a simulated graph-based exploration mission")]
struct Args {
    /// World description (JSON).
    #[arg(long)]
    world: PathBuf,
    /// Mission configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for every random stream of the mission.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Stop after this many simulation ticks.
    #[arg(long)]
    ticks_max: Option<u64>,
    /// Write the final occupancy map as `map.txt`.
    #[arg(long)]
    export_map: bool,
    /// Write the final global graph as `global_graph.json`.
    #[arg(long)]
    export_graph: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    World(#[from] WorldError),
    #[error("{0}")]
    Mission(#[from] MissionError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

fn run(args: &Args) -> Result<MissionOutcome, CliError> {
    let mut config = MissionConfig::load(&args.config)?;
    config.mission.seed = args.seed;
    let world = World::load(&args.world)?;
    let mut sink = DirectorySink::create(&args.out)?;
    let result = run_mission_with_sink(&config, &world, args.ticks_max, &mut sink)?;
    let summary = serde_json::to_string_pretty(&result.summary).expect("summary serializes");
    std::fs::write(args.out.join("summary.json"), summary + "\n")?;
    if args.export_map {
        std::fs::write(args.out.join("map.txt"), result.map.export_text())?;
    }
    if args.export_graph {
        let graph = serde_json::to_string_pretty(&result.global.to_json()).expect("graph serializes");
        std::fs::write(args.out.join("global_graph.json"), graph + "\n")?;
    }
    eprintln!(
        "{}: explored {:.3}, score {}/{}, home {}, {:.1} s simulated",
        result.outcome.label(),
        result.summary.explored_fraction,
        result.summary.score,
        result.summary.artifacts,
        result.summary.return_home,
        result.summary.final_time
    );
    Ok(result.outcome)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(MissionOutcome::Aborted(reason)) => {
            eprintln!("mission aborted: {reason}");
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
