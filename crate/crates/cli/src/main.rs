use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Build and query reachability maps for serial robot arms.
#[derive(Parser)]
#[command(name = "rm4d", version)]
struct Cli {
    /// Worker threads; falls back to RM4D_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample configurations into a new (or resumed) map.
    Build(BuildArgs),
    /// Forward query: is a TCP pose reachable from the base at the origin?
    Query(QueryArgs),
    /// Inverse query: base positions from which a world pose is reachable.
    Invert(InvertArgs),
    /// Evaluate a map against IK-labelled poses.
    Eval(EvalArgs),
    /// Choose a base position for a set of grasp candidates.
    Place(PlaceArgs),
    /// Restrict the first and last joint and compare map accuracy.
    Ablate(AblateArgs),
    /// Write random grasp candidates around object centers.
    SynthGrasps(SynthArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin robot (ur5e, panda, ideal6) or description file.
    #[arg(long)]
    robot: Option<String>,
    /// rm4d, zach5d or zach6d.
    #[arg(long)]
    map_type: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    delta_theta_deg: Option<f64>,
    #[arg(long)]
    r_xy: Option<f64>,
    #[arg(long)]
    r_z: Option<f64>,
    /// Evaluate at every checkpoint against this many labelled poses.
    #[arg(long)]
    eval_count: Option<usize>,
    #[arg(long)]
    eval_seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Continue from an existing map file in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    map: PathBuf,
    /// 12 values (rotation row-major, then position) or 6 (x, y, z in
    /// meters, roll, pitch, yaw in degrees), comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
    /// CSV of base positions (x, y).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    map: PathBuf,
    /// Defaults to the robot named in the map header.
    #[arg(long)]
    robot: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    eval_count: usize,
    #[arg(long, default_value_t = 1)]
    eval_seed: u64,
    /// Label cache; generated when missing or stale.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Metrics CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlaceArgs {
    /// RM4D map file.
    #[arg(long)]
    map: PathBuf,
    /// Grasp CSV: object_id followed by 12 pose values per row.
    #[arg(long)]
    grasps: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Placement cell size in meters; defaults to the map's.
    #[arg(long)]
    cell_size: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, default_value = "panda")]
    robot: String,
    /// Symmetric ranges in degrees for the first and last joint.
    #[arg(long, value_delimiter = ',', default_value = "180,166,160,150")]
    ranges: Vec<f64>,
    #[arg(long, default_value_t = 2_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    eval_count: usize,
    #[arg(long, default_value_t = 1)]
    eval_seed: u64,
    /// Directory for cached labels.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Object centers as `x,y,z`, separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    centers: String,
    #[arg(long, default_value_t = 200)]
    per_object: usize,
    /// Position jitter around each center, meters.
    #[arg(long, default_value_t = 0.03)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<rm4d::Error> for CliError {
    fn from(e: rm4d::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RM4D_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("RM4D_THREADS must be a number, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Query(a) => commands::query(a),
        Command::Invert(a) => commands::invert(a),
        Command::Eval(a) => commands::eval(a),
        Command::Place(a) => commands::place(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::SynthGrasps(a) => commands::synth_grasps(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => ExitCode::from(3),
    }
}
