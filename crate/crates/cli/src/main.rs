//! `lstgrid` — LST, NDVI, emissivity and land-cover maps from Landsat
//! TM/ETM+ bands, run through the tiled engine.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod manifest;

use error::CliError;

#[derive(Parser)]
#[command(name = "lstgrid", version, about = "Landsat TM/ETM+ land surface temperature and land cover")]
struct Cli {
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DN → radiance or dark-object-corrected reflectance per band
    Calibrate {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        dos: DosArgs,
        /// Write radiance instead of reflectance
        #[arg(long)]
        radiance: bool,
    },
    /// NDVI from bands 3 and 4
    Ndvi {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        dos: DosArgs,
    },
    /// Land surface emissivity from NDVI thresholds (bands 3 and 4)
    Emissivity {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        dos: DosArgs,
        #[command(flatten)]
        eps: EmissivityArgs,
    },
    /// LST map (°C) from bands 3, 4 and the thermal band, step by step
    Lst {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        dos: DosArgs,
        #[command(flatten)]
        eps: EmissivityArgs,
    },
    /// calibrate → NDVI → emissivity → LST fused into one pass
    Pipeline {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[command(flatten)]
        dos: DosArgs,
        #[command(flatten)]
        eps: EmissivityArgs,
    },
    /// Parallelepiped land-cover classification
    Classify {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        exec: ExecArgs,
        /// Training regions: `class_name row0 col0 row1 col1` per line
        #[arg(long, value_name = "FILE", required_unless_present = "signatures")]
        train: Option<PathBuf>,
        /// Previously written signatures instead of training
        #[arg(long, value_name = "FILE", conflicts_with = "train")]
        signatures: Option<PathBuf>,
        /// minmax | meansigma | meansigma:K
        #[arg(long, default_value = "minmax")]
        classifier_mode: String,
        /// Reference label raster for a confusion matrix
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
    },
    /// Mean LST against station readings interpolated to overpass time
    Compare {
        /// LST map (.txt as written by `lst`, .tif or ASCII grid)
        #[arg(long, value_name = "FILE", required_unless_present = "mean", conflicts_with = "mean")]
        lst: Option<PathBuf>,
        /// Mean LST (°C) when no map is at hand
        #[arg(long)]
        mean: Option<f64>,
        /// Station reading, repeatable
        #[arg(long = "reading", value_name = "HH:MM=°C", required = true, num_args = 1)]
        readings: Vec<String>,
        /// Overpass time
        #[arg(long, value_name = "HH:MM")]
        overpass: String,
        /// Published value at overpass, echoed verbatim
        #[arg(long)]
        reference: Option<String>,
        #[arg(long, default_value = "scene")]
        label: String,
        /// Scene metadata, for the w row
        #[arg(long, value_name = "FILE")]
        metadata: Option<PathBuf>,
    },
    /// Serve jobs to a coordinator over TCP
    Worker {
        #[arg(long, default_value = "0.0.0.0:7070", value_name = "ADDR")]
        listen: String,
        /// Fault injection: die after sending N results
        #[arg(long, value_name = "N")]
        fail_after: Option<usize>,
    },
}

#[derive(Args, Clone)]
pub struct SceneArgs {
    /// Scene metadata file
    #[arg(long, value_name = "FILE")]
    pub metadata: PathBuf,
    /// Input band, repeatable (ASCII grid or TIFF)
    #[arg(long = "band", value_name = "ID=PATH", required = true)]
    pub bands: Vec<String>,
    /// Output directory
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
    /// Label in output file names (default: metadata `tag`, else "scene")
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Args, Clone)]
pub struct ExecArgs {
    /// Local worker threads, `local:N`
    #[arg(long, value_name = "local:N")]
    pub workers: Option<String>,
    /// Remote worker, repeatable
    #[arg(long = "worker", value_name = "HOST:PORT")]
    pub remote: Vec<String>,
    /// One tile per worker slot, pinned (no work pulling)
    #[arg(long)]
    pub static_tiling: bool,
    /// Extra attempts per failed job
    #[arg(long, default_value_t = 2, value_name = "N")]
    pub retry: u32,
    /// Tile count override
    #[arg(long, value_name = "N")]
    pub tiles: Option<usize>,
}

#[derive(Args, Clone)]
pub struct DosArgs {
    /// Fraction of pixels defining the dark object
    #[arg(long, default_value_t = lstgrid::calibration::DEFAULT_DOS_FRACTION, value_name = "F")]
    pub dos_fraction: f64,
    /// Top-of-atmosphere reflectance (skip dark-object subtraction)
    #[arg(long = "ndvi-toa")]
    pub toa: bool,
}

#[derive(Args, Clone)]
pub struct EmissivityArgs {
    #[arg(long, default_value_t = 0.157)]
    pub ndvi_low: f64,
    #[arg(long, default_value_t = 0.727)]
    pub ndvi_high: f64,
    #[arg(long, default_value_t = 0.97)]
    pub eps_soil: f64,
    #[arg(long, default_value_t = 0.99)]
    pub eps_veg: f64,
    #[arg(long, default_value_t = 0.995)]
    pub eps_water: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    use commands::*;
    match cmd {
        Command::Calibrate {
            scene,
            exec,
            dos,
            radiance,
        } => calibrate(&scene, &exec, &dos, radiance),
        Command::Ndvi { scene, exec, dos } => ndvi(&scene, &exec, &dos),
        Command::Emissivity { scene, exec, dos, eps } => emissivity(&scene, &exec, &dos, &eps),
        Command::Lst { scene, exec, dos, eps } => lst(&scene, &exec, &dos, &eps, false),
        Command::Pipeline { scene, exec, dos, eps } => lst(&scene, &exec, &dos, &eps, true),
        Command::Classify {
            scene,
            exec,
            train,
            signatures,
            classifier_mode,
            truth,
        } => classify(&scene, &exec, train, signatures, &classifier_mode, truth),
        Command::Compare {
            lst,
            mean,
            readings,
            overpass,
            reference,
            label,
            metadata,
        } => compare(lst, mean, &readings, &overpass, reference, label, metadata),
        Command::Worker { listen, fail_after } => worker(&listen, fail_after),
    }
}
