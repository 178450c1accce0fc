use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use esm_core::eval::bundle::{write_bundle, RunBundle};
use esm_core::eval::episode::EpisodeInputs;
use esm_core::eval::{run_episode_with, RunConfig, TrainPuConfig};
use esm_core::pu::{mine_triplets, sample_place_history, train_encoder, write_loss_curve};
use esm_core::{EsmError, Result};

#[derive(Parser)]
#[command(name = "esm", version, about = "Egocentric spatial memory: simulate, map, close loops, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its bundle.
    Run {
        config: PathBuf,
        /// Bundle directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute map metrics from a bundle.
    Eval { run_dir: PathBuf },
    /// Train a place encoder on views sampled across a maze.
    TrainPu { config: PathBuf },
    /// Recompute loop-closure precision/recall from a bundle.
    Pr { run_dir: PathBuf },
    /// Re-render the global map of a bundle.
    Render { run_dir: PathBuf },
}

fn is_config_error(e: &EsmError) -> bool {
    matches!(
        e,
        EsmError::Config(_)
            | EsmError::Parse { .. }
            | EsmError::InvalidMaze(_)
            | EsmError::LimitExceeded(_)
            | EsmError::UnknownStrategy { .. }
            | EsmError::Json(_)
    )
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let inputs = EpisodeInputs::load(&cfg)?;
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        let stem = config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from(format!("run_{stem}"))
    });
    let result = run_episode_with(&inputs, &cfg)?;
    let traj = fs::read_to_string(&cfg.trajectory)?;
    let summary = write_bundle(&dir, &cfg, &inputs.maze, &traj, &result)?;
    println!("{} steps, {} closures ({} corrected) -> {}", summary.steps, summary.closures, summary.corrections, dir.display());
    if let Some(g) = &summary.final_global {
        println!(
            "global at t={}: mse {:.4} cor {:.4} mi {:.4}",
            g.t, g.mse, g.correlation, g.mutual_information
        );
    }
    for p in &summary.pr {
        println!("pr {}: auc {:.4}", p.matcher, p.auc);
    }
    Ok(())
}

fn eval(dir: &Path) -> Result<()> {
    let bundle = RunBundle::load(dir)?;
    let reports = bundle.evaluate()?;
    let mut wr = csv::Writer::from_path(dir.join("eval.csv"))?;
    for r in &reports {
        wr.serialize(r)?;
    }
    wr.flush()?;
    for r in reports.iter().filter(|r| r.area_tag != "local-trend") {
        println!(
            "{:<6} t={:<5} mse {:.4} cor {:.4}{} mi {:.4} cells {}",
            r.area_tag,
            r.t,
            r.mse,
            r.correlation,
            if r.correlation_defined { "" } else { " (undefined)" },
            r.mutual_information,
            r.cells
        );
    }
    Ok(())
}

fn pr(dir: &Path) -> Result<()> {
    let bundle = RunBundle::load(dir)?;
    match bundle.write_pr(dir)? {
        Some(curves) => {
            for (name, c) in &curves {
                println!("{name}: auc {:.4} over {} ground-truth pairs, {} candidates", c.auc, c.gt_pairs, c.detections);
            }
            Ok(())
        }
        None => Err(EsmError::EmptyGroundTruth),
    }
}

fn render(dir: &Path) -> Result<()> {
    let meta = RunBundle::load(dir)?.render(dir)?;
    println!("global.pgm {}x{} (start at pixel {:?})", meta.cols, meta.rows, meta.origin_pixel);
    Ok(())
}

fn train_pu(config: &Path) -> Result<()> {
    let cfg = TrainPuConfig::load(config)?;
    let maze = esm_core::world::parse_maze(&fs::read_to_string(&cfg.maze)?)?;
    let sensor = cfg.sensor.to_sensor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let history = sample_place_history(&maze, &sensor, cfg.samples / 2, cfg.mining.eps_pos, &mut rng)?;
    let triplets = mine_triplets(&history, &cfg.mining, &mut rng)?;
    let outcome = train_encoder(&triplets, &cfg.train)?;
    if let Some(parent) = cfg.output.parent() {
        fs::create_dir_all(parent)?;
    }
    outcome.params.save(&cfg.output)?;
    let curve = cfg.output.with_extension("loss.csv");
    write_loss_curve(fs::File::create(&curve)?, &outcome.loss_curve)?;
    println!(
        "{} triplets, loss {:.4} -> {:.4}; wrote {} and {}",
        triplets.len(),
        outcome.initial_loss,
        outcome.loss_curve.last().copied().unwrap_or(outcome.initial_loss),
        cfg.output.display(),
        curve.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Eval { run_dir } => eval(&run_dir),
        Command::TrainPu { config } => train_pu(&config),
        Command::Pr { run_dir } => pr(&run_dir),
        Command::Render { run_dir } => render(&run_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            match e.step() {
                Some(step) => eprintln!("runtime error at step {step}: {e}"),
                None => eprintln!("runtime error: {e}"),
            }
            ExitCode::from(3)
        }
    }
}
