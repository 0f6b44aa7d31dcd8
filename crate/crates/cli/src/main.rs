use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hgr_core::io::{run_experiment, ExperimentConfig, Pipeline, PromptMode, Stage, StageOutcome};
use hgr_core::HgrError;

/// Radar hand-gesture recognition experiments.
#[derive(Parser, Debug)]
#[command(name = "radar-hgr", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML table mapping recording id to intended class.
    #[arg(long, global = true, conflicts_with = "interactive")]
    answer_file: Option<PathBuf>,
    /// Ask for the intended class of each flagged gesture on the terminal.
    #[arg(long, global = true)]
    interactive: bool,
    /// Re-run stages even when their stamp matches.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan the synthetic corpus (and write cubes when configured).
    Simulate,
    /// Extract features and labels for every recording.
    Preprocess,
    /// Train the baseline classifier.
    Train,
    /// Calibrate the baseline to each shifted user.
    Calibrate,
    /// Sweep calibration settings over the configured grid.
    Sweep,
    /// Train the anomaly detector and judge calibration and anomalous gestures.
    Detect,
    /// Characterize flagged gestures with attributions.
    Explain,
    /// Collect every stage's rows into report.csv / report.json.
    Report,
    /// Run several stages in dependency order (all pipeline stages by default).
    Run {
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prompt_mode(common: &Common) -> Result<PromptMode> {
    Ok(match (&common.answer_file, common.interactive) {
        (Some(p), _) => PromptMode::answer_file(p)?,
        (None, true) => PromptMode::Interactive,
        (None, false) => PromptMode::Batch,
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().context("configuring worker threads")?;
    }
    let cfg = load_config(&cli.common)?;
    let stages: Vec<Stage> = match &cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
        Command::Run { stages } if stages.is_empty() => Stage::PIPELINE.to_vec(),
        Command::Run { stages } => stages.iter().map(|s| s.parse()).collect::<hgr_core::Result<_>>()?,
        Command::Simulate => vec![Stage::Simulate],
        Command::Preprocess => vec![Stage::Preprocess],
        Command::Train => vec![Stage::Train],
        Command::Calibrate => vec![Stage::Calibrate],
        Command::Sweep => vec![Stage::Sweep],
        Command::Detect => vec![Stage::Detect],
        Command::Explain => vec![Stage::Explain],
        Command::Report => vec![Stage::Report],
    };
    let prompt = prompt_mode(&cli.common)?;
    if !cli.common.force {
        let rows = run_experiment(cfg.clone(), &stages, prompt)?;
        report_done(&cfg, &stages, rows.len());
        return Ok(());
    }
    let mut p = Pipeline::new(cfg.clone())?;
    p.prompt = prompt;
    p.force = true;
    for (stage, outcome) in p.run(&stages)? {
        if outcome == StageOutcome::Ran {
            log::info!("{stage} re-run");
        }
    }
    report_done(&cfg, &stages, 0);
    Ok(())
}

fn report_done(cfg: &ExperimentConfig, stages: &[Stage], rows: usize) {
    let names: Vec<&str> = stages.iter().map(|s| s.name()).collect();
    eprintln!("finished {} in {}", names.join(", "), cfg.out_dir.display());
    if rows > 0 {
        eprintln!("report: {rows} rows in {}", cfg.out_dir.join("report").display());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.chain().find_map(|c| c.downcast_ref::<HgrError>()).map_or(3, HgrError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
