use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use vrl_core::actor::ActorMemory;
use vrl_core::dsl::{parse, validate, NodeLibrary};
use vrl_core::runtime::{
    execute, read_records, replay, run_campaign, run_episode, write_report, EpisodeLabels,
    EpisodeSetup, RunConfig,
};
use vrl_core::scoring::{score_episode, ScoringRules};
use vrl_core::sim::{load_field, shipped_fields, FieldConfig, WorldState};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_REMOTE: u8 = 4;

#[derive(Parser)]
#[command(name = "vrl", version, about = "Behavior-tree refinement loop over a simulated warehouse robot")]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a TOML run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single episode and print its record as JSON.
    Episode {
        /// Shipped field label (field-1 .. field-5) or path to a field file.
        #[arg(long)]
        field: String,
        #[arg(long)]
        bt: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run config to take critic, actor, fault model and scoring from.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the final world state here (input for `score`).
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Parse and validate a `.bt` file.
    Validate { bt: PathBuf },
    /// Score a final world state stored as JSON.
    Score {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 0)]
        shelf_bonus: i64,
    },
    /// Re-execute stored episodes and compare trace and score.
    Replay {
        records: PathBuf,
        /// Zero-based line of the record to replay; all records if absent.
        #[arg(long)]
        index: Option<usize>,
    },
    /// Write per-metric CSV tables for stored episode records.
    Report {
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing_subscriber::filter::LevelFilter::WARN,
        1 => tracing_subscriber::filter::LevelFilter::INFO,
        _ => tracing_subscriber::filter::LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .with_target(false)
        .init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Episode {
            field,
            bt,
            seed,
            config,
            state_out,
        } => cmd_episode(&field, &bt, seed, config.as_deref(), state_out.as_deref()),
        Command::Validate { bt } => cmd_validate(&bt),
        Command::Score { state, shelf_bonus } => cmd_score(&state, shelf_bonus),
        Command::Replay { records, index } => cmd_replay(&records, index),
        Command::Report { records, out } => {
            let records = read_records(&records).map_err(anyhow::Error::msg)?;
            let tables = write_report(&records, &out)?;
            println!("wrote {} tables to {}", tables.len(), out.display());
            Ok(0)
        }
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let cfg = RunConfig::load(config)?;
    let dir = out.unwrap_or_else(|| cfg.output_path());
    let result = run_campaign(&cfg)?;
    result
        .write(&dir)
        .with_context(|| format!("writing {}", dir.display()))?;
    let records: Vec<_> = result.records().collect();
    let alarms: u32 = records.iter().map(|r| r.metrics.alarm_count).sum();
    let degraded = records.iter().filter(|r| r.degraded).count();
    println!(
        "{} episodes, {alarms} alarms, {degraded} degraded; output in {}",
        records.len(),
        dir.display()
    );
    if let Some(t) = result.tables.first() {
        let cells: Vec<String> = t
            .mean
            .iter()
            .map(|v| v.map_or_else(String::new, |x| format!("{x:.1}")))
            .collect();
        println!("mean score per episode: {}", cells.join(" "));
    }
    Ok(if records.iter().any(|r| r.remote_failure()) {
        EXIT_REMOTE
    } else {
        0
    })
}

fn load_field_ref(field: &str) -> Result<FieldConfig> {
    if let Some(f) = shipped_fields().into_iter().find(|f| f.field_seed_label == field) {
        return Ok(f);
    }
    Ok(load_field(Path::new(field))?)
}

fn cmd_episode(
    field: &str,
    bt: &Path,
    seed: u64,
    config: Option<&Path>,
    state_out: Option<&Path>,
) -> Result<u8> {
    let library = NodeLibrary::warehouse();
    let src = fs::read_to_string(bt).with_context(|| format!("reading {}", bt.display()))?;
    let tree = match parse(&src) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", bt.display());
            return Ok(EXIT_VALIDATION);
        }
    };
    let report = validate(&tree, &library);
    if !report.is_valid() {
        eprintln!("{}:\n{report}", bt.display());
        return Ok(EXIT_VALIDATION);
    }
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(&[field]),
    };
    let mut field = load_field_ref(field)?;
    if let Some(t) = cfg.time_limit {
        field.time_limit = t;
    }
    let setup = EpisodeSetup {
        field,
        faults: cfg.fault_model.clone(),
        scoring: cfg.scoring.clone(),
        seed,
    };
    let labels = EpisodeLabels {
        run_id: cfg.run_id.clone(),
        config_label: setup.field.field_seed_label.clone(),
        episode_index: 1,
    };
    let mut critic = cfg.build_critic()?;
    let mut actor = cfg.build_actor()?;
    let (record, _) = run_episode(
        &tree,
        &setup,
        &labels,
        &library,
        critic.as_mut(),
        actor.as_mut(),
        &mut ActorMemory::default(),
        cfg.block_info(),
    )?;
    if let Some(path) = state_out {
        let mut t = tree.clone();
        t.reset();
        let world = execute(&mut t, &setup, |_, _, _| {})?.world;
        fs::write(path, serde_json::to_string_pretty(&world)?)?;
    }
    println!("{}", serde_json::to_string(&record)?);
    Ok(if record.remote_failure() { EXIT_REMOTE } else { 0 })
}

fn cmd_validate(bt: &Path) -> Result<u8> {
    let src = fs::read_to_string(bt).with_context(|| format!("reading {}", bt.display()))?;
    let tree = match parse(&src) {
        Ok(t) => t,
        Err(e) => {
            println!("{}: {e}", bt.display());
            return Ok(EXIT_VALIDATION);
        }
    };
    let report = validate(&tree, &NodeLibrary::warehouse());
    println!("{}: {report}", bt.display());
    Ok(if report.is_valid() { 0 } else { EXIT_VALIDATION })
}

fn cmd_score(state: &Path, shelf_bonus: i64) -> Result<u8> {
    let src = fs::read_to_string(state).with_context(|| format!("reading {}", state.display()))?;
    let world: WorldState = serde_json::from_str(&src).context("parsing world state")?;
    world.config.check()?;
    let breakdown = score_episode(&world, &ScoringRules { shelf_bonus });
    println!("{}", serde_json::to_string_pretty(&breakdown)?);
    Ok(0)
}

fn cmd_replay(records: &Path, index: Option<usize>) -> Result<u8> {
    let all = read_records(records).map_err(anyhow::Error::msg)?;
    let chosen: Vec<(usize, _)> = match index {
        Some(k) => match all.get(k) {
            Some(r) => vec![(k, r)],
            None => bail!("{} holds {} records, no index {k}", records.display(), all.len()),
        },
        None => all.iter().enumerate().collect(),
    };
    let mut diverged = false;
    for (k, r) in chosen {
        match replay(r) {
            Ok(()) => println!("#{k} {} episode {}: ok", r.config_label, r.episode_index),
            Err(e) => {
                println!("#{k} {} episode {}: {e}", r.config_label, r.episode_index);
                diverged = true;
            }
        }
    }
    Ok(if diverged { EXIT_DIVERGENCE } else { 0 })
}
