//! `cvfl` command-line driver: run presets or config files, sweep the
//! scheduler over RB and model sizes, and run the oracle suites.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cvfl::learner::write_checkpoint;
use cvfl::orchestrator::{
    run_sweep, Algorithm, ExperimentConfig, Simulation, SweepSpec, SUMMARY_COLUMNS, SWEEP_COLUMNS,
};
use cvfl::verify;

#[derive(Parser)]
#[command(name = "cvfl", version, about = "Clustered vehicular federated learning simulator")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write rounds.jsonl, summary.csv and config.json.
    Run(RunArgs),
    /// Mean heads and participants per round over a grid of RB pools and model sizes.
    Sweep(SweepArgs),
    /// Run oracle suites (all of them when none is named).
    Verify {
        /// Any of: knapsack, matching, gradients, clustering.
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List or print the built-in presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a JSON config.
    Dump { name: String },
}

#[derive(Args)]
struct Source {
    /// Preset name or path to a JSON config.
    target: Option<String>,
    #[arg(long, conflicts_with_all = ["target", "config"])]
    preset: Option<String>,
    #[arg(long, conflicts_with = "target")]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        if let Some(name) = &self.preset {
            return preset(name);
        }
        if let Some(path) = &self.config {
            return load_config(path);
        }
        match &self.target {
            Some(t) if ExperimentConfig::PRESETS.contains(&t.as_str()) => preset(t),
            Some(t) => load_config(Path::new(t)),
            None => bail!("name a preset ({}) or a config file", ExperimentConfig::PRESETS.join(", ")),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Base seed; replaces all four seeds of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    total_rbs: Option<usize>,
    #[arg(long)]
    model_size_bits: Option<f64>,
    /// Also run the vanilla baseline on the same seeds.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
    total_rbs: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [160e3, 320e3, 640e3])]
    model_size_bits: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn preset(name: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::preset(name).with_context(|| {
        format!("unknown preset `{name}`; available: {}", ExperimentConfig::PRESETS.join(", "))
    })
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = args.source.load()?;
    if let Some(seed) = args.seed {
        config = config.with_seed(seed);
    }
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
        config.clustering_round = config.clustering_round.min(rounds);
    }
    if let Some(q) = args.total_rbs {
        config.radio.total_rbs = q;
    }
    if let Some(s) = args.model_size_bits {
        config.radio.model_size_bits = s;
    }
    config.validate().context("invalid configuration after overrides")?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("config.json"), config.to_json()? + "\n")?;
    let mut rounds = BufWriter::new(File::create(args.out.join("rounds.jsonl"))?);
    let mut summary = csv::Writer::from_path(args.out.join("summary.csv"))?;
    summary.write_record(SUMMARY_COLUMNS)?;
    let mut timings = csv::Writer::from_path(args.out.join("timings.csv"))?;
    timings.write_record(["algorithm", "round", "head_selection_s", "matching_s"])?;
    let checkpoints = args.out.join("checkpoints");
    fs::create_dir_all(&checkpoints)?;

    let mut algorithms = vec![Algorithm::Cvfl];
    if args.baseline {
        algorithms.push(Algorithm::Vanilla);
    }
    for algorithm in algorithms {
        let mut sim = Simulation::new(config.clone(), algorithm)?;
        sim.run(|r| {
            log::info!(
                "{} round {}: {} heads, {} participants, accuracy {:?}",
                algorithm.name(),
                r.round,
                r.heads.len(),
                r.participants,
                r.accuracy
            );
            writeln!(rounds, "{}", serde_json::to_string(r)?)?;
            summary.write_record(r.summary_row()).map_err(io::Error::from)?;
            timings
                .write_record([
                    algorithm.name().to_string(),
                    r.round.to_string(),
                    r.timings.head_selection_s.to_string(),
                    r.timings.matching_s.to_string(),
                ])
                .map_err(io::Error::from)?;
            Ok(())
        })?;
        for model in sim.models() {
            let path = checkpoints.join(format!("{}-v{}.ckpt", algorithm.name(), model.version));
            write_checkpoint(model, BufWriter::new(File::create(&path)?))?;
        }
        if let Some(last) = sim.config().learning.then(|| sim.evaluate()).transpose()? {
            println!("{}: final accuracy {:.4}", algorithm.name(), last.0);
        }
    }
    rounds.flush()?;
    summary.flush()?;
    timings.flush()?;
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut config = args.source.load()?;
    if let Some(rounds) = args.rounds {
        config.rounds = rounds;
        config.clustering_round = config.clustering_round.min(rounds);
    }
    config.validate().context("invalid configuration after overrides")?;
    let spec = SweepSpec {
        total_rbs: args.total_rbs,
        model_size_bits: args.model_size_bits,
        repeats: args.repeats,
    };
    let cells = run_sweep(&config, &spec, args.seed)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(SWEEP_COLUMNS)?;
    for cell in &cells {
        out.write_record(cell.row())?;
    }
    out.flush()?;
    Ok(())
}

fn run_verify(suites: Vec<String>, seed: u64) -> Result<()> {
    let names: Vec<String> = if suites.is_empty() {
        verify::SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        suites
    };
    let mut failed = 0;
    for name in &names {
        let Some(report) = verify::run_suite(name, seed) else {
            bail!("unknown suite `{name}`; available: {}", verify::SUITES.join(", "));
        };
        if report.passed() {
            println!("PASS {name} ({} cases)", report.cases);
        } else {
            failed += 1;
            println!("FAIL {name} ({} of {} cases)", report.failures.len(), report.cases);
            for f in report.failures.iter().take(5) {
                println!("  {f}");
            }
        }
    }
    if failed > 0 {
        bail!("{failed} suite(s) failed");
    }
    Ok(())
}

fn preset_command(action: PresetAction) -> Result<()> {
    match action {
        PresetAction::List => ExperimentConfig::PRESETS.iter().for_each(|p| println!("{p}")),
        PresetAction::Dump { name } => println!("{}", preset(&name)?.to_json()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify { suites, seed } => run_verify(suites, seed),
        Command::Preset { action } => preset_command(action),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
