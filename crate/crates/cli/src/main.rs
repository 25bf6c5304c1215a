use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use speedlimit::scenario::{self, OutputFormat, ScenarioConfig};
use speedlimit::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "speedlimit", version, about = "Evaluate and audit speed limits for scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report.
    Run(RunArgs),
    /// Parse and validate a scenario without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every value of the scenario's [sweep] section.
    Sweep(RunArgs),
    /// Write a random detailed-balance master scenario (for testing).
    RandomChain {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

fn exit_code(outcome: &Result<bool, Error>) -> u8 {
    match outcome {
        Ok(true) => 0,
        Ok(false) => EXIT_VIOLATION,
        Err(e) if e.is_input_error() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERICAL,
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    scenario::parse_scenario(path)
}

fn prepare_out(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("creating {}: {e}", dir.display())))
}

fn run(args: &RunArgs) -> Result<bool, Error> {
    let cfg = load(&args.config)?;
    prepare_out(&args.out)?;
    let record = scenario::run_scenario(&cfg)?;
    let path = scenario::emit(&record, &args.out, args.format.into())?;
    println!(
        "{}: {} bound entries, {} validity violations, {} ordering violations -> {}",
        cfg.id,
        record.report.entries.len(),
        record.report.validity_violations,
        record.report.ordering_violations,
        path.display()
    );
    for note in &record.report.notes {
        println!("  note: {note}");
    }
    Ok(record.all_valid())
}

fn sweep(args: &RunArgs) -> Result<bool, Error> {
    let cfg = load(&args.config)?;
    prepare_out(&args.out)?;
    let record = scenario::run_sweep(&cfg)?;
    let paths = scenario::emit_sweep(&record, &args.out, args.format.into())?;
    for run in &record.runs {
        println!(
            "{}: {} validity violations, {} ordering violations",
            run.config.id, run.report.validity_violations, run.report.ordering_violations
        );
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(record.all_valid())
}

fn random_chain(seed: u64, states: usize, out: &Path) -> Result<(), Error> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let tm = speedlimit::master::random_detailed_balance_chain(states, &mut rng)?;
    let n = tm.n_states();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let row: Vec<String> = (0..n).map(|j| format!("{:?}", tm.rates()[(i, j)])).collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    let pi: Vec<String> = tm.pi().iter().map(|p| format!("{p:?}")).collect();
    let mut p0 = vec!["0.0".to_string(); n];
    p0[0] = "1.0".into();
    let text = format!(
        "id = \"chain-{seed}\"\nfamily = \"master\"\n\n[time]\nstart = 0.0\nstop = 5.0\nsamples = 64\n\n[master]\nrates = [{}]\npi = [{}]\np0 = [{}]\n",
        rows.join(", "),
        pi.join(", "),
        p0.join(", ")
    );
    scenario::write_atomic(out, &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Validate { config } => load(config).map(|cfg| {
            println!("{}: valid {} scenario", cfg.id, cfg.family_name());
            true
        }),
        Command::RandomChain { seed, states, out } => random_chain(*seed, *states, out).map(|_| true),
    };
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&outcome))
}
