use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use crashsynth::pipeline::{
    cmd_extract, cmd_plan, cmd_render, cmd_testgen, cmd_validate, ExtractionMode, PipelineConfig, PipelineError,
};

#[derive(Parser)]
#[command(name = "crashsynth", version, about = "Reconstruct crash scenarios from accident reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    /// Abstract JSON file or directory of them.
    #[arg(long = "abstract", global = true)]
    abstract_path: Option<PathBuf>,
    /// Directory of `<name>/report.txt` (+ `gold.json`).
    #[arg(long, global = true)]
    reports: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, value_enum, global = true)]
    mode: Option<ExtractionMode>,
    #[arg(long, global = true)]
    max_scenarios: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract abstracts from report texts.
    Extract,
    /// Reconstruct scenarios for abstracts on a map.
    Plan,
    /// Replay scenarios, run SIM and report the reconstruction rate.
    Validate {
        /// Directory of scenario files.
        #[arg(long)]
        scenarios: PathBuf,
    },
    /// Generate one test case per vehicle.
    Testgen {
        /// Scenario file or directory.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Draw scenarios as SVG.
    Render {
        /// Scenario file or directory.
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($f:ident => $g:ident),*) => { $( if c.$f.is_some() { cfg.$g = c.$f.clone(); } )* };
    }
    set!(map => map, abstract_path => abstract_path, reports => reports, out => out,
         seed => seed, jobs => jobs, max_scenarios => max_scenarios);
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    cfg.deterministic |= c.deterministic;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli.common)?;
    match cli.command {
        Command::Extract => {
            let s = cmd_extract(&cfg)?;
            println!("extracted {} abstract(s), {} failure(s)", s.written.len(), s.failures.len());
        }
        Command::Plan => {
            let r = cmd_plan(&cfg)?;
            let n: usize = r.abstracts.iter().map(|a| a.scenarios.len()).sum();
            println!("{n} scenario(s) from {} abstract(s), seed {}", r.abstracts.len(), r.seed);
        }
        Command::Validate { scenarios } => print!("{}", cmd_validate(&cfg, &scenarios)?.to_table()),
        Command::Testgen { scenario } => println!("{} test case(s)", cmd_testgen(&cfg, &scenario)?.len()),
        Command::Render { scenario } => println!("{} drawing(s)", cmd_render(&cfg, &scenario)?.len()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(4, PipelineError::exit_code);
            ExitCode::from(code)
        }
    }
}
