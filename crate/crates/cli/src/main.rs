use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use popfact_core::factuality::EvidenceConfig;
use popfact_core::http::FetchMode;
use popfact_core::pipeline::{exit_code, run_all, run_stage, Context, RunConfig, Selection, Stage};
use popfact_core::Result;

#[derive(Parser, Debug)]
#[command(
    name = "popfact",
    version,
    about = "Popularity-controlled entity datasets and long-form factuality evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration. Defaults apply when omitted.
    #[arg(long, global = true, env = "POPFACT_CONFIG")]
    config: Option<PathBuf>,

    /// Serve every request from the response cache; a miss is an error.
    #[arg(long, global = true)]
    replay: bool,

    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restrict to these classes (repeatable).
    #[arg(long = "class", global = true)]
    classes: Vec<String>,

    /// Restrict to these languages (repeatable).
    #[arg(long = "lang", global = true)]
    languages: Vec<String>,

    /// Restrict evaluation to these evidence configurations (repeatable).
    #[arg(long = "evidence", value_enum, global = true)]
    evidence: Vec<EvidenceArg>,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Accept upstream artifacts produced under a different config.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Pull class members from Wikidata and enrich them.
    Ingest,
    /// Collect per-language popularity signals.
    Stats,
    /// Partition into Head/Torso/Tail and correlate the proxies.
    Tier,
    /// Draw the dataset under filters and tier quotas.
    Sample,
    /// Collect evidence pages for every sampled entity.
    Evidence,
    /// Prompt each generator for descriptions.
    Generate,
    /// Extract atomic facts and verify them against the evidence.
    Evaluate,
    /// Compare stated river lengths with Wikidata.
    ProbeLengths,
    /// Vocabulary growth of the generations.
    ProbeLex,
    /// Collate tables across classes.
    Report,
    /// Every stage in order.
    Run,
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum EvidenceArg {
    OnePage,
    Search,
    Links,
}

impl From<EvidenceArg> for EvidenceConfig {
    fn from(a: EvidenceArg) -> Self {
        match a {
            EvidenceArg::OnePage => EvidenceConfig::OnePage,
            EvidenceArg::Search => EvidenceConfig::PlusSearch,
            EvidenceArg::Links => EvidenceConfig::PlusLinks,
        }
    }
}

fn stage_of(cmd: Command) -> Option<Stage> {
    Some(match cmd {
        Command::Ingest => Stage::Ingest,
        Command::Stats => Stage::Stats,
        Command::Tier => Stage::Tier,
        Command::Sample => Stage::Sample,
        Command::Evidence => Stage::Evidence,
        Command::Generate => Stage::Generate,
        Command::Evaluate => Stage::Evaluate,
        Command::ProbeLengths => Stage::ProbeLengths,
        Command::ProbeLex => Stage::ProbeLex,
        Command::Report => Stage::Report,
        Command::Run | Command::Config => return None,
    })
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.plan.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if cli.command == Command::Config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    let selection = Selection {
        classes: non_empty(cli.classes),
        languages: non_empty(cli.languages),
        evidence: non_empty(cli.evidence.into_iter().map(EvidenceConfig::from).collect()),
    };
    let fetch = if cli.replay { FetchMode::Replay } else { FetchMode::Live };
    let mut ctx = Context::new(config, fetch, cli.force, selection)?;
    match stage_of(cli.command) {
        Some(stage) => {
            for m in run_stage(&mut ctx, stage)? {
                let place = m.class.as_deref().unwrap_or("all classes");
                println!("{stage} [{place}]: {} outputs, {} warnings", m.outputs.len(), m.warnings.len());
            }
        }
        None => {
            run_all(&mut ctx)?;
            println!("all stages done; report in {}", ctx.stage_dir(None, Stage::Report).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
