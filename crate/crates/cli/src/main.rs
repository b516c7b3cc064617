use std::path::PathBuf;
use std::process::ExitCode;

use bslab::{CliError, FlagRun, Format, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bslab", version, about = "Birman-Schwinger bound-state lab", args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    sub: Option<Sub>,
    /// Measure descriptor as JSON, e.g. '{"type":"circle","r":1,"n":512}'
    #[arg(long)]
    measure: Option<String>,
    #[arg(long)]
    command: Option<String>,
    /// Coupling constants, comma separated
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Wavenumbers, comma separated
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<String>,
    /// Output format; defaults to json for a .json path and csv otherwise
    #[arg(long)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Sub {
    /// Run a JSON config file
    Run {
        config: PathBuf,
        /// Write here instead of the path named in the config
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(cli: Cli) -> Result<RunConfig, CliError> {
    match cli.sub {
        Some(Sub::Run { config, out }) => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let mut c = RunConfig::from_json(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            if let Some(out) = out {
                c.output.path = out;
            }
            Ok(c)
        }
        None => {
            let missing = |name: &str| CliError::Config(format!("--{name} is required without a config file"));
            FlagRun {
                measure: cli.measure.ok_or_else(|| missing("measure"))?,
                command: cli.command.ok_or_else(|| missing("command"))?,
                alpha: cli.alpha,
                k: cli.k,
                out: cli.out.ok_or_else(|| missing("out"))?,
                format: cli.format.map(|f| match f {
                    FormatArg::Csv => Format::Csv,
                    FormatArg::Json => Format::Json,
                }),
            }
            .to_config()
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("BSLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("BSLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("BSLAB_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| load(cli)).and_then(|c| {
        bslab::run(&c)?;
        Ok(c.output.path)
    });
    match result {
        Ok(path) => {
            eprintln!("wrote {path}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
