//! `abscon`: generate, abstract, concretize, check, execute and evaluate
//! candidate models.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abscon_core::evaluation::Method;
use abscon_core::Domain;

use config::Overrides;

#[derive(Parser, Debug)]
#[command(
    name = "abscon",
    version,
    about = "Merge candidate models and concretize a consistent one"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// flowchart, taxonomy or clevr
    #[arg(long)]
    domain: Option<Domain>,
    /// JSON run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solver timeout in seconds
    #[arg(long = "timeout-solve")]
    timeout_solve: Option<f64>,
    /// Per-pair matching timeout in seconds
    #[arg(long = "timeout-match")]
    timeout_match: Option<f64>,
}

impl Common {
    fn overrides(&self, n: Option<usize>, temperature: Option<f64>) -> Overrides {
        Overrides {
            timeout_solve: self.timeout_solve,
            timeout_match: self.timeout_match,
            n,
            temperature,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load or sample candidates, abstract, concretize and check.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Candidate directory; sampled into the output directory when absent
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Merge a candidate directory into `partial.json`.
    Abstract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a consistent graph from a partial model.
    Concretize {
        #[command(flatten)]
        common: Common,
        /// partial.json written by `abstract`
        partial: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a graph file against its domain's rules.
    Check {
        #[command(flatten)]
        common: Common,
        graph: PathBuf,
    },
    /// Compare methods over a dataset manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        manifest: PathBuf,
        /// Comma-separated: greedy, mv, esc, escf, abscon
        #[arg(long, value_delimiter = ',', default_value = "greedy,mv,abscon")]
        method: Vec<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a program on a scene.
    Exec {
        program: PathBuf,
        #[arg(long)]
        scene: PathBuf,
    },
    /// Sample candidates from the configured endpoint.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Model description; overrides the config file
        #[arg(long)]
        description: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        temperature: Option<f64>,
    },
}

/// Exit codes: 0 ok, 1 usage or IO, 2 infeasible, 3 inconsistent or
/// execution error.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Infeasible(String),
    Inconsistent(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Inconsistent(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Infeasible(_) => "infeasible",
            Failure::Inconsistent(_) => "inconsistent",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) => format!("{e:#}"),
            Failure::Infeasible(m) | Failure::Inconsistent(m) => m.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pipeline {
            common,
            candidates,
            out,
            n,
            temperature,
        } => commands::pipeline(&common, candidates.as_deref(), &out, common.overrides(n, temperature)),
        Command::Abstract {
            common,
            candidates,
            out,
        } => commands::abstract_cmd(&common, &candidates, &out),
        Command::Concretize { common, partial, out } => commands::concretize_cmd(&common, &partial, &out),
        Command::Check { common, graph } => commands::check_cmd(&common, &graph),
        Command::Evaluate {
            common,
            manifest,
            method,
            out,
        } => commands::evaluate(&common, &manifest, &method, out.as_deref()),
        Command::Exec { program, scene } => commands::exec(&program, &scene),
        Command::Generate {
            common,
            out,
            description,
            n,
            temperature,
        } => commands::generate(&common, &out, description, common.overrides(n, temperature)).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let diag = serde_json::json!({"error": f.kind(), "message": f.message()});
            eprintln!("{diag}");
            ExitCode::from(f.code())
        }
    }
}
