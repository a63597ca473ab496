mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure of a CLI run; each kind maps to one exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{failed} of {total} study runs failed")]
    PartialStudy { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::PartialStudy { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Tags a library error with the pipeline stage that raised it.
pub fn stage(name: &'static str) -> impl Fn(patchdg::Error) -> CliError {
    move |e| {
        let msg = format!("{name}: {e}");
        if e.is_numerical() {
            CliError::Numerical(msg)
        } else {
            CliError::Config(msg)
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Config("threads: must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    match &cli.command {
        Command::Solve(a) => commands::solve(a, cli.threads),
        Command::Study(a) => commands::study(a, cli.threads),
        Command::PatchReport(a) => commands::patch_report(a),
        Command::GenerateMesh(a) => commands::generate_mesh(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
