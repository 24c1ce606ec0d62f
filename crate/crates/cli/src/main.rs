mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::CommandFactory;
use slevolve_core::SlError;

use args::{Cli, Command};
use commands::{Ctx, Outcome};
use config::Usage;

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return config::usage("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let ctx = Ctx { quiet: cli.quiet };
    let name = cli.command.name();
    let Outcome { text, ext, status } = match cli.command {
        Command::Evolve(a) => commands::evolve(a, &ctx)?,
        Command::Betas(a) => commands::betas_cmd(a, &ctx)?,
        Command::Limits(a) => commands::limits(a)?,
        Command::Search(a) => commands::search(a, &ctx)?,
        Command::Mesh(a) => commands::mesh(a, &ctx)?,
        Command::Verify(a) => commands::verify(a, &ctx)?,
        Command::Crosssection(a) => commands::crosssection(a, &ctx)?,
        Command::Affine(a) => commands::affine(a, &ctx)?,
        Command::Report(a) => commands::report(a, &ctx)?,
    };
    let path = config::target(cli.out.as_deref(), cli.out_dir.as_deref(), name, ext);
    config::write_output(path.as_deref(), &text, cli.quiet)?;
    Ok(status)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<clap::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<SlError>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    3
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let status = match config::resolve(&matches).and_then(run) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    ExitCode::from(status)
}
