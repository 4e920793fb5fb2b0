mod cli;
mod commands;
mod config;
mod data;
mod demo;
mod error;
mod grid;
mod run;
mod svg;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use commands::ForecastRequest;
use error::CliError;
use run::{Logger, Run};

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let error_json = argv.iter().any(|a| a == "--error-json");
    let code = match execute(argv) {
        Ok(()) => 0,
        Err(Failure::Clap(e)) => {
            let code = e.exit_code();
            if error_json && code != 0 {
                report(&CliError::Usage(e.to_string().trim().to_string()), true);
            } else {
                let _ = e.print();
            }
            code
        }
        Err(Failure::Cli(e)) => {
            report(&e, error_json);
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

enum Failure {
    Clap(clap::Error),
    Cli(CliError),
}

fn report(e: &CliError, as_json: bool) {
    if as_json {
        eprintln!("{}", e.to_json());
    } else {
        eprintln!("error: {e}");
    }
}

fn execute(argv: Vec<OsString>) -> Result<(), Failure> {
    let argv = config::load(argv).map_err(Failure::Cli)?;
    let cli = Cli::try_parse_from(argv).map_err(Failure::Clap)?;

    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    log::set_max_level(level.max(log::LevelFilter::Warn));
    let _ = log::set_boxed_logger(Box::new(Logger { level }));

    if cli.global.threads == Some(0) {
        return Err(Failure::Cli(CliError::Usage("--threads must be >= 1".into())));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.unwrap_or(0))
        .build_global()
        .map_err(|e| Failure::Cli(CliError::Usage(format!("thread pool: {e}"))))?;

    // dense kernels stay sequential so results do not depend on --threads;
    // rayon parallelism is over independent entries and grid points only
    faer::set_global_parallelism(faer::Par::Seq);

    let mut run = Run::new(&cli.global.out_dir).map_err(Failure::Cli)?;
    let result = dispatch(&mut run, &cli.command);
    let config = serde_json::to_value(&cli).expect("arguments serialize");
    let manifest = run.finish(cli.command.name(), config, result.as_ref().err());
    result.and(manifest).map_err(Failure::Cli)
}

fn dispatch(run: &mut Run, command: &Command) -> Result<(), CliError> {
    match command {
        Command::Gram { data } => commands::gram(run, data),
        Command::Eig { data, eps } => commands::eig(run, data, *eps),
        Command::Pseudospec { data, grid, rank } => commands::pseudospec(run, data, grid, *rank),
        Command::PseudospecKoop { data, grid, n1, n2 } => commands::pseudospec_koop(run, data, grid, *n1, *n2),
        Command::Forecast { data, x0, steps, observable, eps, norm_kstar } => {
            let req = ForecastRequest { x0, steps: *steps, observable, eps: *eps, norm_kstar: *norm_kstar };
            commands::forecast(run, data, &req)
        }
        Command::Measure { data, measure } => commands::measure(run, data, measure),
        Command::Demo { name, eps, order, n, window, seed, svg } => {
            let args = demo::DemoArgs { name: *name, eps: *eps, order: *order, n: *n, window: *window, seed: *seed, svg: *svg };
            demo::run_demo(run, &args)
        }
        Command::CheckNormality { data, rank } => commands::check_normality_cmd(run, data, *rank),
    }
}
