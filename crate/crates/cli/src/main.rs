//! `ifa`: simulate, fit and evaluate noisy IFA densities, classify, and run
//! benchmarks.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command as ClapCommand};

use config::{keys_for, Command, Settings};
use error::CliError;

fn build_cli() -> ClapCommand {
    let mut app = ClapCommand::new("ifa")
        .about("Noisy independent factor analysis density estimation")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(
            "Exit codes: 0 ok, 2 validation error, 3 I/O error, 4 numeric or estimation error.\n\
             All randomness derives from --seed; set RUST_LOG to change log verbosity.",
        );
    for cmd in Command::ALL {
        let mut sub = ClapCommand::new(cmd.name())
            .about(cmd.about())
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("PATH")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("flat 'key = value' file with # comments; flags override it"),
            )
            .arg(
                Arg::new("out")
                    .long("out")
                    .value_name("DIR")
                    .default_value(".")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("output directory (created if missing)"),
            )
            .arg(
                Arg::new("threads")
                    .long("threads")
                    .value_name("N")
                    .default_value("0")
                    .value_parser(clap::value_parser!(usize))
                    .help("worker threads, 0 = one per core"),
            );
        for key in keys_for(cmd) {
            let default = key.default.map_or(String::new(), |d| format!(" [default: {d}]"));
            sub = sub.arg(
                Arg::new(key.name)
                    .long(key.name)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help(format!("{} (range: {}){default}", key.help, key.range)),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn run(matches: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cmd = Command::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .expect("registered subcommand");

    let threads = *sub.get_one::<usize>("threads").expect("defaulted");
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("threads: {e}")))?;
    }
    let flags: Vec<(String, String)> = keys_for(cmd)
        .filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    let settings = Settings::merge(cmd, sub.get_one::<PathBuf>("config").map(PathBuf::as_path), flags)?;
    let seed = settings.u64("seed", 0)?;
    let out = sub.get_one::<PathBuf>("out").expect("defaulted");

    match cmd {
        Command::Simulate => commands::simulate(&settings, seed, out),
        Command::FitDensity => commands::fit_density(&settings, seed, out),
        Command::EvalDensity => commands::eval_density(&settings, out),
        Command::Classify => commands::classify(&settings, seed, out),
        Command::Benchmark => commands::benchmark(&settings, seed, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let matches = build_cli().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        build_cli().debug_assert();
    }
}
