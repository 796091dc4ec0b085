mod args;
mod commands;
mod run_dir;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use fsmix_core::Error as CoreError;

use args::{Cli, Command};
use run_dir::RunDir;

/// Exit status and error kind for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::MissingFile(_) => (3, "missing_input"),
                CoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => (3, "missing_input"),
                CoreError::CorruptStore(_) | CoreError::Wav(_) | CoreError::Csv(_) | CoreError::Json(_) => {
                    (5, "bad_data")
                }
                CoreError::Io(_) => (1, "io"),
                _ => (4, "validation"),
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return (3, "missing_input");
            }
            return (1, "io");
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return (5, "bad_data");
        }
    }
    (1, "internal")
}

fn one_line(msg: &str) -> String {
    msg.split('\n')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.global.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.jobs)
            .build_global()?;
    }
    let run = RunDir::new(cli.global.run_dir.clone())?;
    match &cli.command {
        Command::PrepSources(a) => commands::prep_sources(&run, a),
        Command::GenSed(a) => commands::gen_sed(&run, a),
        Command::ExtractClips(a) => commands::extract_clips(&run, a),
        Command::Featurize(a) => commands::featurize(&run, a),
        Command::TrainBase(a) => commands::train_base(&run, a),
        Command::TrainDfsl(a) => commands::train_dfsl(&run, a),
        Command::Eval(a) => commands::eval(&run, a),
        Command::Report(a) => commands::report(&run, a),
        Command::SynthWorld(a) => commands::synth_world(&run, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("error kind=usage msg=\"{}\"", one_line(first));
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.global.log)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("error kind={kind} msg=\"{}\"", one_line(&format!("{err:#}")));
            ExitCode::from(code)
        }
    }
}
