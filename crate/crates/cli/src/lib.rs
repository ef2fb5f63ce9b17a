//! Command-line front end: argument parsing, configuration, run manifests,
//! experiment recipes and replay.
//!
//! Every command resolves its settings (flag, then config file, then
//! default), runs in named stages, and writes a JSON manifest listing its
//! inputs and artifacts with SHA-256 checksums. The manifest is written on
//! failure too, naming the stage that failed.

pub mod args;
pub mod commands;
pub mod errors;
pub mod manifest;
pub mod recipes;
pub mod replay;
pub mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use errors::{exit_code, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use manifest::{beside, ErrorRecord, Run, RunManifest};
use settings::Settings;

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        // fails only when a pool already exists, e.g. inside a recipe
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let command = argv.iter().skip(1).map(|s| s.to_string_lossy().into_owned()).collect();
    execute(&cli, command).0
}

/// Where a command's manifest goes when `--manifest` is absent.
pub fn default_manifest(cmd: &Command) -> PathBuf {
    match cmd {
        Command::Prepare(a) => beside(&a.out),
        Command::AugmentClassical(a) => beside(&a.out),
        Command::TrainGan(a) => beside(&a.out),
        Command::Generate(a) => beside(&a.out),
        Command::TrainRecognizer(a) => beside(&a.out),
        Command::Evaluate(a) => beside(&a.report),
        Command::Metrics(a) => beside(&a.out),
        Command::GridSearch(a) => a.out.join("manifest.json"),
        Command::Visualize(a) => beside(&a.out),
        Command::RunRecipe(a) => a.out.join("manifest.json"),
        Command::Replay(a) => replay::replay_manifest_path(&a.manifest_path),
    }
}

fn drive(run: &mut Run, cli: &Cli) -> Result<()> {
    if let Some(c) = &cli.config {
        run.input(c)?;
        run.settings = Settings::load(c, cli.command.name())?;
    }
    run.stage = "run".into();
    match &cli.command {
        Command::Prepare(a) => commands::prepare(run, a),
        Command::AugmentClassical(a) => commands::augment_classical(run, a),
        Command::TrainGan(a) => commands::train_gan(run, a),
        Command::Generate(a) => commands::generate(run, a),
        Command::TrainRecognizer(a) => commands::train_recognizer_cmd(run, a),
        Command::Evaluate(a) => commands::evaluate(run, a),
        Command::Metrics(a) => commands::metrics(run, a),
        Command::GridSearch(a) => commands::grid_search(run, a),
        Command::Visualize(a) => commands::visualize(run, a),
        Command::RunRecipe(a) => recipes::run_recipe(run, cli, a),
        Command::Replay(_) => unreachable!("replay has no run manifest of its own"),
    }
}

/// Runs a parsed command. `command` is the argument list recorded in the
/// manifest. Replay returns no manifest; every other command does.
pub fn execute(cli: &Cli, command: Vec<String>) -> (i32, Option<RunManifest>) {
    if let Command::Replay(a) = &cli.command {
        return match replay::replay(&a.manifest_path) {
            Ok(code) => (code, None),
            Err(e) => {
                eprintln!("error: {e:#}");
                (exit_code(&e), None)
            }
        };
    }
    let path = cli.manifest.clone().unwrap_or_else(|| default_manifest(&cli.command));
    let mut run = Run::new(command);
    let outcome = drive(&mut run, cli);
    let mut code = EXIT_OK;
    let error = outcome.err().map(|e| {
        code = exit_code(&e);
        eprintln!("error: {e:#}");
        ErrorRecord {
            stage: run.stage.clone(),
            message: format!("{e:#}"),
            exit_code: code,
        }
    });
    run.finish(error);
    if let Err(e) = run.manifest.save(&path) {
        eprintln!("error: {e:#}");
        if code == EXIT_OK {
            code = EXIT_DATA;
        }
    } else {
        log::info!("manifest written to {}", path.display());
    }
    (code, Some(run.manifest))
}
