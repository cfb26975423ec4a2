//! `sacnet` command-line tool. Every run ends with one JSON status line
//! on stdout.

mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use failure::{CmdResult, Failure};

#[derive(Parser, Debug)]
#[command(name = "sacnet", version, about = "Spatial attenuation context saliency networks")]
struct Cli {
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true, env = "SACNET_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network on a dataset directory.
    Train(commands::train::Args),
    /// Write saliency maps for every image of a directory.
    Infer(commands::infer::Args),
    /// Score predicted maps against ground-truth masks.
    Eval(commands::eval::Args),
    /// Compare analytic gradients with finite differences.
    Gradcheck(commands::gradcheck::Args),
    /// Train and evaluate architecture variants along one axis.
    Ablate(commands::ablate::Args),
    /// Generate a synthetic dataset.
    Synth(commands::synth::Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Infer(_) => "infer",
            Command::Eval(_) => "eval",
            Command::Gradcheck(_) => "gradcheck",
            Command::Ablate(_) => "ablate",
            Command::Synth(_) => "synth",
        }
    }

    fn run(self) -> CmdResult<Value> {
        match self {
            Command::Train(a) => commands::train::run(a),
            Command::Infer(a) => commands::infer::run(a),
            Command::Eval(a) => commands::eval::run(a),
            Command::Gradcheck(a) => commands::gradcheck::run(a),
            Command::Ablate(a) => commands::ablate::run(a),
            Command::Synth(a) => commands::synth::run(a),
        }
    }
}

fn set_threads(threads: Option<usize>) -> CmdResult<()> {
    match threads {
        Some(0) => Err(Failure::config("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = set_threads(cli.threads).and_then(|()| cli.command.run());
    let (code, status) = match result {
        Ok(mut status) => {
            let mut line = json!({ "status": "ok", "command": name });
            if let (Some(obj), Some(extra)) = (line.as_object_mut(), status.as_object_mut()) {
                obj.append(extra);
            }
            (0, line)
        }
        Err(f) => {
            eprintln!("error: {f}");
            let kind = if f.code == failure::CHECK_FAILED { "fail" } else { "error" };
            (f.code, json!({ "status": kind, "command": name, "code": f.code, "error": f.to_string() }))
        }
    };
    println!("{status}");
    ExitCode::from(code as u8)
}

