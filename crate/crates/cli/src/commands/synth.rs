use std::path::PathBuf;

use serde_json::{json, Value};
use sacnet::data::{synth_dataset, write_dataset, SynthConfig};

use super::create_dir;
use crate::failure::{CmdResult, Failure};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub out: PathBuf,
    /// TOML generator settings; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: Args) -> CmdResult<Value> {
    let mut cfg = match &args.config {
        None => SynthConfig::default(),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
        }
    };
    if let Some(n) = args.count {
        cfg.count = n;
    }
    if let Some(s) = args.size {
        cfg.size = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let samples = synth_dataset(&cfg)?;
    create_dir(&args.out)?;
    write_dataset(&args.out, &samples)?;
    Ok(json!({ "samples": samples.len(), "size": cfg.size, "seed": cfg.seed, "out": args.out }))
}
