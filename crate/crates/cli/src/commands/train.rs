use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sacnet::net::{save_weights, SaliencyNet};
use sacnet::train::{train_loop, write_trace_csv, Preset, TrainObserver, UpdateRecord};
use sacnet::ParamStore;

use super::{create_dir, load_training_data};
use crate::config::RunConfig;
use crate::failure::{CmdResult, Context};

pub const LOSS_CSV: &str = "loss.csv";
pub const FINAL_WEIGHTS: &str = "weights.bin";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root with images/, masks/ and index.txt.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimizer preset: sgd, adam, paper-sgd or paper-adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Overrides the optimizer's iteration budget.
    #[arg(long)]
    pub iterations: Option<usize>,
}

/// Applies the flags shared by `train` and `ablate` on top of the file.
pub fn resolve(config: Option<&Path>, seed: Option<u64>, optimizer: Option<&str>, iterations: Option<usize>) -> CmdResult<RunConfig> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(name) = optimizer {
        let preset: Preset = name.parse()?;
        cfg.train.optimizer = preset.config();
    }
    if let Some(n) = iterations {
        cfg.train.optimizer.set_max_iterations(n);
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Checkpoints {
    dir: PathBuf,
    hash: u64,
    total: usize,
}

impl TrainObserver for Checkpoints {
    fn on_update(&mut self, r: &UpdateRecord, _: &ParamStore<f32>) -> sacnet::Result<()> {
        if r.update % 100 == 0 || r.update == self.total {
            eprintln!("update {}/{} loss {:.2} lr {:.1e}", r.update, self.total, r.loss, r.lr);
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, update: usize, params: &ParamStore<f32>) -> sacnet::Result<()> {
        save_weights(params, self.hash, &self.dir.join(format!("update_{update:06}.bin")))
    }
}

pub fn run(args: Args) -> CmdResult<Value> {
    let cfg = resolve(args.config.as_deref(), args.seed, args.optimizer.as_deref(), args.iterations)?;
    let data = load_training_data(&args.data, &cfg.net)?;
    create_dir(&args.out)?;
    cfg.write_resolved(&args.out)?;
    let ckpt_dir = args.out.join("checkpoints");
    if cfg.train.checkpoint_every > 0 {
        create_dir(&ckpt_dir)?;
    }

    let (net, mut params) = SaliencyNet::init::<f32>(&cfg.net, cfg.seed)?;
    let hash = cfg.net.hash();
    let mut observer = Checkpoints {
        dir: ckpt_dir,
        hash,
        total: cfg.train.updates(),
    };
    let outcome = train_loop(&net, &mut params, &data, &cfg.train, cfg.seed, &mut observer).context("training")?;
    write_trace_csv(&args.out.join(LOSS_CSV), &outcome.trace)?;
    save_weights(&params, hash, &args.out.join(FINAL_WEIGHTS))?;
    let last = outcome.trace.last().map_or(f64::NAN, |r| r.loss);
    Ok(json!({
        "updates": outcome.trace.len(),
        "iterations": outcome.iterations,
        "final_loss": last,
        "weights": args.out.join(FINAL_WEIGHTS),
    }))
}
