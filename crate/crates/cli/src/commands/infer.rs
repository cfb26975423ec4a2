use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sacnet::data::{load_image, save_tensor};
use sacnet::net::{load_weights, SaliencyNet};

use super::{create_dir, list_files, prefer_subdir, stem};
use crate::config::{RunConfig, RESOLVED_NAME};
use crate::failure::{CmdResult, Context, Failure};

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    pub weights: PathBuf,
    /// Directory of P6 images, or a dataset root containing images/.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration; defaults to the resolved config saved next to
    /// the weights (or one directory up, for checkpoints).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write every attention weight map under out/attention/.
    #[arg(long)]
    pub dump_attention: bool,
}

fn find_config(weights: &Path) -> CmdResult<PathBuf> {
    weights
        .ancestors()
        .skip(1)
        .take(2)
        .map(|d| d.join(RESOLVED_NAME))
        .find(|p| p.is_file())
        .ok_or_else(|| Failure::config(format!("no {RESOLVED_NAME} found beside {}; pass --config", weights.display())))
}

pub fn run(args: Args) -> CmdResult<Value> {
    let cfg_path = match args.config {
        Some(p) => p,
        None => find_config(&args.weights)?,
    };
    let cfg = RunConfig::load(Some(&cfg_path))?;
    let (net, mut params) = SaliencyNet::init::<f32>(&cfg.net, cfg.seed)?;
    load_weights(&mut params, cfg.net.hash(), &args.weights).context("loading weights")?;

    let input = prefer_subdir(&args.input, "images");
    if !input.is_dir() {
        return Err(Failure::data(format!("input directory not found: {}", input.display())));
    }
    let images = list_files(&input, "ppm")?;
    if images.is_empty() {
        return Err(Failure::data(format!("no .ppm images in {}", input.display())));
    }
    create_dir(&args.out)?;
    let mut attention_maps = 0;
    for path in &images {
        let id = stem(path);
        let image = load_image(path)?;
        let (pred, vjp) = net.forward(&params, &image).context(format!("image {}", path.display()))?;
        save_tensor(&args.out.join(format!("{id}.pgm")), &pred.saliency())?;
        if args.dump_attention {
            let dir = args.out.join("attention").join(&id);
            create_dir(&dir)?;
            for (level, rounds) in vjp.attention_maps().iter().enumerate() {
                for (round, w) in rounds.iter().enumerate() {
                    for k in 0..w.shape().c {
                        let map = w.slice_channels(k, 1)?;
                        save_tensor(&dir.join(format!("level{level}_round{round}_k{}.pgm", k + 1)), &map)?;
                        attention_maps += 1;
                    }
                }
            }
        }
    }
    Ok(json!({
        "images": images.len(),
        "attention_maps": attention_maps,
        "out": args.out,
    }))
}
