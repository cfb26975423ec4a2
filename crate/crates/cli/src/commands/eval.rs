use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};
use sacnet::data::{load_gray, load_mask};
use sacnet::metrics::EvalReport;

use super::{list_files, prefer_subdir, stem};
use crate::failure::{CmdResult, Context, Failure};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of predicted P5 maps named `<id>.pgm`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of P5 masks, or a dataset root containing masks/.
    #[arg(long)]
    pub gt: PathBuf,
    /// Report directory; receives metrics.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn by_id(dir: &std::path::Path) -> CmdResult<BTreeMap<String, PathBuf>> {
    if !dir.is_dir() {
        return Err(Failure::data(format!("directory not found: {}", dir.display())));
    }
    Ok(list_files(dir, "pgm")?.into_iter().map(|p| (stem(&p), p)).collect())
}

pub fn run(args: Args) -> CmdResult<Value> {
    let preds = by_id(&args.pred)?;
    let gts = by_id(&prefer_subdir(&args.gt, "masks"))?;
    let missing_gt: Vec<&String> = preds.keys().filter(|id| !gts.contains_key(*id)).collect();
    let missing_pred: Vec<&String> = gts.keys().filter(|id| !preds.contains_key(*id)).collect();
    if !missing_gt.is_empty() || !missing_pred.is_empty() {
        let list = |v: &[&String]| v.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
        return Err(Failure::data(format!(
            "unmatched ids; without ground truth: [{}]; without prediction: [{}]",
            list(&missing_gt),
            list(&missing_pred)
        )));
    }
    if preds.is_empty() {
        return Err(Failure::data(format!("no .pgm maps in {}", args.pred.display())));
    }
    let mut pairs = Vec::with_capacity(preds.len());
    for (id, p) in &preds {
        pairs.push((id.clone(), load_gray(p)?, load_mask(&gts[id])?));
    }
    let report = EvalReport::evaluate(&pairs).context("evaluating")?;
    report.save(&args.out)?;
    let s = &report.summary;
    Ok(json!({
        "images": s.images,
        "undefined": s.undefined,
        "fbeta_max": s.fbeta_max,
        "fbeta_adaptive": s.fbeta_adaptive,
        "smeasure": s.smeasure,
        "mae": s.mae,
        "ber": s.ber,
        "out": args.out,
    }))
}
