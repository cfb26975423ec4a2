use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::{json, Value};
use sacnet::train::ablation::{variants, Axis};
use sacnet::train::{fit, write_trace_csv};

use super::{create_dir, load_training_data};
use crate::commands::train::resolve;
use crate::failure::{CmdResult, Context, Failure};

pub const TABLE_HEADER: &str = "variant,fbeta_max,fbeta_adaptive,smeasure,mae,ber,final_loss";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// n, beta, rounds, directions or attention.
    #[arg(long)]
    pub axis: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}

pub fn run(args: Args) -> CmdResult<Value> {
    let axis: Axis = args.axis.parse().map_err(Failure::config)?;
    let cfg = resolve(args.config.as_deref(), args.seed, args.optimizer.as_deref(), args.iterations)?;
    let data = load_training_data(&args.data, &cfg.net)?;
    if data.len() < 2 {
        return Err(Failure::data("ablation needs at least two samples"));
    }
    let n_eval = ((data.len() as f64 * cfg.ablate.eval_fraction).round() as usize).clamp(1, data.len() - 1);
    let (train, eval) = data.split_at(data.len() - n_eval);
    create_dir(&args.out.join("traces"))?;
    cfg.write_resolved(&args.out)?;

    let mut table = format!("{TABLE_HEADER}\n");
    let mut rows = Vec::new();
    for v in variants(axis, &cfg.net) {
        eprintln!("training variant {}", v.name);
        let run = fit(&v.config, &cfg.train, train, eval, cfg.seed, &mut ()).context(format!("variant {}", v.name))?;
        let slug: String = v.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
        write_trace_csv(&args.out.join("traces").join(format!("{slug}.csv")), &run.trace)?;
        let s = &run.report.summary;
        let final_loss = run.trace.last().map(|r| r.loss);
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            v.name,
            cell(s.fbeta_max),
            cell(s.fbeta_adaptive),
            cell(s.smeasure),
            cell(s.mae),
            cell(s.ber),
            cell(final_loss)
        )
        .expect("string write");
        rows.push(json!({ "variant": v.name, "fbeta_max": s.fbeta_max }));
    }
    let path = args.out.join("ablation.csv");
    std::fs::write(&path, &table).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    print!("{table}");
    Ok(json!({
        "axis": axis.name(),
        "train": train.len(),
        "eval": eval.len(),
        "variants": rows,
        "table": path,
    }))
}
