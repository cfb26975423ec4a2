use serde_json::{json, Value};
use sacnet::checks::{run_scope, Scope};

use crate::failure::{CmdResult, Failure, CHECK_FAILED};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// scan, attention, sac or net.
    #[arg(long)]
    pub scope: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: Args) -> CmdResult<Value> {
    let scope: Scope = args.scope.parse()?;
    let report = run_scope(scope, args.seed)?;
    let tolerance = scope.config().tolerance;
    for g in &report.groups {
        println!("{:<44} {}", g.group, g.report);
    }
    let worst = report.worst().map(|g| g.group.clone()).unwrap_or_default();
    if !report.passed() {
        let failed: Vec<&str> = report.groups.iter().filter(|g| !g.report.passed()).map(|g| g.group.as_str()).collect();
        return Err(Failure::new(
            CHECK_FAILED,
            anyhow::anyhow!(
                "gradient check failed for {} group(s); worst `{worst}` at {:.3e} (tolerance {tolerance:.0e}): {}",
                failed.len(),
                report.max_rel_error(),
                failed.join(", ")
            ),
        ));
    }
    Ok(json!({
        "scope": scope.name(),
        "seed": args.seed,
        "groups": report.groups.len(),
        "max_rel_error": report.max_rel_error(),
        "tolerance": tolerance,
        "worst": worst,
    }))
}
