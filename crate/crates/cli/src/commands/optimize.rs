//! Target-degree optimization.

use std::fmt::Write as _;

use frameless_core::optimizer::{optimize, OptimizationResult, OptimizationSpec};
use serde_json::json;

use super::Context;
use crate::config::class_partition;
use crate::error::CliResult;
use crate::output::Report;

pub fn spec(ctx: &Context) -> CliResult<OptimizationSpec> {
    let topology = ctx.cfg.topology()?;
    let mut spec = OptimizationSpec::new(topology.clone(), ctx.mode());
    spec.alpha = ctx.alpha();
    spec.classes = class_partition(&topology);
    let o = &ctx.cfg.optimizer;
    spec.bounds = (o.lower.unwrap_or(spec.bounds.0), o.upper.unwrap_or(spec.bounds.1));
    spec.de = ctx.de_settings();
    spec.search = ctx.peak_search();
    spec.analysis = ctx.analysis_config();
    spec.workers = ctx.workers;
    Ok(spec)
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let spec = spec(ctx)?;
    let result = optimize(&spec, ctx.seed)?;
    let groups = spec.topology.num_groups();
    let mut csv = OptimizationResult::csv_header(groups);
    let _ = write!(csv, "\n{}\n", result.csv_row());
    let mut history = String::from("generation,best_score\n");
    for (k, v) in result.history.iter().enumerate() {
        let _ = writeln!(history, "{k},{v:.12}");
    }
    let classes: Vec<Vec<usize>> = spec
        .classes
        .iter()
        .map(|c| c.iter().map(|g| g + 1).collect())
        .collect();
    let report = Report::new(json!({
        "mode": spec.mode,
        "alpha": spec.alpha,
        "classes": classes,
        "de": spec.de,
        "result": result,
    }))
    .table("optimum", csv)
    .table("history", history);
    ctx.emit("optimize", &report)
}
