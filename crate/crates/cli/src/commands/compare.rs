//! Frameless transmission against a fixed-length baseline over a load sweep.

use std::fmt::Write as _;

use frameless_core::simulator::slots_for_load;
use serde::Serialize;
use serde_json::json;

use super::simulate::{default_trials, sweep_point, SweepRow};
use super::{default_loads, Context};
use crate::config::SchemeKind;
use crate::error::{CliError, CliResult};
use crate::output::Report;

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub load: f64,
    pub slots: u64,
    pub frameless: SweepRow,
    pub baseline: SweepRow,
    /// Frameless minus baseline normalized throughput.
    pub delta: f64,
}

/// Loads bracketing each sign change of `f`, as `[before, after]`.
fn crossings(rows: &[CompareRow], f: impl Fn(&CompareRow) -> f64) -> Vec<[f64; 2]> {
    rows.windows(2)
        .filter(|w| {
            let (a, b) = (f(&w[0]), f(&w[1]));
            a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0)
        })
        .map(|w| [w[0].load, w[1].load])
        .collect()
}

fn csv(rows: &[CompareRow]) -> String {
    let mut out = String::from(
        "load,T,frameless_throughput,frameless_stderr,frameless_plr,frameless_plr_stderr,\
         baseline_throughput,baseline_stderr,baseline_plr,baseline_plr_stderr,plr_floor,delta\n",
    );
    for r in rows {
        let (f, b) = (&r.frameless, &r.baseline);
        let _ = writeln!(
            out,
            "{:.4},{},{:.12},{:.12},{:e},{:e},{:.12},{:.12},{:e},{:e},{},{:.12}",
            r.load,
            r.slots,
            f.normalized_throughput,
            f.normalized_stderr,
            f.aggregate.plr_mean,
            f.aggregate.plr_stderr,
            b.normalized_throughput,
            b.normalized_stderr,
            b.aggregate.plr_mean,
            b.aggregate.plr_stderr,
            f.plr_floor.map_or(String::new(), |v| format!("{v:e}")),
            r.delta,
        );
    }
    out
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let topology = ctx.cfg.topology()?;
    let degrees = ctx.cfg.degrees(&topology)?;
    let c = &ctx.cfg.compare;
    let loads = c.loads.clone().unwrap_or_else(default_loads);
    if loads.is_empty() {
        return Err(CliError::Config("empty load list".into()));
    }
    let trials = c.trials.unwrap_or_else(|| default_trials(ctx));
    let baseline = c.baseline.unwrap_or(SchemeKind::SpatioTemporal);
    let dist = ctx.repetition(c.repetition.as_ref().or(ctx.cfg.simulation.repetition.as_ref()))?;
    let rows = loads
        .iter()
        .map(|&load| {
            let slots = slots_for_load(&topology, load)?;
            let frameless = sweep_point(ctx, &topology, &degrees, SchemeKind::Fixed, &dist, slots, trials, ctx.seed)?;
            let baseline = sweep_point(ctx, &topology, &degrees, baseline, &dist, slots, trials, ctx.seed)?;
            Ok(CompareRow {
                load: frameless.load,
                slots,
                delta: frameless.normalized_throughput - baseline.normalized_throughput,
                frameless,
                baseline,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let throughput_crossings = crossings(&rows, |r| r.delta);
    let plr_crossings = crossings(&rows, |r| r.baseline.aggregate.plr_mean - r.frameless.aggregate.plr_mean);
    let report = Report::new(json!({
        "baseline": baseline,
        "repetition": dist.masses(),
        "trials": trials,
        "throughput_crossings": throughput_crossings,
        "plr_crossings": plr_crossings,
        "rows": rows,
    }))
    .table("compare", csv(&rows));
    ctx.emit("compare", &report)
}
