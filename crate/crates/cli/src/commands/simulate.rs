//! Monte Carlo runs of one scheme: per-trial records, or a load sweep.

use std::fmt::Write as _;

use frameless_core::simulator::{
    monte_carlo, normalized_load, plr_floor, slots_for_load, Aggregate, MonteCarloSpec, RepetitionDist, Scheme,
};
use frameless_core::{NetworkTopology, TargetDegreeVector};
use serde::Serialize;
use serde_json::json;

use super::Context;
use crate::config::SchemeKind;
use crate::error::{CliError, CliResult};
use crate::output::Report;

pub fn default_trials(ctx: &Context) -> usize {
    if ctx.fast {
        20
    } else {
        100
    }
}

/// One load point of a fixed-length sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub load: f64,
    pub slots: u64,
    pub aggregate: Aggregate,
    /// Throughput per base station.
    pub normalized_throughput: f64,
    pub normalized_stderr: f64,
    /// Never-transmitted fraction; frameless only.
    pub plr_floor: Option<f64>,
}

pub fn fixed_scheme(kind: SchemeKind, slots: u64, dist: &RepetitionDist) -> CliResult<Scheme> {
    match kind {
        SchemeKind::Fixed => Ok(Scheme::FixedFrame { slots }),
        SchemeKind::SpatioTemporal => Ok(Scheme::SpatioTemporal {
            dist: dist.clone(),
            slots,
        }),
        SchemeKind::Frameless => Err(CliError::Config(
            "load sweeps need a fixed-length scheme (fixed or spatio-temporal)".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_point(
    ctx: &Context,
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    kind: SchemeKind,
    dist: &RepetitionDist,
    slots: u64,
    trials: usize,
    seed: u64,
) -> CliResult<SweepRow> {
    let spec = MonteCarloSpec {
        topology: topology.clone(),
        degrees: degrees.clone(),
        scheme: fixed_scheme(kind, slots, dist)?,
        trials,
        seed,
        workers: ctx.workers,
    };
    let aggregate = monte_carlo(&spec)?.aggregate;
    let m = topology.num_bs() as f64;
    Ok(SweepRow {
        load: normalized_load(topology, slots),
        slots,
        normalized_throughput: aggregate.throughput_mean / m,
        normalized_stderr: aggregate.throughput_stderr / m,
        plr_floor: match kind {
            SchemeKind::Fixed => Some(plr_floor(topology, degrees, slots)?),
            _ => None,
        },
        aggregate,
    })
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "load,T,throughput_mean,throughput_stderr,normalized_throughput,normalized_stderr,plr_mean,plr_stderr,plr_floor\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:.4},{},{:.12},{:.12},{:.12},{:.12},{:e},{:e},{}",
            r.load,
            r.slots,
            r.aggregate.throughput_mean,
            r.aggregate.throughput_stderr,
            r.normalized_throughput,
            r.normalized_stderr,
            r.aggregate.plr_mean,
            r.aggregate.plr_stderr,
            r.plr_floor.map_or(String::new(), |f| format!("{f:e}")),
        );
    }
    out
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let topology = ctx.cfg.topology()?;
    let degrees = ctx.cfg.degrees(&topology)?;
    let sim = &ctx.cfg.simulation;
    let trials = sim.trials.unwrap_or_else(|| default_trials(ctx));
    let kind = sim.scheme.unwrap_or(SchemeKind::Frameless);
    let dist = ctx.repetition(sim.repetition.as_ref())?;
    if let Some(loads) = &sim.loads {
        let rows = loads
            .iter()
            .map(|&load| {
                let slots = slots_for_load(&topology, load)?;
                sweep_point(ctx, &topology, &degrees, kind, &dist, slots, trials, ctx.seed)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let report = Report::new(json!({ "scheme": kind, "trials": trials, "sweep": rows }))
            .table("sweep", sweep_csv(&rows));
        return ctx.emit("simulate", &report);
    }
    let scheme = match kind {
        SchemeKind::Frameless => Scheme::Frameless {
            alpha: ctx.alpha(),
            slot_cap: sim.slot_cap,
        },
        _ => {
            let slots = sim
                .slots
                .ok_or_else(|| CliError::Config("fixed-length schemes need slots or loads".into()))?;
            fixed_scheme(kind, slots, &dist)?
        }
    };
    let spec = MonteCarloSpec {
        topology: topology.clone(),
        degrees: degrees.clone(),
        scheme: scheme.clone(),
        trials,
        seed: ctx.seed,
        workers: ctx.workers,
    };
    let mc = monte_carlo(&spec)?;
    let report = Report::new(json!({
        "scheme": scheme,
        "topology": topology.to_config(),
        "degrees": degrees.g,
        "aggregate": mc.aggregate,
    }))
    .table("trials", mc.to_csv(&topology));
    ctx.emit("simulate", &report)
}
