//! Density-evolution curve, peak and optional iteration trace.

use std::fmt::Write as _;

use frameless_core::analysis::{Analyzer, CurvePoint, Mode, PeakSearch};
use frameless_core::{NetworkTopology, TargetDegreeVector};
use serde_json::json;

use super::Context;
use crate::error::{CliError, CliResult};
use crate::output::Report;

/// Points on the curve written alongside a searched peak.
const CURVE_POINTS: u64 = 64;

fn explicit_slots(ctx: &Context) -> CliResult<Option<Vec<u64>>> {
    let a = &ctx.cfg.analysis;
    if let Some(slots) = &a.slots {
        return Ok(Some(slots.clone()));
    }
    match (a.t_min, a.t_max) {
        (Some(lo), Some(hi)) => {
            if lo == 0 || hi < lo {
                return Err(CliError::Config(format!("bad frame-length range {lo}:{hi}")));
            }
            let step = a.t_step.unwrap_or_else(|| ((hi - lo) / 100).max(1));
            if step == 0 {
                return Err(CliError::Config("frame-length step must be positive".into()));
            }
            Ok(Some((lo..=hi).step_by(step as usize).collect()))
        }
        (None, None) => Ok(None),
        _ => Err(CliError::Config("a frame-length range needs both ends".into())),
    }
}

fn search_grid(topology: &NetworkTopology, search: &PeakSearch, peak: u64) -> Vec<u64> {
    let (lo, hi) = search.range(topology);
    let lo = lo.min(peak);
    let hi = hi.max(peak);
    let mut grid: Vec<u64> = (0..CURVE_POINTS)
        .map(|k| lo + ((hi - lo) as f64 * k as f64 / (CURVE_POINTS - 1) as f64).round() as u64)
        .collect();
    grid.push(peak);
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn trace_csv(analyzer: &Analyzer, degrees: &TargetDegreeVector, slots: u64) -> CliResult<String> {
    let mut traced = analyzer.clone();
    let mut options = *analyzer.options();
    options.trace = true;
    traced.set_options(options);
    let outcome = traced.evolve::<f64>(degrees, slots)?;
    let topology = analyzer.topology();
    let mut out = String::from("iteration");
    if analyzer.mode() == Mode::NonCoop {
        for (i, g) in topology.groups().iter().enumerate() {
            for j in g.bs_set.indices() {
                let _ = write!(out, ",x_g{}_bs{}", i + 1, j + 1);
            }
        }
    } else {
        for i in 1..=topology.num_groups() {
            let _ = write!(out, ",x_g{i}");
        }
    }
    let split = outcome.trace.first().is_some_and(|s| !s.p_r0.is_empty());
    if split {
        for i in 1..=topology.num_groups() {
            let _ = write!(out, ",p_r0_g{i}");
        }
        for i in 1..=topology.num_groups() {
            let _ = write!(out, ",p_r1_g{i}");
        }
    }
    out.push('\n');
    for step in &outcome.trace {
        let _ = write!(out, "{}", step.iteration);
        for v in step.x.iter().chain(&step.p_r0).chain(&step.p_r1) {
            let _ = write!(out, ",{v:.12e}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn point_json(p: &CurvePoint<f64>) -> serde_json::Value {
    json!({
        "T": p.slots,
        "throughput": p.throughput,
        "plr_avg": p.plr_avg,
        "plr": p.plr,
        "converged": p.converged,
    })
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let topology = ctx.cfg.topology()?;
    let degrees = ctx.cfg.degrees(&topology)?;
    let analyzer = Analyzer::new(topology.clone(), ctx.mode(), &ctx.analysis_config())?;
    let search = ctx.peak_search();
    let (curve, peak, evaluations) = match explicit_slots(ctx)? {
        Some(slots) => {
            let curve = analyzer.curve::<f64>(&degrees, &slots)?;
            let peak = curve.peak().expect("non-empty curve").clone();
            (curve, peak, slots.len())
        }
        None => {
            let peak = analyzer.peak::<f64>(&degrees, &search)?;
            let grid = search_grid(&topology, &search, peak.point.slots);
            (analyzer.curve::<f64>(&degrees, &grid)?, peak.point, peak.evaluations)
        }
    };
    let mut report = Report::new(json!({
        "mode": ctx.mode(),
        "topology": topology.to_config(),
        "degrees": degrees.g,
        "peak": point_json(&peak),
        "evaluations": evaluations,
        "curve_points": curve.points.len(),
    }))
    .table("curve", curve.to_csv());
    if ctx.trace {
        // Primary on stdout when asked for.
        let trace = trace_csv(&analyzer, &degrees, peak.slots)?;
        report.tables.insert(0, ("trace".to_string(), trace));
    }
    ctx.emit("analyze", &report)?;
    if !peak.converged {
        return Err(CliError::NotConverged(format!(
            "density evolution at T = {} did not converge",
            peak.slots
        )));
    }
    Ok(())
}
