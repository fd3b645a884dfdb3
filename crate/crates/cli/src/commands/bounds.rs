//! Per-M throughput and gain bounds on full symmetric networks.

use std::fmt::Write as _;

use frameless_core::analysis::{
    check_exact_guard, gain_ratio, simultaneous_transmission_degrees, upper_bound_throughput, Analyzer, Mode, SINGLE_BS_DEGREE,
};
use frameless_core::optimizer::{optimize, OptimizationSpec};
use frameless_core::{NetworkTopology, TargetDegreeVector};
use serde::Serialize;
use serde_json::json;

use super::Context;
use crate::config::{reference_class_degrees, BoundDegrees, DEFAULT_USERS};
use crate::error::{CliError, CliResult};
use crate::output::Report;

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub num_bs: usize,
    pub noncoop: f64,
    pub lower: f64,
    pub lower_degrees: Vec<f64>,
    pub exact: Option<f64>,
    /// Why the exact value is missing.
    pub exact_skipped: Option<String>,
    pub upper: f64,
    pub gain_lower: f64,
    pub gain_exact: Option<f64>,
    pub gain_upper: f64,
}

fn reference_degrees(topology: &NetworkTopology) -> Option<TargetDegreeVector> {
    let values = reference_class_degrees(topology.num_bs())?;
    TargetDegreeVector::from_classes(&topology.classes_by_coverage(), &values, topology.num_groups()).ok()
}

pub fn bounds_row(ctx: &Context, num_bs: usize, users: u64, lower_mode: BoundDegrees) -> CliResult<BoundsRow> {
    let topology = NetworkTopology::full_uniform(num_bs, users)?;
    let config = ctx.analysis_config();
    let search = ctx.peak_search();
    let snc_degrees = simultaneous_transmission_degrees(&topology, SINGLE_BS_DEGREE);
    let noncoop = Analyzer::new(topology.clone(), Mode::NonCoop, &config)?
        .peak::<f64>(&snc_degrees, &search)?
        .point
        .throughput;
    let upper = upper_bound_throughput(num_bs)?;
    let (lower, lower_degrees) = match lower_mode {
        BoundDegrees::Reference => {
            let degrees = reference_degrees(&topology).unwrap_or_else(|| snc_degrees.clone());
            let s = Analyzer::new(topology.clone(), Mode::Bound, &config)?
                .peak::<f64>(&degrees, &search)?
                .point
                .throughput;
            (s, degrees.g)
        }
        BoundDegrees::Optimize => {
            let mut spec = OptimizationSpec::new(topology.clone(), Mode::Bound);
            spec.alpha = ctx.alpha();
            spec.de = ctx.de_settings();
            spec.search = search;
            spec.analysis = config.clone();
            spec.workers = ctx.workers;
            let r = optimize(&spec, ctx.seed)?;
            (r.throughput, r.degrees)
        }
    };
    let (exact, exact_skipped) = match (check_exact_guard(&topology, ctx.allow_long_running), reference_degrees(&topology)) {
        (Err(e), _) => (None, Some(e.to_string())),
        (Ok(()), None) => (None, Some("no reference degrees".to_string())),
        (Ok(()), Some(degrees)) => {
            let analyzer = Analyzer::new(topology.clone(), Mode::Coop, &config)?;
            (Some(analyzer.peak::<f64>(&degrees, &search)?.point.throughput), None)
        }
    };
    Ok(BoundsRow {
        num_bs,
        noncoop,
        lower,
        lower_degrees,
        exact,
        exact_skipped,
        upper,
        gain_lower: gain_ratio(lower, noncoop)?.gain,
        gain_exact: exact.map(|s| gain_ratio(s, noncoop)).transpose()?.map(|g| g.gain),
        gain_upper: gain_ratio(upper, noncoop)?.gain,
    })
}

fn csv(rows: &[BoundsRow]) -> String {
    let mut out = String::from("M,S_nc,S_lower,S_exact,S_upper,gain_lower,gain_exact,gain_upper\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{:.6},{:.6},{},{:.6}",
            r.num_bs,
            r.noncoop,
            r.lower,
            opt(r.exact),
            r.upper,
            r.gain_lower,
            opt(r.gain_exact),
            r.gain_upper
        );
    }
    out
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let b = &ctx.cfg.bounds;
    let m_list = b
        .m_list
        .clone()
        .unwrap_or_else(|| if ctx.fast { vec![1, 2, 3] } else { vec![1, 2, 3, 4] });
    if m_list.is_empty() {
        return Err(CliError::Config("empty list of base-station counts".into()));
    }
    let users = b.users_per_group.unwrap_or(DEFAULT_USERS);
    let lower_mode = b.lower_degrees.unwrap_or(BoundDegrees::Reference);
    let rows = m_list
        .iter()
        .map(|&m| bounds_row(ctx, m, users, lower_mode))
        .collect::<CliResult<Vec<_>>>()?;
    let report = Report::new(json!({ "users_per_group": users, "lower_degrees": lower_mode, "rows": rows }))
        .table("bounds", csv(&rows));
    ctx.emit("bounds", &report)
}
