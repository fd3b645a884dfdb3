//! Scaled-down reproduction suite: reference peaks, simulation agreement,
//! closed forms, gains and the baseline comparison, one line per check.
//!
//! A check that fails for a documented, understood reason is marked
//! `known`; only other failures make the command exit non-zero.

use std::fmt::Write as _;

use frameless_core::analysis::{
    build_retrievability_table, closed_form_w_m3, compute_w_coop, simultaneous_transmission_degrees, Analyzer,
    GroupProbs, Mode, SINGLE_BS_DEGREE,
};
use frameless_core::optimizer::{optimize, DeSettings, OptimizationSpec};
use frameless_core::simulator::{monte_carlo, slots_for_load, splitmix64, MonteCarloSpec, Scheme};
use frameless_core::{NetworkTopology, TargetDegreeVector};
use serde::Serialize;
use serde_json::json;

use super::simulate::sweep_point;
use super::Context;
use crate::config::{ExperimentConfig, SchemeKind};
use crate::error::{CliError, CliResult};
use crate::output::Report;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub known: bool,
    pub detail: String,
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &str, pass: bool, known: bool, detail: String) {
        let status = if pass { "PASS" } else { "FAIL" };
        let note = if !pass && known { " (known deviation)" } else { "" };
        eprintln!("{status} {name}: {detail}{note}");
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            known,
            detail,
        });
    }

    fn near(&mut self, name: &str, value: f64, expected: f64, tol: f64) {
        let pass = (value - expected).abs() <= tol;
        self.record(name, pass, false, format!("{value:.4} vs {expected} +/- {tol}"));
    }
}

fn preset(name: &str) -> CliResult<(NetworkTopology, TargetDegreeVector)> {
    let cfg = ExperimentConfig::preset(name)?;
    let topology = cfg.topology()?;
    let degrees = cfg.degrees(&topology)?;
    Ok((topology, degrees))
}

fn peak(ctx: &Context, topology: &NetworkTopology, mode: Mode, degrees: &TargetDegreeVector) -> CliResult<f64> {
    let analyzer = Analyzer::new(topology.clone(), mode, &ctx.analysis_config())?;
    Ok(analyzer.peak::<f64>(degrees, &ctx.peak_search())?.point.throughput)
}

fn uniform(state: &mut u64) -> f64 {
    *state = state.wrapping_add(1);
    (splitmix64(*state) >> 11) as f64 / (1u64 << 53) as f64
}

fn closed_form_gap(seed: u64) -> CliResult<f64> {
    let topology = NetworkTopology::full_uniform(3, 1)?;
    let masks: Vec<u32> = topology.groups().iter().map(|g| g.bs_set.mask()).collect();
    let tables = (0..7)
        .map(|t| build_retrievability_table(&masks, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut state = seed;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let probs: Vec<GroupProbs<f64>> = (0..7)
            .map(|_| {
                let idle = uniform(&mut state);
                let single = (1.0 - idle) * uniform(&mut state);
                GroupProbs {
                    idle,
                    single,
                    sole: uniform(&mut state),
                }
            })
            .collect();
        for (t, table) in tables.iter().enumerate() {
            let closed = closed_form_w_m3(&topology, &probs, t)?;
            let enumerated = compute_w_coop(table, &probs)?;
            worst = worst.max((closed - enumerated).abs());
        }
    }
    Ok(worst)
}

fn table_peaks(ctx: &Context, suite: &mut Suite) -> CliResult<()> {
    let reference = [(1, 0.874, 0.005), (2, 1.676, 0.005), (3, 2.366, 0.005), (4, 2.940, 0.01)];
    for (m, expected, tol) in reference {
        if m == 4 && !ctx.allow_long_running {
            eprintln!("SKIP peak-m4: needs --allow-long-running");
            continue;
        }
        let (t, g) = preset(&format!("sym{m}"))?;
        suite.near(&format!("peak-m{m}"), peak(ctx, &t, Mode::Coop, &g)?, expected, tol);
    }
    let mut spec = OptimizationSpec::new(NetworkTopology::full_uniform(1, 10_000)?, Mode::Coop);
    spec.de = DeSettings::fast();
    spec.search = ctx.peak_search();
    spec.workers = ctx.workers;
    let r = optimize(&spec, ctx.seed)?;
    suite.near("optimizer-m1-degree", r.degrees[0], 3.10, 0.05);
    suite.near("optimizer-m1-peak", r.throughput, 0.874, 0.01);
    let rows = [
        ("a", 0.874),
        ("b", 0.893),
        ("c", 1.064),
        ("d", 1.676),
        ("e", 1.836),
        ("f", 1.758),
        ("g", 1.748),
    ];
    for (row, expected) in rows {
        let (t, g) = preset(&format!("two-bs-{row}"))?;
        suite.near(&format!("two-bs-{row}-peak"), peak(ctx, &t, Mode::Coop, &g)?, expected, 0.01);
    }
    Ok(())
}

fn simulation(ctx: &Context, suite: &mut Suite) -> CliResult<()> {
    let trials = if ctx.fast { 20 } else { 100 };
    for (m, expected) in [(1, 0.867), (2, 1.673)] {
        let (topology, degrees) = preset(&format!("sym{m}"))?;
        let spec = MonteCarloSpec {
            topology,
            degrees,
            scheme: Scheme::Frameless { alpha: 0.8, slot_cap: None },
            trials,
            seed: ctx.seed,
            workers: ctx.workers,
        };
        let a = monte_carlo(&spec)?.aggregate;
        suite.near(&format!("simulated-m{m}"), a.throughput_mean, expected, 0.01);
    }
    let (topology, degrees) = preset("sym2")?;
    let spec = |workers| MonteCarloSpec {
        topology: topology.clone(),
        degrees: degrees.clone(),
        scheme: Scheme::Frameless { alpha: 0.8, slot_cap: None },
        trials: 4,
        seed: ctx.seed,
        workers,
    };
    let same = monte_carlo(&spec(1))? == monte_carlo(&spec(2))?;
    suite.record("workers-determinism", same, false, "1 vs 2 workers".into());
    Ok(())
}

fn gains(ctx: &Context, suite: &mut Suite) -> CliResult<()> {
    for (row, expected) in [("d", 1.26), ("c", 1.09), ("e", 1.11)] {
        let (t, g) = preset(&format!("two-bs-{row}"))?;
        let snc = peak(ctx, &t, Mode::NonCoop, &simultaneous_transmission_degrees(&t, SINGLE_BS_DEGREE))?;
        suite.near(&format!("gain-{row}"), peak(ctx, &t, Mode::Coop, &g)? / snc, expected, 0.03);
    }
    for m in [2, 3] {
        let (t, g) = preset(&format!("sym{m}"))?;
        let lower = peak(ctx, &t, Mode::Bound, &g)?;
        let exact = peak(ctx, &t, Mode::Coop, &g)?;
        let upper = m as f64 * 0.87;
        let snc = peak(ctx, &t, Mode::NonCoop, &simultaneous_transmission_degrees(&t, SINGLE_BS_DEGREE))?;
        suite.record(
            &format!("bound-order-m{m}"),
            lower <= exact && exact <= upper,
            false,
            format!("{lower:.4} <= {exact:.4} <= {upper:.4}"),
        );
        suite.record(
            &format!("bound-gain-m{m}"),
            lower / snc > 1.0,
            false,
            format!("lower-bound gain {:.4}", lower / snc),
        );
        let noncoop = peak(ctx, &t, Mode::NonCoop, &g)?;
        suite.record(
            &format!("coop-beats-noncoop-m{m}"),
            exact + 1e-9 >= noncoop,
            false,
            format!("{exact:.4} vs {noncoop:.4} at the same degrees"),
        );
    }
    Ok(())
}

fn comparison(ctx: &Context, suite: &mut Suite) -> CliResult<()> {
    let (topology, degrees) = preset("delta2")?;
    let dist = ctx.repetition(None)?;
    let trials = if ctx.fast { 5 } else { 20 };
    for load in [0.6, 0.7, 0.75, 0.85, 0.9] {
        let slots = slots_for_load(&topology, load)?;
        let f = sweep_point(ctx, &topology, &degrees, SchemeKind::Fixed, &dist, slots, trials, ctx.seed)?;
        let b = sweep_point(ctx, &topology, &degrees, SchemeKind::SpatioTemporal, &dist, slots, trials, ctx.seed)?;
        let (fs, bs) = (f.normalized_throughput, b.normalized_throughput);
        let versus = format!("frameless {fs:.4} vs baseline {bs:.4}");
        if load < 0.8 {
            suite.record(&format!("frameless-wins-{load}"), fs > bs, false, versus);
        } else if load > 0.85 {
            suite.record(&format!("baseline-wins-{load}"), bs > fs, true, versus);
        }
        let plr = f.aggregate.plr_mean;
        if load == 0.7 {
            suite.record("waterfall-below", plr < 1e-2, true, format!("PLR {plr:.3e} at 0.7"));
        }
        if load == 0.85 {
            suite.record("waterfall-above", plr > 1e-2, false, format!("PLR {plr:.3e} at 0.85"));
        }
        let floor = f.plr_floor.unwrap_or(0.0);
        suite.record(
            &format!("plr-floor-{load}"),
            plr + 3.0 * f.aggregate.plr_stderr >= floor,
            false,
            format!("PLR {plr:.3e} vs floor {floor:.3e}"),
        );
    }
    Ok(())
}

pub fn run(ctx: &Context) -> CliResult<()> {
    let mut suite = Suite::default();
    table_peaks(ctx, &mut suite)?;
    simulation(ctx, &mut suite)?;
    let gap = closed_form_gap(ctx.seed)?;
    suite.record("closed-form", gap < 1e-12, false, format!("max gap {gap:.3e} over 100 probes"));
    gains(ctx, &mut suite)?;
    comparison(ctx, &mut suite)?;

    let mut csv = String::from("check,status,known,detail\n");
    for c in &suite.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(csv, "{},{},{},\"{}\"", c.name, status, c.known, c.detail);
    }
    let unexpected = suite.checks.iter().filter(|c| !c.pass && !c.known).count();
    let report = Report::new(json!({
        "passed": suite.checks.iter().filter(|c| c.pass).count(),
        "failed": suite.checks.iter().filter(|c| !c.pass).count(),
        "unexpected_failures": unexpected,
        "checks": suite.checks,
    }))
    .table("repro", csv);
    ctx.emit("repro", &report)?;
    if unexpected > 0 {
        return Err(CliError::Failed(format!("{unexpected} check(s) failed")));
    }
    Ok(())
}
