//! Throughput curves, peak search and the multi-access diversity gain.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::bounds::SINGLE_BS_PEAK;
use crate::analysis::evolution::EvolutionOutcome;
use crate::analysis::Analyzer;
use crate::{Error, NetworkTopology, Real, Result, TargetDegreeVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint<F> {
    pub slots: u64,
    pub plr: Vec<F>,
    pub plr_avg: F,
    pub throughput: F,
    pub converged: bool,
}

impl<F: Real> CurvePoint<F> {
    pub fn from_outcome(topology: &NetworkTopology, outcome: &EvolutionOutcome<F>) -> Self {
        Self {
            slots: outcome.slots,
            plr: outcome.plr.clone(),
            plr_avg: outcome.average_plr(topology),
            throughput: outcome.throughput(topology),
            converged: outcome.converged,
        }
    }
}

/// PLR and throughput against frame length.
#[derive(Debug, Clone, PartialEq)]
pub struct PlrCurve<F> {
    pub points: Vec<CurvePoint<F>>,
}

impl<F: Real> PlrCurve<F> {
    /// Point of highest throughput; the earliest one on ties.
    pub fn peak(&self) -> Option<&CurvePoint<F>> {
        self.points.iter().fold(None, |best: Option<&CurvePoint<F>>, p| match best {
            Some(b) if b.throughput >= p.throughput => Some(b),
            _ => Some(p),
        })
    }

    /// CSV with header `T,plr_avg,plr_g1..plr_gI,throughput`.
    pub fn to_csv(&self) -> String {
        let groups = self.points.first().map_or(0, |p| p.plr.len());
        let mut out = String::from("T,plr_avg");
        for g in 1..=groups {
            let _ = write!(out, ",plr_g{g}");
        }
        out.push_str(",throughput\n");
        for p in &self.points {
            let _ = write!(out, "{},{:e}", p.slots, p.plr_avg.as_f64());
            for v in &p.plr {
                let _ = write!(out, ",{:e}", v.as_f64());
            }
            let _ = writeln!(out, ",{:.12}", p.throughput.as_f64());
        }
        out
    }
}

/// Integer frame-length search for the throughput peak.
///
/// A coarse grid over `[lower, upper]` locates the neighbourhood of the
/// maximum, widening the range while the maximum sits on its edge, then a
/// golden-section search over the integers between the coarse neighbours
/// pins it down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearch {
    pub lower: Option<u64>,
    pub upper: Option<u64>,
    pub coarse_points: usize,
    pub max_expansions: usize,
}

impl Default for PeakSearch {
    fn default() -> Self {
        Self {
            lower: None,
            upper: None,
            coarse_points: 48,
            max_expansions: 6,
        }
    }
}

impl PeakSearch {
    /// `[ceil(0.5 N / (M S_1)), ceil(2 N / M)]` unless overridden.
    pub fn range(&self, topology: &NetworkTopology) -> (u64, u64) {
        let n = topology.total_users() as f64;
        let m = topology.num_bs() as f64;
        let lower = self
            .lower
            .unwrap_or_else(|| (0.5 * n / (m * SINGLE_BS_PEAK)).ceil() as u64)
            .max(1);
        let upper = self.upper.unwrap_or_else(|| (2.0 * n / m).ceil() as u64).max(lower + 2);
        (lower, upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak<F> {
    pub point: CurvePoint<F>,
    /// Frame lengths evaluated to find it.
    pub evaluations: usize,
}

fn coarse_grid(lower: u64, upper: u64, points: usize) -> Vec<u64> {
    let points = points.max(3) as u64;
    let mut grid: Vec<u64> = (0..points)
        .map(|k| lower + ((upper - lower) as f64 * k as f64 / (points - 1) as f64).round() as u64)
        .collect();
    grid.dedup();
    grid
}

/// Finds `sup_T S(T)` for `degrees`.
pub fn find_peak<F: Real>(
    analyzer: &Analyzer,
    degrees: &TargetDegreeVector,
    search: &PeakSearch,
) -> Result<Peak<F>> {
    let topology = analyzer.topology();
    if topology.total_users() == 0 {
        return Err(Error::InvalidArgument("network has no users".into()));
    }
    let mut memo: BTreeMap<u64, CurvePoint<F>> = BTreeMap::new();
    let mut eval = |t: u64| -> Result<F> {
        if let Some(p) = memo.get(&t) {
            return Ok(p.throughput);
        }
        let outcome = analyzer.evolve::<F>(degrees, t)?;
        let point = CurvePoint::from_outcome(topology, &outcome);
        let s = point.throughput;
        memo.insert(t, point);
        Ok(s)
    };

    let (mut lower, mut upper) = search.range(topology);
    let mut expansions = 0;
    let (mut a, mut b) = loop {
        let grid = coarse_grid(lower, upper, search.coarse_points);
        let mut best = 0;
        let mut best_s = F::neg_infinity();
        for (k, &t) in grid.iter().enumerate() {
            let s = eval(t)?;
            if s > best_s {
                best_s = s;
                best = k;
            }
        }
        let last = grid.len() - 1;
        if best == last && expansions < search.max_expansions {
            expansions += 1;
            lower = grid[last - 1];
            upper = upper.saturating_mul(2);
            continue;
        }
        if best == 0 && lower > 1 && expansions < search.max_expansions {
            expansions += 1;
            upper = grid[1];
            lower = (lower / 2).max(1);
            continue;
        }
        break (grid[best.saturating_sub(1)], grid[(best + 1).min(last)]);
    };

    const SHRINK: f64 = 0.381_966_011_250_105_1;
    while b - a > 4 {
        let step = ((b - a) as f64 * SHRINK).round() as u64;
        let c = a + step;
        let d = b - step;
        if eval(c)? < eval(d)? {
            a = c;
        } else {
            b = d;
        }
    }
    for t in a..=b {
        eval(t)?;
    }

    let evaluations = memo.len();
    let point = memo
        .into_values()
        .fold(None, |best: Option<CurvePoint<F>>, p| match best {
            Some(b) if b.throughput >= p.throughput => Some(b),
            _ => Some(p),
        })
        .expect("at least one evaluation");
    Ok(Peak { point, evaluations })
}

/// Curve over explicit frame lengths.
pub fn plr_curve<F: Real>(
    analyzer: &Analyzer,
    degrees: &TargetDegreeVector,
    slots: &[u64],
) -> Result<PlrCurve<F>> {
    if slots.is_empty() {
        return Err(Error::InvalidArgument("empty frame-length range".into()));
    }
    if slots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("frame lengths must be strictly ascending".into()));
    }
    let points = slots
        .iter()
        .map(|&t| {
            let o = analyzer.evolve::<F>(degrees, t)?;
            Ok(CurvePoint::from_outcome(analyzer.topology(), &o))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlrCurve { points })
}

/// Non-cooperative baseline degrees: every user transmits with the
/// probability that gives the busiest base station a total target degree of
/// `per_bs_degree`.
pub fn simultaneous_transmission_degrees(topology: &NetworkTopology, per_bs_degree: f64) -> TargetDegreeVector {
    let busiest = (0..topology.num_bs())
        .map(|j| topology.users_at(j))
        .max()
        .unwrap_or(0);
    let p = if busiest == 0 { 0.0 } else { per_bs_degree / busiest as f64 };
    TargetDegreeVector::new(
        topology
            .groups()
            .iter()
            .map(|g| (p * g.num_users as f64).min(g.num_users as f64))
            .collect(),
    )
}

/// Optimal single-BS target degree.
pub const SINGLE_BS_DEGREE: f64 = 3.098;

/// Ratio of two peak throughputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityGain {
    pub coop: f64,
    pub noncoop: f64,
    pub gain: f64,
}

/// `Gamma = S_c / S_nc` from the two analyzers' peaks.
pub fn diversity_gain(
    coop: &Analyzer,
    noncoop: &Analyzer,
    degrees_coop: &TargetDegreeVector,
    degrees_noncoop: &TargetDegreeVector,
    search: &PeakSearch,
) -> Result<DiversityGain> {
    let sc = find_peak::<f64>(coop, degrees_coop, search)?.point.throughput;
    let snc = find_peak::<f64>(noncoop, degrees_noncoop, search)?.point.throughput;
    gain_ratio(sc, snc)
}

pub fn gain_ratio(coop: f64, noncoop: f64) -> Result<DiversityGain> {
    if !(noncoop > 0.0) {
        return Err(Error::InvalidArgument("non-cooperative throughput is zero".into()));
    }
    Ok(DiversityGain {
        coop,
        noncoop,
        gain: coop / noncoop,
    })
}
