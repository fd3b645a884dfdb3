//! Target degree optimisation by differential evolution.
//!
//! The search runs over one value per tie class. A candidate's fitness is
//! its peak throughput when the loss rate at the peak meets the retrieval
//! threshold (`1 - p_e(T*) > alpha`); otherwise it is minus the shortfall,
//! which ranks every infeasible candidate below every feasible one.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{AnalysisConfig, Analyzer, Mode, PeakSearch};
use crate::{Error, NetworkTopology, Result, TargetDegreeVector};

/// Grid candidates are snapped to, and the fitness cache key resolution.
pub const GRID: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeSettings {
    pub population: usize,
    pub mutant_factor: f64,
    pub generations: usize,
    pub crossover_rate: f64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self {
            population: 300,
            mutant_factor: 0.2,
            generations: 30,
            crossover_rate: 0.9,
        }
    }
}

impl DeSettings {
    /// Reduced population and generation count for quick runs.
    pub fn fast() -> Self {
        Self {
            population: 50,
            generations: 15,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationSpec {
    pub topology: NetworkTopology,
    pub mode: Mode,
    pub alpha: f64,
    /// Groups sharing one target degree.
    pub classes: Vec<Vec<usize>>,
    pub bounds: (f64, f64),
    pub de: DeSettings,
    pub search: PeakSearch,
    pub analysis: AnalysisConfig,
    /// Worker threads for fitness evaluation; 0 uses rayon's default.
    pub workers: usize,
}

impl OptimizationSpec {
    /// Defaults: `alpha = 0.8`, bounds `[0, 4]`, the topology's tie classes or
    /// else classes by number of reachable base stations.
    pub fn new(topology: NetworkTopology, mode: Mode) -> Self {
        let classes = topology
            .tie_classes()
            .map(<[_]>::to_vec)
            .unwrap_or_else(|| topology.classes_by_coverage());
        Self {
            topology,
            mode,
            alpha: 0.8,
            classes,
            bounds: (0.0, 4.0),
            de: DeSettings::default(),
            search: PeakSearch::default(),
            analysis: AnalysisConfig::default(),
            workers: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        let (lo, hi) = self.bounds;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("degenerate bounds [{lo}, {hi}]")));
        }
        if self.de.population < 4 {
            return Err(Error::InvalidArgument("population must be at least 4".into()));
        }
        if !(self.de.mutant_factor > 0.0) || !(0.0..=1.0).contains(&self.de.crossover_rate) {
            return Err(Error::InvalidArgument("invalid differential evolution parameters".into()));
        }
        let mut seen = vec![false; self.topology.num_groups()];
        for &g in self.classes.iter().flatten() {
            if g >= seen.len() || std::mem::replace(&mut seen[g], true) {
                return Err(Error::InvalidArgument(format!("tie classes list group {} twice or out of range", g + 1)));
            }
        }
        if seen.iter().any(|&s| !s) || self.classes.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("tie classes must partition the groups".into()));
        }
        Ok(())
    }

    /// Upper bound per class, lowered where a class's smallest non-empty group
    /// could not carry the full range.
    fn class_bounds(&self) -> Vec<(f64, f64)> {
        self.classes
            .iter()
            .map(|class| {
                let smallest = class
                    .iter()
                    .map(|&g| self.topology.group(g).num_users)
                    .filter(|&n| n > 0)
                    .min();
                let hi = smallest.map_or(self.bounds.1, |n| self.bounds.1.min(n as f64));
                (self.bounds.0, hi.max(self.bounds.0))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fitness {
    pub throughput: f64,
    pub slots: u64,
    pub plr_avg: f64,
    pub feasible: bool,
    /// Throughput when feasible, minus the shortfall otherwise.
    pub score: f64,
}

fn snap(v: f64) -> f64 {
    (v / GRID).round() * GRID
}

fn key(values: &[f64]) -> Vec<i64> {
    values.iter().map(|v| (v / GRID).round() as i64).collect()
}

/// Fitness of one class-value vector.
pub fn fitness(analyzer: &Analyzer, spec: &OptimizationSpec, values: &[f64]) -> Result<Fitness> {
    let degrees = TargetDegreeVector::from_classes(&spec.classes, values, spec.topology.num_groups())?;
    let peak = analyzer.peak::<f64>(&degrees, &spec.search)?.point;
    let retrieved = 1.0 - peak.plr_avg;
    let feasible = peak.converged && retrieved > spec.alpha;
    let score = if feasible {
        peak.throughput
    } else if !peak.converged {
        -1.0 - (spec.alpha - retrieved).max(0.0)
    } else {
        -(spec.alpha - retrieved)
    };
    Ok(Fitness {
        throughput: peak.throughput,
        slots: peak.slots,
        plr_avg: peak.plr_avg,
        feasible,
        score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// One value per tie class.
    pub class_values: Vec<f64>,
    /// Expanded to one value per group.
    pub degrees: Vec<f64>,
    pub throughput: f64,
    pub slots: u64,
    pub plr_avg: f64,
    pub feasible: bool,
    /// Best score after the initial population and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

impl OptimizationResult {
    pub fn csv_header(groups: usize) -> String {
        let mut h = String::from("throughput,T,plr_avg,feasible");
        for g in 1..=groups {
            let _ = write!(h, ",G{g}");
        }
        h
    }

    /// `throughput,T,plr_avg,feasible,G1..GI`.
    pub fn csv_row(&self) -> String {
        let mut row = format!("{:.6},{},{:e},{}", self.throughput, self.slots, self.plr_avg, self.feasible);
        for g in &self.degrees {
            let _ = write!(row, ",{g:.4}");
        }
        row
    }
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let r = if v < lo {
        lo + (lo - v)
    } else if v > hi {
        hi - (v - hi)
    } else {
        v
    };
    r.clamp(lo, hi)
}

/// DE/rand/1/bin with elitist one-to-one selection.
pub fn optimize(spec: &OptimizationSpec, seed: u64) -> Result<OptimizationResult> {
    let analyzer = Analyzer::new(spec.topology.clone(), spec.mode, &spec.analysis)?;
    optimize_with(&analyzer, spec, seed)
}

/// As [`optimize`], reusing an analyzer built for `spec.topology`.
pub fn optimize_with(analyzer: &Analyzer, spec: &OptimizationSpec, seed: u64) -> Result<OptimizationResult> {
    spec.validate()?;
    let bounds = spec.class_bounds();
    let dims = bounds.len();
    let np = spec.de.population;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut cache: HashMap<Vec<i64>, Fitness> = HashMap::new();

    let evaluate = |candidates: &[Vec<f64>], cache: &mut HashMap<Vec<i64>, Fitness>| -> Result<Vec<Fitness>> {
        let mut fresh: Vec<(Vec<i64>, &Vec<f64>)> = Vec::new();
        for c in candidates {
            let k = key(c);
            if !cache.contains_key(&k) && !fresh.iter().any(|(f, _)| *f == k) {
                fresh.push((k, c));
            }
        }
        let computed = pool.install(|| {
            fresh
                .par_iter()
                .map(|(_, c)| fitness(analyzer, spec, c))
                .collect::<Result<Vec<_>>>()
        })?;
        for ((k, _), f) in fresh.into_iter().zip(computed) {
            cache.insert(k, f);
        }
        Ok(candidates.iter().map(|c| cache[&key(c)]).collect())
    };

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| snap(rng.random_range(lo..=hi)).clamp(lo, hi))
                .collect()
        })
        .collect();
    let mut scores = evaluate(&population, &mut cache)?;
    let best_of = |scores: &[Fitness]| {
        (0..scores.len())
            .max_by(|&a, &b| scores[a].score.total_cmp(&scores[b].score).then(b.cmp(&a)))
            .expect("non-empty population")
    };
    let mut history = vec![scores[best_of(&scores)].score];

    for _ in 0..spec.de.generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let r = rng.random_range(0..np);
                    if r != i {
                        break r;
                    }
                };
                let r1 = pick();
                let r2 = loop {
                    let r = pick();
                    if r != r1 {
                        break r;
                    }
                };
                let r3 = loop {
                    let r = pick();
                    if r != r1 && r != r2 {
                        break r;
                    }
                };
                let forced = rng.random_range(0..dims);
                (0..dims)
                    .map(|d| {
                        let (lo, hi) = bounds[d];
                        if d == forced || rng.random::<f64>() < spec.de.crossover_rate {
                            let v = population[r1][d] + spec.de.mutant_factor * (population[r2][d] - population[r3][d]);
                            snap(reflect(v, lo, hi)).clamp(lo, hi)
                        } else {
                            population[i][d]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_scores = evaluate(&trials, &mut cache)?;
        for (i, (t, f)) in trials.into_iter().zip(trial_scores).enumerate() {
            if f.score >= scores[i].score {
                population[i] = t;
                scores[i] = f;
            }
        }
        history.push(scores[best_of(&scores)].score);
    }

    let best = best_of(&scores);
    let f = scores[best];
    if !f.feasible {
        return Err(Error::NoFeasible {
            shortfall: -f.score,
        });
    }
    let class_values = population[best].clone();
    let degrees = TargetDegreeVector::from_classes(&spec.classes, &class_values, spec.topology.num_groups())?.g;
    Ok(OptimizationResult {
        class_values,
        degrees,
        throughput: f.throughput,
        slots: f.slots,
        plr_avg: f.plr_avg,
        feasible: f.feasible,
        history,
        evaluations: cache.len(),
    })
}
