pub mod analyze;
pub mod bounds;
pub mod compare;
pub mod optimize;
pub mod repro;
pub mod simulate;

use frameless_core::analysis::{AnalysisConfig, EvolutionOptions, Mode, PeakSearch};
use frameless_core::optimizer::DeSettings;
use frameless_core::simulator::RepetitionDist;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{Meta, Report, Sink};

/// Everything a command needs: the merged config plus run-time switches
/// that do not change results.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub workers: usize,
    pub fast: bool,
    pub allow_long_running: bool,
    pub trace: bool,
    pub sink: Sink,
}

impl Context {
    pub fn emit(&self, command: &str, report: &Report) -> CliResult<()> {
        self.sink.emit(&Meta::new(command, self.cfg.hash(), self.seed), report)
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode.unwrap_or(Mode::Coop)
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha.unwrap_or(0.8)
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        let defaults = EvolutionOptions::default();
        let a = &self.cfg.analysis;
        AnalysisConfig {
            options: EvolutionOptions {
                max_iter: a.max_iter.unwrap_or(defaults.max_iter),
                tol: a.tol.unwrap_or(defaults.tol),
                trace: false,
            },
            allow_long_running: self.allow_long_running,
            cache_dir: a.cache_dir.clone(),
        }
    }

    pub fn peak_search(&self) -> PeakSearch {
        let a = &self.cfg.analysis;
        let mut search = PeakSearch::default();
        if let Some(points) = a.coarse_points {
            search.coarse_points = points;
        }
        search
    }

    pub fn de_settings(&self) -> DeSettings {
        let base = if self.fast { DeSettings::fast() } else { DeSettings::default() };
        let o = &self.cfg.optimizer;
        DeSettings {
            population: o.population.unwrap_or(base.population),
            generations: o.generations.unwrap_or(base.generations),
            mutant_factor: o.mutant_factor.unwrap_or(base.mutant_factor),
            crossover_rate: o.crossover_rate.unwrap_or(base.crossover_rate),
        }
    }

    pub fn repetition(&self, masses: Option<&Vec<f64>>) -> CliResult<RepetitionDist> {
        Ok(match masses {
            Some(m) => RepetitionDist::new(m.clone())?,
            None => RepetitionDist::regular(2)?,
        })
    }
}

/// Normalized loads swept when none are configured.
pub fn default_loads() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}
