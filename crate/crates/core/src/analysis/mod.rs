//! Asymptotic analysis: density evolution, walk-graph tables, bounds and peak search.

mod bounds;
mod closed_form;
mod curve;
mod evolution;
pub mod persist;
pub mod walk;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bounds::{solve, union_lower_bound, upper_bound_throughput, UnionBound, SINGLE_BS_PEAK, SINGULAR_PIVOT};
pub use closed_form::closed_form_w_m3;
pub use curve::{
    diversity_gain, find_peak, gain_ratio, plr_curve, simultaneous_transmission_degrees, CurvePoint,
    DiversityGain, Peak, PeakSearch, PlrCurve, SINGLE_BS_DEGREE,
};
pub use evolution::{
    evolve_coop, evolve_noncoop, lower_bound_plr, EvolutionOptions, EvolutionOutcome, TraceStep,
};
pub use persist::{table_set, TableSet};
pub use walk::{
    build_retrievability_table, compute_w_coop, walk_sic, GroupProbs, RetrievabilityTable, WalkGraphPattern,
    WalkState, MAX_ENUM_GROUPS,
};

use crate::{Error, NetworkTopology, Real, Result, TargetDegreeVector};

/// Largest number of base stations for which exact cooperative analysis runs.
pub const MAX_EXACT_BS: usize = 4;
/// Group count above which exact analysis needs an explicit opt-in.
pub const LONG_RUNNING_GROUPS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Joint SIC across base stations, exact walk-graph sum.
    Coop,
    /// Every base station decodes alone.
    NonCoop,
    /// Joint SIC with the union bound in place of the exact sum.
    Bound,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coop" => Ok(Mode::Coop),
            "noncoop" | "non-coop" => Ok(Mode::NonCoop),
            "bound" => Ok(Mode::Bound),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Coop => "coop",
            Mode::NonCoop => "noncoop",
            Mode::Bound => "bound",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnalysisConfig {
    pub options: EvolutionOptions,
    /// Permit exact enumeration for networks with more than [`LONG_RUNNING_GROUPS`] groups.
    pub allow_long_running: bool,
    /// Directory for retrievability table files.
    pub cache_dir: Option<PathBuf>,
}

/// Refuses exact cooperative analysis where enumeration is infeasible or slow.
pub fn check_exact_guard(topology: &NetworkTopology, allow_long_running: bool) -> Result<()> {
    let m = topology.num_bs();
    let i = topology.num_groups();
    if m > MAX_EXACT_BS {
        return Err(Error::Guard(format!(
            "exact cooperative analysis is limited to {MAX_EXACT_BS} base stations (got {m}); use bound mode"
        )));
    }
    if i > MAX_ENUM_GROUPS {
        return Err(Error::Guard(format!(
            "exact cooperative analysis is limited to {MAX_ENUM_GROUPS} groups (got {i}); use bound mode"
        )));
    }
    if i > LONG_RUNNING_GROUPS && !allow_long_running {
        return Err(Error::Guard(format!(
            "{i} groups means 3^{} patterns per group; pass allow-long-running to proceed",
            i - 1
        )));
    }
    Ok(())
}

/// Density evolution for one topology in one mode.
#[derive(Debug, Clone)]
pub struct Analyzer {
    topology: NetworkTopology,
    mode: Mode,
    options: EvolutionOptions,
    tables: Option<Arc<TableSet>>,
}

impl Analyzer {
    /// Builds the walk-graph tables up front in cooperative mode.
    pub fn new(topology: NetworkTopology, mode: Mode, config: &AnalysisConfig) -> Result<Self> {
        let tables = if mode == Mode::Coop {
            check_exact_guard(&topology, config.allow_long_running)?;
            let dir = config.cache_dir.clone().or_else(persist::cache_dir_from_env);
            Some(Arc::new(table_set(&topology, dir.as_deref())?))
        } else {
            None
        };
        Ok(Self {
            topology,
            mode,
            options: config.options,
            tables,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn options(&self) -> &EvolutionOptions {
        &self.options
    }

    pub fn set_options(&mut self, options: EvolutionOptions) {
        self.options = options;
    }

    /// Same analyzer with different group sizes; tables depend only on connectivity.
    pub fn with_topology(&self, topology: NetworkTopology) -> Result<Self> {
        if topology.connectivity_fingerprint() != self.topology.connectivity_fingerprint() {
            return Err(Error::Topology("connectivity differs from the analyzer's".into()));
        }
        Ok(Self {
            topology,
            mode: self.mode,
            options: self.options,
            tables: self.tables.clone(),
        })
    }

    pub fn evolve<F: Real>(&self, degrees: &TargetDegreeVector, slots: u64) -> Result<EvolutionOutcome<F>> {
        match self.mode {
            Mode::Coop => {
                let tables = self.tables.as_ref().ok_or(Error::MissingTable(0))?;
                evolve_coop(&self.topology, tables, degrees, slots, &self.options)
            }
            Mode::NonCoop => evolve_noncoop(&self.topology, degrees, slots, &self.options),
            Mode::Bound => lower_bound_plr(&self.topology, degrees, slots, &self.options),
        }
    }

    pub fn curve<F: Real>(&self, degrees: &TargetDegreeVector, slots: &[u64]) -> Result<PlrCurve<F>> {
        plr_curve(self, degrees, slots)
    }

    pub fn peak<F: Real>(&self, degrees: &TargetDegreeVector, search: &PeakSearch) -> Result<Peak<F>> {
        find_peak(self, degrees, search)
    }
}
