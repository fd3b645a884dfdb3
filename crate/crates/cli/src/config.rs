//! Experiment configuration: TOML file, named presets and flag overrides,
//! merged into one effective config whose hash tags every output.

use std::path::{Path, PathBuf};

use frameless_core::analysis::{simultaneous_transmission_degrees, Mode, SINGLE_BS_DEGREE};
use frameless_core::topology::{GroupConfig, TopologyConfig};
use frameless_core::{NetworkTopology, TargetDegreeVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Users per group when only the number of base stations is given.
pub const DEFAULT_USERS: u64 = 10_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Full topology: every non-empty subset of the base stations is a group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_bs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users_per_group: Option<u64>,
    /// Explicit groups; overrides the full topology.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<GroupConfig>>,
    /// Groups (numbered from 1) sharing a target degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_classes: Option<Vec<Vec<usize>>>,
    /// One target degree per group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<f64>>,
    /// One target degree per tie class, or per coverage class without ties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_degrees: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub compare: CompareSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Explicit frame lengths; otherwise the peak search range is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Frameless,
    Fixed,
    SpatioTemporal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    /// Frame length for the fixed-length schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_cap: Option<u64>,
    /// Normalized loads `N / (M T)` to sweep with the fixed-length schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<Vec<f64>>,
    /// Repetition masses: entry `s - 1` is the probability of `s` replicas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutant_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundDegrees {
    /// Tabulated optimum for M <= 4, simultaneous-transmission degrees beyond.
    Reference,
    /// Optimize the bound-mode throughput.
    Optimize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users_per_group: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_degrees: Option<BoundDegrees>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<Vec<f64>>,
    /// Scheme compared against frameless transmission; spatio-temporal by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<SchemeKind>,
}

/// Optimized class degrees for full symmetric networks, by coverage size.
pub fn reference_class_degrees(num_bs: usize) -> Option<Vec<f64>> {
    match num_bs {
        1 => Some(vec![3.10]),
        2 => Some(vec![1.81, 1.68]),
        3 => Some(vec![1.11, 0.94, 0.78]),
        4 => Some(vec![0.69, 0.52, 0.46, 0.46]),
        _ => None,
    }
}

fn two_bs(n1: u64, n3: u64, g1: f64, g3: f64) -> ExperimentConfig {
    let group = |bs_set: Vec<usize>, num_users| GroupConfig { bs_set, num_users };
    ExperimentConfig {
        groups: Some(vec![group(vec![1], n1), group(vec![2], n1), group(vec![1, 2], n3)]),
        tie_classes: Some(vec![vec![1, 2], vec![3]]),
        degrees: Some(vec![g1, g1, g3]),
        ..Default::default()
    }
    .with_bs(2)
}

impl ExperimentConfig {
    fn with_bs(mut self, m: usize) -> Self {
        self.num_bs = Some(m);
        self
    }

    pub fn preset_names() -> &'static [&'static str] {
        &[
            "sym1", "sym2", "sym3", "sym4", "two-bs-a", "two-bs-b", "two-bs-c", "two-bs-d", "two-bs-e",
            "two-bs-f", "two-bs-g", "delta2",
        ]
    }

    /// Built-in networks with their optimized degrees.
    pub fn preset(name: &str) -> CliResult<Self> {
        let mut cfg = match name {
            "sym1" | "sym2" | "sym3" | "sym4" => {
                let m = name[3..].parse().expect("preset digit");
                ExperimentConfig {
                    num_bs: Some(m),
                    users_per_group: Some(DEFAULT_USERS),
                    class_degrees: reference_class_degrees(m),
                    ..Default::default()
                }
            }
            "two-bs-a" => two_bs(0, 10_000, 0.0, 3.098),
            "two-bs-b" => two_bs(100, 10_000, 1.388, 3.094),
            "two-bs-c" => two_bs(1_000, 10_000, 1.621, 3.063),
            "two-bs-d" => two_bs(10_000, 10_000, 1.812, 1.680),
            "two-bs-e" => two_bs(10_000, 1_000, 3.051, 1.869),
            "two-bs-f" => two_bs(10_000, 100, 3.096, 0.302),
            "two-bs-g" => two_bs(10_000, 0, 3.098, 0.0),
            "delta2" => {
                let group = |bs_set: Vec<usize>, num_users| GroupConfig { bs_set, num_users };
                ExperimentConfig {
                    groups: Some(vec![
                        group(vec![1], 2_000),
                        group(vec![2], 2_000),
                        group(vec![3], 2_000),
                        group(vec![1, 2], 2_000),
                        group(vec![1, 2, 3], 6_000),
                    ]),
                    tie_classes: Some(vec![vec![1, 2], vec![3], vec![4], vec![5]]),
                    degrees: Some(vec![1.42, 1.42, 1.30, 0.47, 2.33]),
                    simulation: SimulationSection {
                        repetition: Some(vec![0.0, 1.0]),
                        ..Default::default()
                    },
                    ..Default::default()
                }
                .with_bs(3)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown preset {other:?}; known presets: {}",
                    Self::preset_names().join(", ")
                )))
            }
        };
        cfg.preset = Some(name.to_string());
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`, section by section.
    pub fn merge(self, over: ExperimentConfig) -> Self {
        fn pick<T>(base: Option<T>, over: Option<T>) -> Option<T> {
            over.or(base)
        }
        // A new topology source drops the old one's groups, ties and degrees.
        let new_topology = over.num_bs.is_some() || over.groups.is_some();
        let (groups, tie_classes) = if new_topology {
            (over.groups, over.tie_classes)
        } else {
            (self.groups, pick(self.tie_classes, over.tie_classes))
        };
        let new_degrees = over.degrees.is_some() || over.class_degrees.is_some();
        let (degrees, class_degrees) = if new_degrees || new_topology {
            (over.degrees, over.class_degrees)
        } else {
            (self.degrees, self.class_degrees)
        };
        ExperimentConfig {
            preset: pick(self.preset, over.preset),
            num_bs: pick(self.num_bs, over.num_bs),
            users_per_group: if new_topology {
                over.users_per_group
            } else {
                pick(self.users_per_group, over.users_per_group)
            },
            groups,
            tie_classes,
            degrees,
            class_degrees,
            mode: pick(self.mode, over.mode),
            alpha: pick(self.alpha, over.alpha),
            seed: pick(self.seed, over.seed),
            analysis: AnalysisSection {
                slots: pick(self.analysis.slots, over.analysis.slots),
                t_min: pick(self.analysis.t_min, over.analysis.t_min),
                t_max: pick(self.analysis.t_max, over.analysis.t_max),
                t_step: pick(self.analysis.t_step, over.analysis.t_step),
                max_iter: pick(self.analysis.max_iter, over.analysis.max_iter),
                tol: pick(self.analysis.tol, over.analysis.tol),
                coarse_points: pick(self.analysis.coarse_points, over.analysis.coarse_points),
                cache_dir: pick(self.analysis.cache_dir, over.analysis.cache_dir),
            },
            simulation: SimulationSection {
                trials: pick(self.simulation.trials, over.simulation.trials),
                scheme: pick(self.simulation.scheme, over.simulation.scheme),
                slots: pick(self.simulation.slots, over.simulation.slots),
                slot_cap: pick(self.simulation.slot_cap, over.simulation.slot_cap),
                loads: pick(self.simulation.loads, over.simulation.loads),
                repetition: pick(self.simulation.repetition, over.simulation.repetition),
            },
            optimizer: OptimizerSection {
                population: pick(self.optimizer.population, over.optimizer.population),
                generations: pick(self.optimizer.generations, over.optimizer.generations),
                mutant_factor: pick(self.optimizer.mutant_factor, over.optimizer.mutant_factor),
                crossover_rate: pick(self.optimizer.crossover_rate, over.optimizer.crossover_rate),
                lower: pick(self.optimizer.lower, over.optimizer.lower),
                upper: pick(self.optimizer.upper, over.optimizer.upper),
            },
            bounds: BoundsSection {
                m_list: pick(self.bounds.m_list, over.bounds.m_list),
                users_per_group: pick(self.bounds.users_per_group, over.bounds.users_per_group),
                lower_degrees: pick(self.bounds.lower_degrees, over.bounds.lower_degrees),
            },
            compare: CompareSection {
                loads: pick(self.compare.loads, over.compare.loads),
                trials: pick(self.compare.trials, over.compare.trials),
                repetition: pick(self.compare.repetition, over.compare.repetition),
                baseline: pick(self.compare.baseline, over.compare.baseline),
            },
        }
    }

    pub fn has_topology(&self) -> bool {
        self.groups.is_some() || self.num_bs.is_some()
    }

    pub fn topology(&self) -> CliResult<NetworkTopology> {
        let topology = match (&self.groups, self.num_bs) {
            (Some(groups), Some(num_bs)) => NetworkTopology::from_config(&TopologyConfig {
                num_bs,
                tie_classes: self.tie_classes.clone(),
                groups: groups.clone(),
            })?,
            (Some(_), None) => return Err(CliError::Config("groups need num_bs".into())),
            (None, Some(num_bs)) => {
                let mut t = NetworkTopology::full_uniform(num_bs, self.users_per_group.unwrap_or(DEFAULT_USERS))?;
                if let Some(classes) = &self.tie_classes {
                    t.set_tie_classes(Some(zero_based(classes)?))?;
                }
                t
            }
            (None, None) => {
                return Err(CliError::Config(
                    "no network given; use --config, --preset or --M".into(),
                ))
            }
        };
        Ok(topology)
    }

    /// Per-group degrees, from class degrees if needed; without either, the
    /// simultaneous-transmission degrees.
    pub fn degrees(&self, topology: &NetworkTopology) -> CliResult<TargetDegreeVector> {
        let degrees = if let Some(g) = &self.degrees {
            if g.len() != topology.num_groups() {
                return Err(CliError::Config(format!(
                    "{} degrees for {} groups",
                    g.len(),
                    topology.num_groups()
                )));
            }
            TargetDegreeVector::new(g.clone())
        } else if let Some(values) = &self.class_degrees {
            let classes = class_partition(topology);
            TargetDegreeVector::from_classes(&classes, values, topology.num_groups())?
        } else {
            simultaneous_transmission_degrees(topology, SINGLE_BS_DEGREE)
        };
        degrees.transmission_probs(topology)?;
        Ok(degrees)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The topology's tie classes, else its coverage classes.
pub fn class_partition(topology: &NetworkTopology) -> Vec<Vec<usize>> {
    topology
        .tie_classes()
        .map(<[_]>::to_vec)
        .unwrap_or_else(|| topology.classes_by_coverage())
}

fn zero_based(classes: &[Vec<usize>]) -> CliResult<Vec<Vec<usize>>> {
    classes
        .iter()
        .map(|c| {
            c.iter()
                .map(|&i| {
                    i.checked_sub(1)
                        .ok_or_else(|| CliError::Config("tie classes number groups from 1".into()))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in ExperimentConfig::preset_names() {
            let cfg = ExperimentConfig::preset(name).unwrap();
            let t = cfg.topology().unwrap();
            cfg.degrees(&t).unwrap();
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn overriding_the_network_drops_old_degrees() {
        let base = ExperimentConfig::preset("sym3").unwrap();
        let over = ExperimentConfig {
            num_bs: Some(1),
            ..Default::default()
        };
        let merged = base.merge(over);
        assert_eq!(merged.class_degrees, None);
        assert_eq!(merged.topology().unwrap().num_groups(), 1);
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::preset("delta2").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }
}
