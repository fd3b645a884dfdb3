//! Network topology: base stations, user groups and who hears whom.
//!
//! A group is identified by the set of base stations its users reach, stored
//! as a bitmask with BS 1 in the least significant bit. Groups keep the order
//! in which they were declared; [`NetworkTopology::full`] declares all
//! non-empty subsets in ascending bitmask order.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Largest number of base stations a topology may declare.
pub const MAX_BS: usize = 16;

/// Set of base stations, bit `j` set when BS `j + 1` is a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BsSet(u32);

impl BsSet {
    pub fn from_mask(mask: u32) -> Self {
        Self(mask)
    }

    /// Builds a set from 1-based base station numbers.
    pub fn from_members(members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &bs in members {
            if bs == 0 || bs > MAX_BS {
                return Err(Error::Topology(format!("base station {bs} out of range 1..={MAX_BS}")));
            }
            mask |= 1 << (bs - 1);
        }
        Ok(Self(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Zero-based indices of member base stations, ascending.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |j| mask & (1 << j) != 0)
    }

    pub fn contains(self, bs_index: usize) -> bool {
        self.0 & (1 << bs_index) != 0
    }

    /// 1-based member numbers, as written in configuration files.
    pub fn members(self) -> Vec<usize> {
        self.indices().map(|j| j + 1).collect()
    }
}

impl fmt::Display for BsSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members().iter().map(|m| m.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub bs_set: BsSet,
    pub num_users: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    num_bs: usize,
    groups: Vec<GroupSpec>,
    tie_classes: Option<Vec<Vec<usize>>>,
    groups_at_bs: Vec<Vec<usize>>,
}

/// On-disk form. Base stations and groups are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub num_bs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_classes: Option<Vec<Vec<usize>>>,
    pub groups: Vec<GroupConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub bs_set: Vec<usize>,
    pub num_users: u64,
}

impl NetworkTopology {
    pub fn new(num_bs: usize, groups: Vec<GroupSpec>) -> Result<Self> {
        Self::with_tie_classes(num_bs, groups, None)
    }

    /// `tie_classes` holds zero-based group indices.
    pub fn with_tie_classes(
        num_bs: usize,
        groups: Vec<GroupSpec>,
        tie_classes: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        if num_bs == 0 || num_bs > MAX_BS {
            return Err(Error::Topology(format!("num_bs must be in 1..={MAX_BS}, got {num_bs}")));
        }
        let max_groups = (1usize << num_bs) - 1;
        if groups.is_empty() {
            return Err(Error::Topology("at least one group is required".into()));
        }
        if groups.len() > max_groups {
            return Err(Error::Topology(format!(
                "{} groups exceed the 2^M - 1 = {max_groups} possible connectivity sets",
                groups.len()
            )));
        }
        let all = (1u32 << num_bs) - 1;
        for (i, g) in groups.iter().enumerate() {
            if g.bs_set.is_empty() {
                return Err(Error::Topology(format!("group {} has an empty bs_set", i + 1)));
            }
            if g.bs_set.mask() & !all != 0 {
                return Err(Error::Topology(format!(
                    "group {} reaches base station beyond num_bs = {num_bs}",
                    i + 1
                )));
            }
            if let Some(j) = groups[..i].iter().position(|h| h.bs_set == g.bs_set) {
                return Err(Error::Topology(format!(
                    "groups {} and {} share bs_set {}",
                    j + 1,
                    i + 1,
                    g.bs_set
                )));
            }
        }
        if let Some(classes) = &tie_classes {
            let mut seen = vec![false; groups.len()];
            for class in classes {
                if class.is_empty() {
                    return Err(Error::Topology("empty tie class".into()));
                }
                for &i in class {
                    if i >= groups.len() {
                        return Err(Error::Topology(format!("tie class names unknown group {}", i + 1)));
                    }
                    if std::mem::replace(&mut seen[i], true) {
                        return Err(Error::Topology(format!("group {} is in two tie classes", i + 1)));
                    }
                }
            }
        }
        let groups_at_bs = (0..num_bs)
            .map(|j| {
                groups
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.bs_set.contains(j))
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Ok(Self {
            num_bs,
            groups,
            tie_classes,
            groups_at_bs,
        })
    }

    /// Every non-empty subset of `num_bs` base stations as a group, in ascending bitmask order.
    pub fn full(num_bs: usize, counts: &[u64]) -> Result<Self> {
        if num_bs == 0 || num_bs > MAX_BS {
            return Err(Error::Topology(format!("num_bs must be in 1..={MAX_BS}, got {num_bs}")));
        }
        let n = (1usize << num_bs) - 1;
        if counts.len() != n {
            return Err(Error::Topology(format!(
                "full topology with M = {num_bs} needs {n} group counts, got {}",
                counts.len()
            )));
        }
        let groups = counts
            .iter()
            .enumerate()
            .map(|(i, &num_users)| GroupSpec {
                bs_set: BsSet::from_mask(i as u32 + 1),
                num_users,
            })
            .collect();
        Self::new(num_bs, groups)
    }

    /// Full topology with `users` in every group.
    pub fn full_uniform(num_bs: usize, users: u64) -> Result<Self> {
        Self::full(num_bs, &vec![users; (1usize << num_bs.min(MAX_BS)) - 1])
    }

    pub fn from_config(cfg: &TopologyConfig) -> Result<Self> {
        let groups = cfg
            .groups
            .iter()
            .map(|g| {
                Ok(GroupSpec {
                    bs_set: BsSet::from_members(&g.bs_set)?,
                    num_users: g.num_users,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ties = match &cfg.tie_classes {
            None => None,
            Some(classes) => Some(
                classes
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|&i| {
                                i.checked_sub(1)
                                    .ok_or_else(|| Error::Topology("tie classes number groups from 1".into()))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Self::with_tie_classes(cfg.num_bs, groups, ties)
    }

    pub fn to_config(&self) -> TopologyConfig {
        TopologyConfig {
            num_bs: self.num_bs,
            tie_classes: self
                .tie_classes
                .as_ref()
                .map(|cs| cs.iter().map(|c| c.iter().map(|i| i + 1).collect()).collect()),
            groups: self
                .groups
                .iter()
                .map(|g| GroupConfig {
                    bs_set: g.bs_set.members(),
                    num_users: g.num_users,
                })
                .collect(),
        }
    }

    /// Parses the TOML topology schema.
    pub fn load(config_text: &str) -> Result<Self> {
        let cfg: TopologyConfig =
            toml::from_str(config_text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn to_config_text(&self) -> String {
        toml::to_string(&self.to_config()).expect("topology config serializes")
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &GroupSpec {
        &self.groups[i]
    }

    pub fn total_users(&self) -> u64 {
        self.groups.iter().map(|g| g.num_users).sum()
    }

    /// Groups whose users reach base station `bs_index` (zero-based).
    pub fn groups_at(&self, bs_index: usize) -> &[usize] {
        &self.groups_at_bs[bs_index]
    }

    /// Users reaching base station `bs_index`.
    pub fn users_at(&self, bs_index: usize) -> u64 {
        self.groups_at(bs_index).iter().map(|&i| self.groups[i].num_users).sum()
    }

    pub fn find_group(&self, bs_set: BsSet) -> Option<usize> {
        self.groups.iter().position(|g| g.bs_set == bs_set)
    }

    pub fn tie_classes(&self) -> Option<&[Vec<usize>]> {
        self.tie_classes.as_deref()
    }

    pub fn set_tie_classes(&mut self, classes: Option<Vec<Vec<usize>>>) -> Result<()> {
        *self = Self::with_tie_classes(self.num_bs, std::mem::take(&mut self.groups), classes)?;
        Ok(())
    }

    /// Groups sharing the same number of reachable base stations, ascending by that number.
    pub fn classes_by_coverage(&self) -> Vec<Vec<usize>> {
        (1..=self.num_bs)
            .map(|k| {
                (0..self.groups.len())
                    .filter(|&i| self.groups[i].bs_set.len() == k)
                    .collect::<Vec<_>>()
            })
            .filter(|c| !c.is_empty())
            .collect()
    }

    /// Average number of base stations hearing a user.
    pub fn spatial_degree(&self) -> f64 {
        let n = self.total_users();
        if n == 0 {
            return 0.0;
        }
        let s: u64 = self.groups.iter().map(|g| g.num_users * g.bs_set.len() as u64).sum();
        s as f64 / n as f64
    }

    /// Hash of the connectivity structure (base stations and group sets, not counts).
    pub fn connectivity_fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"frameless-topology-v1;");
        h.update((self.num_bs as u32).to_le_bytes());
        h.update((self.groups.len() as u32).to_le_bytes());
        for g in &self.groups {
            h.update(g.bs_set.mask().to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Target degree per group: expected number of the group's users transmitting in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDegreeVector {
    pub g: Vec<f64>,
}

impl TargetDegreeVector {
    pub fn new(g: Vec<f64>) -> Self {
        Self { g }
    }

    pub fn uniform(value: f64, groups: usize) -> Self {
        Self { g: vec![value; groups] }
    }

    /// Expands one value per tie class into one value per group.
    pub fn from_classes(classes: &[Vec<usize>], values: &[f64], groups: usize) -> Result<Self> {
        if classes.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} class values for {} classes",
                values.len(),
                classes.len()
            )));
        }
        let mut g = vec![0.0; groups];
        for (class, &v) in classes.iter().zip(values) {
            for &i in class {
                g[i] = v;
            }
        }
        Ok(Self { g })
    }

    /// Per-slot transmission probability `G_i / N_i` of each group.
    ///
    /// Empty groups get probability 0. A target degree above the group size
    /// is a configuration error.
    pub fn transmission_probs(&self, topology: &NetworkTopology) -> Result<Vec<f64>> {
        if self.g.len() != topology.num_groups() {
            return Err(Error::InvalidArgument(format!(
                "{} target degrees for {} groups",
                self.g.len(),
                topology.num_groups()
            )));
        }
        self.g
            .iter()
            .zip(topology.groups())
            .enumerate()
            .map(|(i, (&g, spec))| {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::InvalidArgument(format!("target degree of group {} is {g}", i + 1)));
                }
                if spec.num_users == 0 {
                    return Ok(0.0);
                }
                let p = g / spec.num_users as f64;
                if p > 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "group {} target degree {g} exceeds its {} users",
                        i + 1,
                        spec.num_users
                    )));
                }
                Ok(p)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BS: &str = r#"
num_bs = 2

[[groups]]
bs_set = [1]
num_users = 10000

[[groups]]
bs_set = [2]
num_users = 10000

[[groups]]
bs_set = [1, 2]
num_users = 10000
"#;

    #[test]
    fn loads_two_bs_config() {
        let t = NetworkTopology::load(TWO_BS).unwrap();
        assert_eq!(t.num_bs(), 2);
        assert_eq!(t.num_groups(), 3);
        assert_eq!(t.groups_at(0), &[0, 2]);
        assert_eq!(t.groups_at(1), &[1, 2]);
        assert_eq!(t.total_users(), 30000);
    }

    #[test]
    fn single_group_single_bs() {
        let t = NetworkTopology::load("num_bs = 1\n[[groups]]\nbs_set = [1]\nnum_users = 10000\n").unwrap();
        assert_eq!(t.num_groups(), 1);
        assert_eq!(t.num_bs(), 1);
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = "num_bs = 1\n[[groups]]\nbs_set = []\nnum_users = 3\n";
        assert!(matches!(NetworkTopology::load(empty), Err(Error::Topology(_))));
        let dup = "num_bs = 2\n[[groups]]\nbs_set = [1]\nnum_users = 3\n[[groups]]\nbs_set = [1]\nnum_users = 4\n";
        assert!(matches!(NetworkTopology::load(dup), Err(Error::Topology(_))));
        let too_many = "num_bs = 1\n[[groups]]\nbs_set = [1]\nnum_users = 3\n[[groups]]\nbs_set = [1]\nnum_users = 4\n";
        assert!(NetworkTopology::load(too_many).is_err());
        let out_of_range = "num_bs = 1\n[[groups]]\nbs_set = [2]\nnum_users = 3\n";
        assert!(NetworkTopology::load(out_of_range).is_err());
        assert!(matches!(NetworkTopology::load("num_bs = "), Err(Error::Config(_))));
        assert!(matches!(NetworkTopology::load("num_bs = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn full_topology_orders_by_mask() {
        let t = NetworkTopology::full(2, &[10000, 10000, 10000]).unwrap();
        assert_eq!(t.num_groups(), 3);
        let t = NetworkTopology::full(1, &[10000]).unwrap();
        assert_eq!(t.num_groups(), 1);
        let t = NetworkTopology::full_uniform(3, 10000).unwrap();
        assert_eq!(t.num_groups(), 7);
        assert_eq!(t.group(6).bs_set.members(), vec![1, 2, 3]);
        assert_eq!(t.group(2).bs_set.members(), vec![1, 2]);
        assert!(NetworkTopology::full(2, &[1, 2]).is_err());
    }

    #[test]
    fn membership_maps_agree() {
        let t = NetworkTopology::full_uniform(4, 5).unwrap();
        for j in 0..t.num_bs() {
            for i in 0..t.num_groups() {
                assert_eq!(t.groups_at(j).contains(&i), t.group(i).bs_set.contains(j));
            }
        }
    }

    #[test]
    fn config_round_trip_with_ties() {
        let mut t = NetworkTopology::load(TWO_BS).unwrap();
        t.set_tie_classes(Some(vec![vec![0, 1], vec![2]])).unwrap();
        let text = t.to_config_text();
        let back = NetworkTopology::load(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_config_text(), text);
    }

    #[test]
    fn transmission_probabilities() {
        let t = NetworkTopology::full(2, &[10000, 0, 4]).unwrap();
        let p = TargetDegreeVector::new(vec![2.0, 1.0, 4.0]).transmission_probs(&t).unwrap();
        assert_eq!(p, vec![2e-4, 0.0, 1.0]);
        assert!(TargetDegreeVector::new(vec![2.0, 1.0, 4.5]).transmission_probs(&t).is_err());
        assert!(TargetDegreeVector::new(vec![2.0, 1.0]).transmission_probs(&t).is_err());
    }

    #[test]
    fn coverage_classes() {
        let t = NetworkTopology::full_uniform(3, 1).unwrap();
        assert_eq!(t.classes_by_coverage(), vec![vec![0, 1, 3], vec![2, 4, 5], vec![6]]);
    }
}
