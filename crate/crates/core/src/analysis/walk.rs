//! Walk graphs and retrievability tables.
//!
//! A walk graph is a one-slot snapshot of the network: every group node sits
//! in one of three states (no un-retrieved packet, exactly one, a collision of
//! several) and connects to each base station it reaches with that many
//! edges (0, 1 or 2). Running peeling SIC on the snapshot decides whether a
//! tagged packet of the target group gets out. That decision does not depend
//! on any probability, so it is computed once per (topology, target) over all
//! `3^(I-1)` companion patterns and stored as a bitset.
//!
//! Pattern index: mixed-radix base 3 over the non-target groups in ascending
//! group order, the first companion being the least significant digit. The
//! target is pinned to state 1.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::scalar::{clamp_prob, CompensatedSum};
use crate::{Error, Real, Result, Weight};

/// Largest group count whose pattern space is enumerated.
pub const MAX_ENUM_GROUPS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum WalkState {
    /// No un-retrieved packet of the group in the slot.
    Idle = 0,
    /// Exactly one un-retrieved packet.
    Single = 1,
    /// Two or more un-retrieved packets collide.
    Collided = 2,
}

impl WalkState {
    pub fn from_digit(d: u8) -> Self {
        match d {
            0 => Self::Idle,
            1 => Self::Single,
            _ => Self::Collided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkGraphPattern {
    pub states: Vec<WalkState>,
}

impl WalkGraphPattern {
    pub fn new(states: Vec<WalkState>) -> Self {
        Self { states }
    }

    /// Whether the packet of `target` (which must be in state 1) is peeled.
    pub fn retrieves(&self, masks: &[u32], target: usize) -> bool {
        let digits: Vec<u8> = self.states.iter().map(|s| *s as u8).collect();
        walk_sic(masks, &digits, target)
    }

    /// Whether `target` is alone at some base station before any peeling.
    pub fn is_initial_singleton(&self, masks: &[u32], target: usize) -> bool {
        let digits: Vec<u8> = self.states.iter().map(|s| *s as u8).collect();
        initial_singleton(masks, &digits, target)
    }
}

/// Per-group probabilities of the walk-graph states for one iteration.
///
/// `idle` and `single` are the probabilities of states 0 and 1 for a
/// companion group; `sole` is the probability that the tagged packet is the
/// only un-retrieved one of its own group in the slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupProbs<W> {
    pub idle: W,
    pub single: W,
    pub sole: W,
}

impl<W: Weight> GroupProbs<W> {
    pub fn collided(&self) -> W {
        W::one() - self.idle - self.single
    }

    fn state(&self, s: usize) -> W {
        match s {
            0 => self.idle,
            1 => self.single,
            _ => self.collided(),
        }
    }
}

/// Peeling SIC on a walk graph.
///
/// `states[k]` is 0, 1 or 2; `masks[k]` the group's base stations. A state-1
/// node is peeled when some base station it reaches has total incident edge
/// multiplicity 1; peeling removes its edges everywhere. State-2 nodes block
/// their base stations for good.
pub fn walk_sic(masks: &[u32], states: &[u8], target: usize) -> bool {
    debug_assert_eq!(states[target], 1);
    let mut blocked = 0u32;
    let mut pending = 0u32;
    for (k, &s) in states.iter().enumerate() {
        match s {
            0 => {}
            1 => pending |= 1 << k,
            _ => blocked |= masks[k],
        }
    }
    let target_bit = 1u32 << target;
    loop {
        if masks[target] & !blocked == 0 {
            return false;
        }
        // Base stations hearing exactly one pending node.
        let mut once = 0u32;
        let mut twice = 0u32;
        let mut rest = pending;
        while rest != 0 {
            let k = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            twice |= once & masks[k];
            once |= masks[k];
        }
        let free = once & !twice & !blocked;
        if free == 0 {
            return false;
        }
        if masks[target] & free != 0 {
            return true;
        }
        let mut peeled = 0u32;
        let mut rest = pending & !target_bit;
        while rest != 0 {
            let k = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if masks[k] & free != 0 {
                peeled |= 1 << k;
            }
        }
        if peeled == 0 {
            return false;
        }
        pending &= !peeled;
    }
}

fn initial_singleton(masks: &[u32], states: &[u8], target: usize) -> bool {
    let mut busy = 0u32;
    for (k, &s) in states.iter().enumerate() {
        if k != target && s != 0 {
            busy |= masks[k];
        }
    }
    masks[target] & !busy != 0
}

/// Set of companion patterns from which the target's packet is retrievable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievabilityTable {
    target: usize,
    masks: Vec<u32>,
    companions: Vec<usize>,
    retrievable: Vec<u64>,
    singleton: Vec<u64>,
}

pub(crate) fn pattern_count(companions: usize) -> usize {
    3usize.pow(companions as u32)
}

/// Enumerates all companion patterns of `target` and runs walk-graph SIC on each.
pub fn build_retrievability_table(masks: &[u32], target: usize) -> Result<RetrievabilityTable> {
    let groups = masks.len();
    if groups > MAX_ENUM_GROUPS {
        return Err(Error::Guard(format!(
            "walk-graph enumeration over {groups} groups exceeds the limit of {MAX_ENUM_GROUPS}"
        )));
    }
    if target >= groups {
        return Err(Error::InvalidArgument(format!("target group {target} out of range")));
    }
    let companions: Vec<usize> = (0..groups).filter(|&k| k != target).collect();
    let total = pattern_count(companions.len());
    let words = total.div_ceil(64);
    let (retrievable, singleton): (Vec<u64>, Vec<u64>) = (0..words)
        .into_par_iter()
        .map(|w| {
            let start = w * 64;
            let end = (start + 64).min(total);
            let mut states = vec![0u8; groups];
            states[target] = 1;
            let mut rem = start;
            for &k in &companions {
                states[k] = (rem % 3) as u8;
                rem /= 3;
            }
            let (mut rbits, mut sbits) = (0u64, 0u64);
            for bit in 0..end - start {
                if walk_sic(masks, &states, target) {
                    rbits |= 1 << bit;
                    if initial_singleton(masks, &states, target) {
                        sbits |= 1 << bit;
                    }
                }
                for &k in &companions {
                    states[k] += 1;
                    if states[k] < 3 {
                        break;
                    }
                    states[k] = 0;
                }
            }
            (rbits, sbits)
        })
        .unzip();
    Ok(RetrievabilityTable {
        target,
        masks: masks.to_vec(),
        companions,
        retrievable,
        singleton,
    })
}

impl RetrievabilityTable {
    pub(crate) fn from_parts(
        masks: Vec<u32>,
        target: usize,
        retrievable: Vec<u64>,
        singleton: Vec<u64>,
    ) -> Result<Self> {
        let companions: Vec<usize> = (0..masks.len()).filter(|&k| k != target).collect();
        let words = pattern_count(companions.len()).div_ceil(64);
        if retrievable.len() != words || singleton.len() != words {
            return Err(Error::TableFile("bitset length does not match the pattern space".into()));
        }
        Ok(Self {
            target,
            masks,
            companions,
            retrievable,
            singleton,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    /// Non-target groups in digit order.
    pub fn companions(&self) -> &[usize] {
        &self.companions
    }

    /// Size of the companion pattern space, `3^(I-1)`.
    pub fn pattern_space(&self) -> usize {
        pattern_count(self.companions.len())
    }

    pub(crate) fn retrievable_words(&self) -> &[u64] {
        &self.retrievable
    }

    pub(crate) fn singleton_words(&self) -> &[u64] {
        &self.singleton
    }

    pub fn is_retrievable(&self, index: usize) -> bool {
        self.retrievable[index / 64] >> (index % 64) & 1 == 1
    }

    /// Retrievable with the target alone at some base station from the start.
    pub fn is_singleton(&self, index: usize) -> bool {
        self.singleton[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn retrievable_count(&self) -> usize {
        self.retrievable.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn singleton_count(&self) -> usize {
        self.singleton.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Full pattern (all groups, target in state 1) of a companion index.
    pub fn pattern(&self, index: usize) -> WalkGraphPattern {
        let mut states = vec![WalkState::Idle; self.masks.len()];
        states[self.target] = WalkState::Single;
        let mut rem = index;
        for &k in &self.companions {
            states[k] = WalkState::from_digit((rem % 3) as u8);
            rem /= 3;
        }
        WalkGraphPattern { states }
    }

    pub fn retrievable_indices(&self) -> impl Iterator<Item = usize> + '_ {
        set_bits(&self.retrievable)
    }

    pub fn singleton_indices(&self) -> impl Iterator<Item = usize> + '_ {
        set_bits(&self.singleton)
    }

    /// Probability of a companion pattern given the target is the sole survivor of its group,
    /// i.e. `Pr(g) / r_target`.
    pub fn companion_mass<W: Weight>(&self, index: usize, probs: &[GroupProbs<W>]) -> W {
        let mut rem = index;
        let mut prod = W::one();
        for &k in &self.companions {
            prod = prod * probs[k].state(rem % 3);
            rem /= 3;
        }
        prod
    }

    /// `sum over retrievable g of Pr(g)` by direct enumeration (no compensation, exact for exact `W`).
    pub fn retrieval_mass_direct<W: Weight>(&self, probs: &[GroupProbs<W>]) -> W {
        let sum = self
            .retrievable_indices()
            .fold(W::zero(), |acc, idx| acc + self.companion_mass(idx, probs));
        probs[self.target].sole * sum
    }

    pub fn compile(&self) -> CompiledTable {
        CompiledTable {
            retrievable: PatternDiagram::from_bits(&self.retrievable, self.companions.len()),
            singleton: PatternDiagram::from_bits(&self.singleton, self.companions.len()),
        }
    }
}

fn set_bits(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &bits)| {
        let mut rest = bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * 64 + b)
        })
    })
}

/// `w_target = 1 - sum over retrievable patterns of Pr(g)`, by direct compensated enumeration.
pub fn compute_w_coop<F: Real>(table: &RetrievabilityTable, probs: &[GroupProbs<F>]) -> Result<F> {
    check_probs(probs)?;
    let mut acc = CompensatedSum::default();
    for idx in table.retrievable_indices() {
        acc.add(table.companion_mass(idx, probs));
    }
    clamp_prob(F::one() - probs[table.target].sole * acc.value(), "w (walk-graph sum)")
}

pub(crate) fn check_probs<F: Real>(probs: &[GroupProbs<F>]) -> Result<()> {
    for p in probs {
        clamp_prob(p.idle, "R")?;
        clamp_prob(p.single, "C")?;
        clamp_prob(p.sole, "r")?;
        clamp_prob(p.collided(), "1 - R - C")?;
    }
    Ok(())
}

/// Reduced ordered decision diagram over the companion digits.
///
/// Summing pattern probabilities over the diagram costs one multiply-add per
/// node and edge instead of one product per pattern. A node whose three
/// children coincide is elided, which is exact because the three state
/// probabilities of a group sum to one.
#[derive(Debug, Clone)]
pub struct PatternDiagram {
    /// Node `id` for `id >= 2`; ids 0 and 1 are the false and true terminals.
    nodes: Vec<DiagramNode>,
    root: u32,
}

#[derive(Debug, Clone, Copy)]
struct DiagramNode {
    digit: u8,
    child: [u32; 3],
}

impl PatternDiagram {
    fn from_bits(words: &[u64], digits: usize) -> Self {
        let total = pattern_count(digits);
        let mut ids: Vec<u32> = (0..total).map(|i| (words[i / 64] >> (i % 64) & 1) as u32).collect();
        let mut nodes = vec![
            DiagramNode { digit: u8::MAX, child: [0; 3] },
            DiagramNode { digit: u8::MAX, child: [1; 3] },
        ];
        for digit in 0..digits {
            let mut unique: HashMap<[u32; 3], u32> = HashMap::new();
            ids = ids
                .chunks_exact(3)
                .map(|c| {
                    let child = [c[0], c[1], c[2]];
                    if child[0] == child[1] && child[1] == child[2] {
                        return child[0];
                    }
                    *unique.entry(child).or_insert_with(|| {
                        nodes.push(DiagramNode {
                            digit: digit as u8,
                            child,
                        });
                        (nodes.len() - 1) as u32
                    })
                })
                .collect();
        }
        debug_assert_eq!(ids.len(), 1);
        Self { nodes, root: ids[0] }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Probability mass of the diagram's pattern set; `digit_probs[d]` are the state probabilities of digit `d`.
    pub fn mass<W: Weight>(&self, digit_probs: &[[W; 3]], scratch: &mut Vec<W>) -> W {
        scratch.clear();
        scratch.push(W::zero());
        scratch.push(W::one());
        for node in &self.nodes[2..] {
            let p = &digit_probs[node.digit as usize];
            let v = p[0] * scratch[node.child[0] as usize]
                + p[1] * scratch[node.child[1] as usize]
                + p[2] * scratch[node.child[2] as usize];
            scratch.push(v);
        }
        scratch[self.root as usize]
    }
}

/// Both diagrams of one target: all retrievable patterns and the initial-singleton subset.
#[derive(Debug, Clone)]
pub struct CompiledTable {
    pub retrievable: PatternDiagram,
    pub singleton: PatternDiagram,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::NetworkTopology;
    use WalkState::*;

    fn masks_of(t: &NetworkTopology) -> Vec<u32> {
        t.groups().iter().map(|g| g.bs_set.mask()).collect()
    }

    fn m3() -> (NetworkTopology, Vec<u32>) {
        let t = NetworkTopology::full_uniform(3, 10).unwrap();
        let m = masks_of(&t);
        (t, m)
    }

    #[test]
    fn collided_packet_recovered_through_shared_group() {
        // u1 = {1} and u7 = {1,2,3} single, u2 = {2} collided, the rest idle.
        let (t, masks) = m3();
        let mut states = vec![Idle; 7];
        let g = |m: u32| t.find_group(crate::BsSet::from_mask(m)).unwrap();
        states[g(0b001)] = Single;
        states[g(0b111)] = Single;
        states[g(0b010)] = Collided;
        let p = WalkGraphPattern::new(states);
        assert!(p.retrieves(&masks, g(0b001)));
        assert!(!p.is_initial_singleton(&masks, g(0b001)));
    }

    #[test]
    fn lone_target_is_retrievable() {
        let (_, masks) = m3();
        for target in 0..7 {
            let mut states = vec![Idle; 7];
            states[target] = Single;
            let p = WalkGraphPattern::new(states);
            assert!(p.retrieves(&masks, target));
            assert!(p.is_initial_singleton(&masks, target));
        }
    }

    #[test]
    fn neighbours_collided_blocks_target() {
        let (t, masks) = m3();
        for target in 0..7 {
            let mut states = vec![Idle; 7];
            states[target] = Single;
            for k in 0..7 {
                if k != target && t.group(k).bs_set.mask() & t.group(target).bs_set.mask() != 0 {
                    states[k] = Collided;
                }
            }
            assert!(!WalkGraphPattern::new(states).retrieves(&masks, target));
        }
    }

    #[test]
    fn table_shape_and_lookup() {
        let (_, masks) = m3();
        let table = build_retrievability_table(&masks, 0).unwrap();
        assert_eq!(table.pattern_space(), 729);
        assert!(table.is_retrievable(0));
        for idx in 0..729 {
            let p = table.pattern(idx);
            assert_eq!(table.is_retrievable(idx), p.retrieves(&masks, 0));
            if table.is_singleton(idx) {
                assert!(table.is_retrievable(idx));
                assert!(p.is_initial_singleton(&masks, 0));
            }
        }
        assert!(table.singleton_count() < table.retrievable_count());
    }

    #[test]
    fn guard_on_group_count() {
        let masks: Vec<u32> = (1..=16).collect();
        assert!(matches!(build_retrievability_table(&masks, 0), Err(Error::Guard(_))));
    }

    #[test]
    fn extreme_probabilities() {
        let (_, masks) = m3();
        let table = build_retrievability_table(&masks, 3).unwrap();
        let idle = vec![GroupProbs { idle: 1.0, single: 0.0, sole: 1.0 }; 7];
        assert_eq!(compute_w_coop(&table, &idle).unwrap(), 0.0);
        let mut never = idle.clone();
        never[3].sole = 0.0;
        assert_eq!(compute_w_coop(&table, &never).unwrap(), 1.0);
        let bad = vec![GroupProbs { idle: 0.7, single: 0.5, sole: 1.0 }; 7];
        assert!(compute_w_coop(&table, &bad).is_err());
    }

    #[test]
    fn diagram_matches_direct_sum() {
        let (_, masks) = m3();
        let probs: Vec<GroupProbs<f64>> = (0..7)
            .map(|k| {
                let idle = 0.1 + 0.11 * k as f64;
                GroupProbs { idle, single: (1.0 - idle) * 0.6, sole: 0.3 + 0.05 * k as f64 }
            })
            .collect();
        for target in 0..7 {
            let table = build_retrievability_table(&masks, target).unwrap();
            let compiled = table.compile();
            let digit: Vec<[f64; 3]> = table
                .companions()
                .iter()
                .map(|&k| [probs[k].idle, probs[k].single, probs[k].collided()])
                .collect();
            let mut scratch = Vec::new();
            let fast = probs[target].sole * compiled.retrievable.mass(&digit, &mut scratch);
            let direct = table.retrieval_mass_direct(&probs);
            assert!((fast - direct).abs() < 1e-14);
            assert!(compiled.retrievable.node_count() < table.retrievable_count());
        }
    }
}
