//! Monte Carlo frames.
//!
//! [`run_frame`] plays frameless ALOHA slot by slot until `floor(alpha N)`
//! packets are known or the slot cap is hit. [`run_fixed_frame`] plays a
//! fixed number of slots, and [`run_spatio_temporal`] is the framed baseline
//! where each user repeats its packet in `s ~ Lambda` distinct slots. All
//! three decode jointly across base stations.

mod decoder;
mod monte_carlo;

use rand::seq::index;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use serde::Serialize;

pub use decoder::TransmissionGraph;
pub use monte_carlo::{
    monte_carlo, splitmix64, trial_rng, trial_seed, Aggregate, MonteCarloReport, MonteCarloSpec, Scheme,
    TrialRecord, RNG_ID,
};

use crate::{Error, NetworkTopology, Result, TargetDegreeVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `floor(alpha N)` packets retrieved.
    Threshold,
    /// Slot cap reached first.
    SlotCap,
    /// Fixed-length frame ran to its end.
    FixedLength,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub slots: u64,
    pub retrieved_per_group: Vec<u64>,
    pub n_ret: u64,
    pub throughput: f64,
    pub terminated_by: Termination,
}

impl FrameResult {
    fn from_graph(graph: &TransmissionGraph, terminated_by: Termination) -> Self {
        let slots = graph.slots();
        Self {
            slots,
            retrieved_per_group: graph.retrieved_per_group().to_vec(),
            n_ret: graph.retrieved(),
            throughput: if slots == 0 { 0.0 } else { graph.retrieved() as f64 / slots as f64 },
            terminated_by,
        }
    }

    /// Fraction of each group's packets lost; zero for empty groups.
    pub fn plr_per_group(&self, topology: &NetworkTopology) -> Vec<f64> {
        topology
            .groups()
            .iter()
            .zip(&self.retrieved_per_group)
            .map(|(g, &r)| {
                if g.num_users == 0 {
                    0.0
                } else {
                    1.0 - r as f64 / g.num_users as f64
                }
            })
            .collect()
    }

    pub fn plr_avg(&self, topology: &NetworkTopology) -> f64 {
        let n = topology.total_users();
        if n == 0 {
            0.0
        } else {
            1.0 - self.n_ret as f64 / n as f64
        }
    }
}

/// `10 N / M`.
pub fn default_slot_cap(topology: &NetworkTopology) -> u64 {
    (10 * topology.total_users() / topology.num_bs() as u64).max(1)
}

/// One frameless frame.
pub fn run_frame<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    alpha: f64,
    slot_cap: Option<u64>,
    rng: &mut R,
) -> Result<FrameResult> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let cap = slot_cap.unwrap_or_else(|| default_slot_cap(topology));
    if cap == 0 {
        return Err(Error::InvalidArgument("slot cap must be at least 1".into()));
    }
    let probs = degrees.transmission_probs(topology)?;
    let target = (alpha * topology.total_users() as f64).floor() as u64;
    let mut graph = TransmissionGraph::new(topology)?;
    while graph.slots() < cap {
        graph.frameless_slot(&probs, rng)?;
        graph.decode();
        if graph.retrieved() >= target {
            return Ok(FrameResult::from_graph(&graph, Termination::Threshold));
        }
    }
    Ok(FrameResult::from_graph(&graph, Termination::SlotCap))
}

/// A frameless frame of exactly `slots` slots.
pub fn run_fixed_frame<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    slots: u64,
    rng: &mut R,
) -> Result<FrameResult> {
    if slots == 0 {
        return Err(Error::InvalidArgument("frame length must be at least one slot".into()));
    }
    let probs = degrees.transmission_probs(topology)?;
    let mut graph = TransmissionGraph::new(topology)?;
    for _ in 0..slots {
        graph.frameless_slot(&probs, rng)?;
        graph.decode();
    }
    Ok(FrameResult::from_graph(&graph, Termination::FixedLength))
}

/// Repetition degree distribution: `lambda[s - 1]` is the probability of `s` replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionDist {
    lambda: Vec<f64>,
}

impl RepetitionDist {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() || lambda.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("repetition distribution needs non-negative masses".into()));
        }
        let total: f64 = lambda.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("repetition masses sum to {total}, not 1")));
        }
        Ok(Self { lambda })
    }

    /// All users send exactly `s` replicas.
    pub fn regular(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidArgument("repetition degree must be at least 1".into()));
        }
        let mut lambda = vec![0.0; s];
        lambda[s - 1] = 1.0;
        Self::new(lambda)
    }

    pub fn max_degree(&self) -> usize {
        self.lambda.iter().rposition(|&v| v > 0.0).map_or(0, |k| k + 1)
    }

    pub fn masses(&self) -> &[f64] {
        &self.lambda
    }
}

/// Framed spatio-temporal baseline: each user repeats its packet in `s ~ Lambda`
/// distinct slots of a `slots`-long frame.
pub fn run_spatio_temporal<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    dist: &RepetitionDist,
    slots: u64,
    rng: &mut R,
) -> Result<FrameResult> {
    if slots == 0 {
        return Err(Error::InvalidArgument("frame length must be at least one slot".into()));
    }
    if dist.max_degree() as u64 > slots {
        return Err(Error::InvalidArgument(format!(
            "repetition degree {} exceeds frame length {slots}",
            dist.max_degree()
        )));
    }
    let pick = WeightedIndex::new(&dist.lambda)
        .map_err(|e| Error::InvalidArgument(format!("repetition distribution: {e}")))?;
    let mut graph = TransmissionGraph::new(topology)?;
    graph.add_slots(slots);
    let n = topology.total_users() as u32;
    for user in 0..n {
        let s = pick.sample(rng) + 1;
        for slot in index::sample(rng, slots as usize, s) {
            graph.transmit(user, slot as u32);
        }
    }
    graph.decode();
    Ok(FrameResult::from_graph(&graph, Termination::FixedLength))
}

/// Probability a packet is never sent in `slots` slots, averaged over users:
/// `sum_i N_i / N (1 - p_i)^T`.
pub fn plr_floor(topology: &NetworkTopology, degrees: &TargetDegreeVector, slots: u64) -> Result<f64> {
    let probs = degrees.transmission_probs(topology)?;
    let n = topology.total_users();
    if n == 0 {
        return Ok(0.0);
    }
    Ok(topology
        .groups()
        .iter()
        .zip(probs)
        .map(|(g, p)| g.num_users as f64 / n as f64 * (1.0 - p).powf(slots as f64))
        .sum())
}

/// `N / (M T)`.
pub fn normalized_load(topology: &NetworkTopology, slots: u64) -> f64 {
    topology.total_users() as f64 / (topology.num_bs() as f64 * slots as f64)
}

/// Frame length closest to a normalized load.
pub fn slots_for_load(topology: &NetworkTopology, load: f64) -> Result<u64> {
    if !(load > 0.0) {
        return Err(Error::InvalidArgument(format!("normalized load must be positive, got {load}")));
    }
    Ok(((topology.total_users() as f64 / (topology.num_bs() as f64 * load)).round() as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lone_user_is_a_singleton() {
        let t = NetworkTopology::full(1, &[1]).unwrap();
        let g = TargetDegreeVector::new(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run_frame(&t, &g, 1.0, None, &mut rng).unwrap();
        assert_eq!(r.slots, 1);
        assert_eq!(r.throughput, 1.0);
        assert_eq!(r.terminated_by, Termination::Threshold);
        let r = run_spatio_temporal(&t, &RepetitionDist::regular(1).unwrap(), 5, &mut rng).unwrap();
        assert_eq!(r.n_ret, 1);
    }

    #[test]
    fn rejects_degenerate_frames() {
        let t = NetworkTopology::full(1, &[3]).unwrap();
        let g = TargetDegreeVector::new(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(run_fixed_frame(&t, &g, 0, &mut rng).is_err());
        assert!(run_frame(&t, &g, 0.0, None, &mut rng).is_err());
        assert!(run_frame(&t, &g, 0.5, Some(0), &mut rng).is_err());
        let d = RepetitionDist::regular(3).unwrap();
        assert!(run_spatio_temporal(&t, &d, 2, &mut rng).is_err());
        assert!(RepetitionDist::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn silent_users_hit_the_cap() {
        let t = NetworkTopology::full(1, &[4]).unwrap();
        let g = TargetDegreeVector::new(vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = run_frame(&t, &g, 0.5, Some(7), &mut rng).unwrap();
        assert_eq!(r.terminated_by, Termination::SlotCap);
        assert_eq!((r.slots, r.n_ret), (7, 0));
    }

    #[test]
    fn floor_matches_hand_value() {
        let t = NetworkTopology::full(2, &[10, 30, 0]).unwrap();
        let g = TargetDegreeVector::new(vec![1.0, 3.0, 0.0]);
        let f = plr_floor(&t, &g, 4).unwrap();
        let hand = 0.25 * 0.9f64.powi(4) + 0.75 * 0.9f64.powi(4);
        assert!((f - hand).abs() < 1e-15);
    }

    #[test]
    fn load_round_trip() {
        let t = NetworkTopology::full(2, &[100, 100, 100]).unwrap();
        let s = slots_for_load(&t, 0.75).unwrap();
        assert_eq!(s, 200);
        assert!((normalized_load(&t, s) - 0.75).abs() < 1e-12);
    }
}
