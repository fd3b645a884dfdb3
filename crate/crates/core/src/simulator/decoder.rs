//! Joint peeling decoder over all base stations.
//!
//! Each (slot, BS) observation keeps the number of unretrieved packets it
//! holds and the XOR of their user ids, so a bucket with count one names its
//! user directly. Retrieving a user subtracts it from every bucket it touched
//! at every BS, which is what sharing packets over the backhaul amounts to.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::{Error, NetworkTopology, Result};

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    count: u32,
    xor: u32,
}

#[derive(Debug, Clone)]
pub struct TransmissionGraph {
    num_bs: usize,
    masks: Vec<u32>,
    user_group: Vec<u32>,
    /// Unretrieved users per group; `position` indexes into it.
    pending: Vec<Vec<u32>>,
    position: Vec<u32>,
    retrieved: Vec<bool>,
    retrieved_per_group: Vec<u64>,
    /// Slots each user transmitted in.
    replicas: Vec<Vec<u32>>,
    buckets: Vec<Bucket>,
    ripple: Vec<usize>,
    slots: u64,
    n_ret: u64,
}

impl TransmissionGraph {
    pub fn new(topology: &NetworkTopology) -> Result<Self> {
        let n = topology.total_users();
        if n >= u32::MAX as u64 {
            return Err(Error::InvalidArgument(format!("{n} users do not fit 32-bit ids")));
        }
        let mut user_group = Vec::with_capacity(n as usize);
        let mut pending = Vec::with_capacity(topology.num_groups());
        let mut position = Vec::with_capacity(n as usize);
        for (g, spec) in topology.groups().iter().enumerate() {
            let start = user_group.len() as u32;
            user_group.extend(std::iter::repeat(g as u32).take(spec.num_users as usize));
            pending.push((start..start + spec.num_users as u32).collect::<Vec<_>>());
            position.extend(0..spec.num_users as u32);
        }
        Ok(Self {
            num_bs: topology.num_bs(),
            masks: topology.groups().iter().map(|g| g.bs_set.mask()).collect(),
            user_group,
            pending,
            position,
            retrieved: vec![false; n as usize],
            retrieved_per_group: vec![0; topology.num_groups()],
            replicas: vec![Vec::new(); n as usize],
            buckets: Vec::new(),
            ripple: Vec::new(),
            slots: 0,
            n_ret: 0,
        })
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    pub fn retrieved(&self) -> u64 {
        self.n_ret
    }

    pub fn retrieved_per_group(&self) -> &[u64] {
        &self.retrieved_per_group
    }

    pub fn pending_in(&self, group: usize) -> usize {
        self.pending[group].len()
    }

    pub fn is_retrieved(&self, user: u32) -> bool {
        self.retrieved[user as usize]
    }

    /// Opens `count` empty slots.
    pub fn add_slots(&mut self, count: u64) {
        self.slots += count;
        self.buckets
            .resize(self.slots as usize * self.num_bs, Bucket::default());
    }

    /// Records a transmission of `user` in `slot` at every BS of its group.
    pub fn transmit(&mut self, user: u32, slot: u32) {
        debug_assert!(!self.retrieved[user as usize]);
        debug_assert!((slot as u64) < self.slots);
        self.replicas[user as usize].push(slot);
        let mask = self.masks[self.user_group[user as usize] as usize];
        let base = slot as usize * self.num_bs;
        for j in 0..self.num_bs {
            if mask & (1 << j) != 0 {
                let b = &mut self.buckets[base + j];
                b.count += 1;
                b.xor ^= user;
                if b.count == 1 {
                    self.ripple.push(base + j);
                }
            }
        }
    }

    /// One frameless slot: every unretrieved user of group `g` transmits with
    /// probability `probs[g]`.
    pub fn frameless_slot<R: Rng + ?Sized>(&mut self, probs: &[f64], rng: &mut R) -> Result<()> {
        self.add_slots(1);
        let slot = (self.slots - 1) as u32;
        let mut chosen = Vec::new();
        for (g, &p) in probs.iter().enumerate() {
            let n = self.pending[g].len();
            if n == 0 || p <= 0.0 {
                continue;
            }
            let k = if p >= 1.0 {
                n
            } else {
                Binomial::new(n as u64, p)
                    .map_err(|e| Error::InvalidArgument(format!("transmission probability: {e}")))?
                    .sample(rng) as usize
            };
            chosen.clear();
            chosen.extend(index::sample(rng, n, k).iter().map(|i| self.pending[g][i]));
            for &u in &chosen {
                self.transmit(u, slot);
            }
        }
        Ok(())
    }

    fn retrieve(&mut self, user: u32) {
        let u = user as usize;
        self.retrieved[u] = true;
        self.n_ret += 1;
        let g = self.user_group[u] as usize;
        self.retrieved_per_group[g] += 1;
        let pos = self.position[u] as usize;
        let list = &mut self.pending[g];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.position[moved as usize] = pos as u32;
        }
        let mask = self.masks[g];
        for &slot in &self.replicas[u] {
            let base = slot as usize * self.num_bs;
            for j in 0..self.num_bs {
                if mask & (1 << j) != 0 {
                    let b = &mut self.buckets[base + j];
                    b.count -= 1;
                    b.xor ^= user;
                    if b.count == 1 {
                        self.ripple.push(base + j);
                    }
                }
            }
        }
        self.replicas[u] = Vec::new();
    }

    /// Peels singleton buckets until none is left.
    pub fn decode(&mut self) {
        while let Some(b) = self.ripple.pop() {
            let bucket = self.buckets[b];
            if bucket.count != 1 {
                continue;
            }
            // A user counted in several buckets can be queued more than once.
            if !self.retrieved[bucket.xor as usize] {
                self.retrieve(bucket.xor);
            }
        }
    }

    /// True when no bucket holds exactly one unretrieved packet.
    pub fn at_fixpoint(&self) -> bool {
        self.buckets.iter().all(|b| b.count != 1)
    }

    /// Unretrieved packets per bucket, slot-major then BS.
    pub fn bucket_counts(&self) -> impl Iterator<Item = u32> + '_ {
        self.buckets.iter().map(|b| b.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_chain_across_stations() {
        // Groups {1}, {2}, {1,2}; one user each, ids 0, 1, 2.
        let t = NetworkTopology::full(2, &[1, 1, 1]).unwrap();
        let mut g = TransmissionGraph::new(&t).unwrap();
        g.add_slots(1);
        g.transmit(0, 0);
        g.transmit(2, 0);
        g.decode();
        assert_eq!(g.retrieved(), 2);
        assert!(g.is_retrieved(2) && g.is_retrieved(0));
        g.add_slots(1);
        g.transmit(1, 1);
        g.decode();
        assert_eq!(g.retrieved(), 3);
        assert!(g.at_fixpoint());
        assert!(g.bucket_counts().all(|c| c == 0));
    }

    #[test]
    fn collision_stays_put() {
        let t = NetworkTopology::full(1, &[2]).unwrap();
        let mut g = TransmissionGraph::new(&t).unwrap();
        g.add_slots(2);
        g.transmit(0, 0);
        g.transmit(1, 0);
        g.transmit(0, 1);
        g.transmit(1, 1);
        g.decode();
        assert_eq!(g.retrieved(), 0);
        assert!(g.at_fixpoint());
    }
}
