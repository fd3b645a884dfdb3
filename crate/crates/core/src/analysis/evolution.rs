//! Density evolution for a fixed frame length.
//!
//! Two messages are iterated from "nothing retrieved" (`x = 1`):
//! `w`, the probability that a packet's edge is still collided, and `x`, the
//! probability that the packet is still unknown. Without cooperation every
//! base station evolves its own `x_{i,j}` and a group's loss combines the
//! per-BS `w` as if independent. With cooperation `x_i` is shared and `w_i`
//! comes from the walk-graph pattern sum. The bound mode swaps that sum for a
//! union lower bound on the clean-singleton events.

use crate::analysis::bounds::union_lower_bound;
use crate::analysis::persist::TableSet;
use crate::analysis::walk::GroupProbs;
use crate::degrees::Binomial;
use crate::scalar::clamp_prob;
use crate::{Error, NetworkTopology, Real, Result, TargetDegreeVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOptions {
    pub max_iter: usize,
    /// Stop once no `x` moves by this much in one iteration.
    pub tol: f64,
    /// Record every iterate (and the singleton/collision split in cooperative mode).
    pub trace: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-10,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<F> {
    pub iteration: usize,
    /// Non-retrieval probabilities after this iteration: one per group
    /// (cooperative, bound) or one per (group, reachable BS) pair, group-major.
    pub x: Vec<F>,
    /// Retrieval mass from patterns where the target starts as a clean singleton, per group.
    pub p_r0: Vec<F>,
    /// Retrieval mass only reachable by peeling collisions first, per group.
    pub p_r1: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome<F> {
    pub slots: u64,
    /// Packet loss rate per group; zero for empty groups.
    pub plr: Vec<F>,
    /// Final collision probability per group (product over BSs without cooperation).
    pub w: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceStep<F>>,
}

impl<F: Real> EvolutionOutcome<F> {
    /// Loss rate averaged over all users.
    pub fn average_plr(&self, topology: &NetworkTopology) -> F {
        let n = topology.total_users();
        if n == 0 {
            return F::zero();
        }
        let weighted: F = topology
            .groups()
            .iter()
            .zip(&self.plr)
            .map(|(g, &p)| F::lit(g.num_users as f64) * p)
            .sum();
        weighted / F::lit(n as f64)
    }

    /// Retrieved packets per slot, `sum N_i (1 - p_e,i) / T`.
    pub fn throughput(&self, topology: &NetworkTopology) -> F {
        let retrieved: F = topology
            .groups()
            .iter()
            .zip(&self.plr)
            .map(|(g, &p)| F::lit(g.num_users as f64) * (F::one() - p))
            .sum();
        retrieved / F::lit(self.slots as f64)
    }
}

#[derive(Debug, Clone, Copy)]
struct GroupModel<F> {
    users: u64,
    /// Users of the group in one slot.
    slot: Binomial<F>,
    /// Slots of one user over the frame.
    frame: Binomial<F>,
}

impl<F: Real> GroupModel<F> {
    fn active(&self) -> bool {
        self.users > 0
    }

    /// Probability that all of the group's transmissions in a slot are known: `R(1 - x)`.
    fn idle(&self, x: F) -> F {
        self.slot.eval(F::one() - x)
    }

    /// Probability that the other users of a tagged packet's group are known: `rho(1 - x)`.
    fn sole(&self, x: F) -> F {
        self.slot.edge_eval(F::one() - x)
    }

    /// Probability of exactly one unknown packet of the group in a slot.
    fn single(&self, x: F) -> F {
        if self.users == 0 {
            return F::zero();
        }
        F::lit(self.users as f64) * self.slot.p * x * self.slot.edge_eval(F::one() - x)
    }

    fn walk_probs(&self, x: F) -> GroupProbs<F> {
        GroupProbs {
            idle: self.idle(x),
            single: self.single(x),
            sole: self.sole(x),
        }
    }

    /// `lambda(w)`.
    fn still_unknown(&self, w: F) -> F {
        self.frame.edge_eval(w)
    }

    /// `L(w)`.
    fn loss(&self, w: F) -> F {
        if self.users == 0 {
            return F::zero();
        }
        self.frame.eval(w)
    }
}

fn group_models<F: Real>(
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    slots: u64,
) -> Result<Vec<GroupModel<F>>> {
    if slots == 0 {
        return Err(Error::InvalidArgument("frame length must be at least one slot".into()));
    }
    let probs = degrees.transmission_probs(topology)?;
    topology
        .groups()
        .iter()
        .zip(probs)
        .map(|(g, p)| {
            let p = F::lit(p);
            Ok(GroupModel {
                users: g.num_users,
                slot: Binomial::new(g.num_users, p)?,
                frame: Binomial::new(slots, p)?,
            })
        })
        .collect()
}

/// Products of a list of values with one member left out, via prefix and suffix products.
#[derive(Debug, Clone)]
struct LeaveOneOut<F> {
    members: Vec<usize>,
    prefix: Vec<F>,
    suffix: Vec<F>,
}

impl<F: Real> LeaveOneOut<F> {
    fn new(members: Vec<usize>) -> Self {
        let n = members.len();
        Self {
            members,
            prefix: vec![F::one(); n + 1],
            suffix: vec![F::one(); n + 1],
        }
    }

    fn update(&mut self, value: impl Fn(usize) -> F) {
        let n = self.members.len();
        for k in 0..n {
            self.prefix[k + 1] = self.prefix[k] * value(self.members[k]);
        }
        for k in (0..n).rev() {
            self.suffix[k] = self.suffix[k + 1] * value(self.members[k]);
        }
    }

    fn without(&self, group: usize) -> F {
        let pos = self
            .members
            .binary_search(&group)
            .expect("group is a member");
        self.prefix[pos] * self.suffix[pos + 1]
    }
}

fn finish<F: Real>(
    models: &[GroupModel<F>],
    w: Vec<F>,
    slots: u64,
    iterations: usize,
    converged: bool,
    trace: Vec<TraceStep<F>>,
) -> Result<EvolutionOutcome<F>> {
    let plr = models
        .iter()
        .zip(&w)
        .map(|(m, &w)| clamp_prob(m.loss(w), "packet loss rate"))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionOutcome {
        slots,
        plr,
        w,
        iterations,
        converged,
        trace,
    })
}

/// Density evolution with every base station decoding on its own.
pub fn evolve_noncoop<F: Real>(
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    slots: u64,
    opts: &EvolutionOptions,
) -> Result<EvolutionOutcome<F>> {
    let models = group_models::<F>(topology, degrees, slots)?;
    let num_bs = topology.num_bs();
    // x[bs][k] for the k-th group at that BS.
    let mut x: Vec<Vec<F>> = (0..num_bs)
        .map(|j| vec![F::one(); topology.groups_at(j).len()])
        .collect();
    let mut w: Vec<Vec<F>> = x.clone();
    let mut others: Vec<LeaveOneOut<F>> = (0..num_bs)
        .map(|j| LeaveOneOut::new(topology.groups_at(j).to_vec()))
        .collect();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut delta = F::zero();
        for j in 0..num_bs {
            let members = topology.groups_at(j);
            let xj = &x[j];
            others[j].update(|g| {
                let k = members.binary_search(&g).expect("member");
                models[g].idle(xj[k])
            });
            for (k, &g) in members.iter().enumerate() {
                let m = &models[g];
                let clean = m.sole(xj[k]) * others[j].without(g);
                w[j][k] = clamp_prob(F::one() - clean, "w (per base station)")?;
            }
        }
        for j in 0..num_bs {
            for (k, &g) in topology.groups_at(j).iter().enumerate() {
                let next = models[g].still_unknown(w[j][k]);
                delta = delta.max((next - x[j][k]).abs());
                x[j][k] = next;
            }
        }
        if opts.trace {
            let mut flat = Vec::new();
            for g in 0..topology.num_groups() {
                for j in topology.group(g).bs_set.indices() {
                    let k = topology.groups_at(j).binary_search(&g).expect("member");
                    flat.push(x[j][k]);
                }
            }
            trace.push(TraceStep {
                iteration: iterations,
                x: flat,
                p_r0: Vec::new(),
                p_r1: Vec::new(),
            });
        }
        if delta < F::lit(opts.tol) {
            converged = true;
            break;
        }
    }
    let combined: Vec<F> = (0..topology.num_groups())
        .map(|g| {
            topology.group(g).bs_set.indices().fold(F::one(), |acc, j| {
                let k = topology.groups_at(j).binary_search(&g).expect("member");
                acc * w[j][k]
            })
        })
        .collect();
    finish(&models, combined, slots, iterations, converged, trace)
}

/// Density evolution with joint SIC, `w_i` from the walk-graph tables.
pub fn evolve_coop<F: Real>(
    topology: &NetworkTopology,
    tables: &TableSet,
    degrees: &TargetDegreeVector,
    slots: u64,
    opts: &EvolutionOptions,
) -> Result<EvolutionOutcome<F>> {
    let models = group_models::<F>(topology, degrees, slots)?;
    let groups = topology.num_groups();
    if tables.compiled.len() != groups {
        return Err(Error::MissingTable(tables.compiled.len()));
    }
    let mut x = vec![F::one(); groups];
    let mut w = vec![F::one(); groups];
    let mut probs = vec![GroupProbs { idle: F::one(), single: F::zero(), sole: F::one() }; groups];
    let mut digits: Vec<[F; 3]> = Vec::with_capacity(groups);
    let mut scratch = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        for (g, m) in models.iter().enumerate() {
            let p = m.walk_probs(x[g]);
            clamp_prob(p.collided(), "1 - R - C")?;
            probs[g] = GroupProbs {
                idle: clamp_prob(p.idle, "R")?,
                single: clamp_prob(p.single, "C")?,
                sole: clamp_prob(p.sole, "r")?,
            };
        }
        let (mut r0, mut r1) = (Vec::new(), Vec::new());
        for g in 0..groups {
            if !models[g].active() {
                w[g] = F::zero();
                if opts.trace {
                    r0.push(F::zero());
                    r1.push(F::zero());
                }
                continue;
            }
            let table = &tables.tables[g];
            digits.clear();
            digits.extend(table.companions().iter().map(|&k| {
                let p = probs[k];
                [p.idle, p.single, (F::one() - p.idle - p.single).max(F::zero())]
            }));
            let compiled = &tables.compiled[g];
            let retrieved = probs[g].sole * compiled.retrievable.mass(&digits, &mut scratch);
            w[g] = clamp_prob(F::one() - retrieved, "w (cooperative)")?;
            if opts.trace {
                let single = probs[g].sole * compiled.singleton.mass(&digits, &mut scratch);
                r0.push(single);
                r1.push(retrieved - single);
            }
        }
        let mut delta = F::zero();
        for g in 0..groups {
            if !models[g].active() {
                continue;
            }
            let next = models[g].still_unknown(w[g]);
            delta = delta.max((next - x[g]).abs());
            x[g] = next;
        }
        if opts.trace {
            trace.push(TraceStep {
                iteration: iterations,
                x: x.clone(),
                p_r0: r0,
                p_r1: r1,
            });
        }
        if delta < F::lit(opts.tol) {
            converged = true;
            break;
        }
    }
    finish(&models, w, slots, iterations, converged, trace)
}

/// Density evolution with `w_i` taken from the union lower bound, giving a PLR upper bound.
pub fn lower_bound_plr<F: Real>(
    topology: &NetworkTopology,
    degrees: &TargetDegreeVector,
    slots: u64,
    opts: &EvolutionOptions,
) -> Result<EvolutionOutcome<F>> {
    let models = group_models::<F>(topology, degrees, slots)?;
    let groups = topology.num_groups();
    let num_bs = topology.num_bs();
    let mut single_bs: Vec<LeaveOneOut<F>> = (0..num_bs)
        .map(|j| LeaveOneOut::new(topology.groups_at(j).to_vec()))
        .collect();
    // Pairs (j1 < j2) actually shared by some group.
    let mut pair_index = vec![vec![usize::MAX; num_bs]; num_bs];
    let mut pairs: Vec<LeaveOneOut<F>> = Vec::new();
    for j1 in 0..num_bs {
        for j2 in j1 + 1..num_bs {
            let both = (1u32 << j1) | (1u32 << j2);
            let shared = topology
                .groups()
                .iter()
                .any(|g| g.bs_set.mask() & both == both);
            if shared {
                pair_index[j1][j2] = pairs.len();
                pairs.push(LeaveOneOut::new(
                    (0..groups)
                        .filter(|&g| topology.group(g).bs_set.mask() & both != 0)
                        .collect(),
                ));
            }
        }
    }
    let mut x = vec![F::one(); groups];
    let mut w = vec![F::one(); groups];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let idle: Vec<F> = models
            .iter()
            .zip(&x)
            .map(|(m, &x)| clamp_prob(m.idle(x), "R"))
            .collect::<Result<_>>()?;
        for lo in single_bs.iter_mut().chain(pairs.iter_mut()) {
            lo.update(|g| idle[g]);
        }
        for g in 0..groups {
            if !models[g].active() {
                w[g] = F::zero();
                continue;
            }
            let sole = clamp_prob(models[g].sole(x[g]), "r")?;
            let bss: Vec<usize> = topology.group(g).bs_set.indices().collect();
            let p: Vec<F> = bss.iter().map(|&j| sole * single_bs[j].without(g)).collect();
            let q: Vec<Vec<F>> = bss
                .iter()
                .enumerate()
                .map(|(a, &ja)| {
                    bss.iter()
                        .enumerate()
                        .map(|(b, &jb)| {
                            if a == b {
                                p[a]
                            } else {
                                let (lo, hi) = (ja.min(jb), ja.max(jb));
                                sole * pairs[pair_index[lo][hi]].without(g)
                            }
                        })
                        .collect()
                })
                .collect();
            let bound = union_lower_bound(&p, &q);
            w[g] = clamp_prob(F::one() - bound.value, "w (union bound)")?;
        }
        let mut delta = F::zero();
        for g in 0..groups {
            if !models[g].active() {
                continue;
            }
            let next = models[g].still_unknown(w[g]);
            delta = delta.max((next - x[g]).abs());
            x[g] = next;
        }
        if opts.trace {
            trace.push(TraceStep {
                iteration: iterations,
                x: x.clone(),
                p_r0: Vec::new(),
                p_r1: Vec::new(),
            });
        }
        if delta < F::lit(opts.tol) {
            converged = true;
            break;
        }
    }
    finish(&models, w, slots, iterations, converged, trace)
}
