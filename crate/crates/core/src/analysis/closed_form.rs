//! Hand-derived collision-resolution sums for the full three-BS network.
//!
//! Only three targets need formulas: a single-BS group, a two-BS group and
//! the group reaching all three. The rest follow by relabelling base
//! stations. Groups are addressed by their BS bitmask so the result does not
//! depend on the order in which a topology lists them.

use crate::analysis::GroupProbs;
use crate::{BsSet, Error, NetworkTopology, Result, Weight};

/// Closed-form `w` for `target` of a full `M = 3` topology.
pub fn closed_form_w_m3<W: Weight>(
    topology: &NetworkTopology,
    probs: &[GroupProbs<W>],
    target: usize,
) -> Result<W> {
    if topology.num_bs() != 3 || topology.num_groups() != 7 {
        return Err(Error::InvalidArgument(
            "closed forms need the full three-BS topology".into(),
        ));
    }
    if probs.len() != 7 || target >= 7 {
        return Err(Error::InvalidArgument("expected 7 group probabilities".into()));
    }
    let target_set = topology.group(target).bs_set.mask();
    // perm[a] = actual BS index playing the role of reference BS a.
    let inside: Vec<usize> = (0..3).filter(|j| target_set & (1 << j) != 0).collect();
    let outside = (0..3).filter(|j| target_set & (1 << j) == 0);
    let perm: Vec<usize> = inside.iter().copied().chain(outside).collect();
    let at = |reference_mask: u32| -> GroupProbs<W> {
        let mask = (0..3)
            .filter(|a| reference_mask & (1 << a) != 0)
            .fold(0u32, |m, a| m | 1 << perm[a]);
        let k = topology
            .find_group(BsSet::from_mask(mask))
            .expect("full topology has every subset");
        probs[k]
    };
    // Reference labels: 1 = {1}, 2 = {2}, 3 = {3}, 4 = {1,2}, 5 = {2,3}, 6 = {1,3}, 7 = {1,2,3}.
    let g = [0b001, 0b010, 0b100, 0b011, 0b110, 0b101, 0b111].map(at);
    let r = |i: usize| g[i - 1].idle;
    let c = |i: usize| g[i - 1].single;
    let rb = |i: usize| W::one() - g[i - 1].idle;
    let coll = |i: usize| g[i - 1].collided();
    let one = W::one();

    let w = match inside.len() {
        1 => {
            let inner = r(4) * r(6) * r(7)
                + c(4) * r(2) * r(5) * r(6) * r(7)
                + c(4) * c(5) * r(2) * r(3) * r(6) * r(7)
                + c(6) * r(3) * r(4) * r(5) * r(7)
                + c(6) * c(5) * r(2) * r(3) * r(4) * r(7)
                + c(4) * c(6) * r(2) * r(3) * r(5) * r(7)
                + c(7)
                    * (r(4) * r(5) * r(6) * (one - rb(2) * rb(3))
                        + c(4) * r(2) * r(3) * r(5) * r(6)
                        + c(6) * r(2) * r(3) * r(4) * r(5));
            one - g[0].sole * inner
        }
        2 => {
            let inner = r(7)
                * (r(5) * r(6) * (one - rb(1) * rb(2))
                    + coll(5) * r(1) * r(6)
                    + coll(6) * r(2) * r(5)
                    + c(5) * r(6) * (r(1) + rb(1) * r(2) * r(3))
                    + c(6) * r(5) * (r(2) + rb(2) * r(1) * r(3)))
                + c(7) * r(3) * r(5) * r(6) * (one - rb(1) * rb(2));
            one - g[3].sole * inner
        }
        _ => {
            let inner = r(4) * r(5) * r(6) * (one - rb(1) * rb(2) * rb(3))
                + r(4) * r(5) * rb(6) * r(2)
                + r(4) * rb(5) * r(6) * r(1)
                + rb(4) * r(5) * r(6) * r(3);
            one - g[6].sole * inner
        }
    };
    Ok(w)
}
