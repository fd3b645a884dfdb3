//! Throughput bounds.
//!
//! The upper bound scales the asymptotic single-BS peak by the number of base
//! stations. The lower bound replaces the exact walk-graph sum by a
//! second-order union bound over the per-BS "clean singleton" events, which
//! makes the PLR it produces an upper bound on the cooperative PLR.

use crate::{Error, Real, Result};

/// Asymptotic peak throughput of single-BS frameless ALOHA.
pub const SINGLE_BS_PEAK: f64 = 0.87;

/// `M * S_1`.
pub fn upper_bound_throughput(num_bs: usize) -> Result<f64> {
    if num_bs == 0 {
        return Err(Error::InvalidArgument("upper bound needs at least one base station".into()));
    }
    Ok(num_bs as f64 * SINGLE_BS_PEAK)
}

/// Pivot magnitude below which `Q` counts as singular.
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Solves `a x = b` by Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve<F: Real>(a: &[Vec<F>], b: &[F]) -> Option<Vec<F>> {
    let n = b.len();
    let mut m: Vec<Vec<F>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(m[pivot][col].abs() > F::lit(SINGULAR_PIVOT)) {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != F::zero() {
                for k in col..=n {
                    let v = m[col][k];
                    m[row][k] = m[row][k] - f * v;
                }
            }
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).fold(m[row][n], |acc, k| acc - m[row][k] * x[k]);
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Outcome of the second-order union bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionBound<F> {
    pub value: F,
    /// `Q` was singular and the largest single event was used instead.
    pub singular: bool,
}

/// Lower bound on `Pr(A_1 or ... or A_n)` from marginals `p` and pairwise joints `q`
/// (`q[j][j] = p[j]`), as `p Q^-1 p^t`.
///
/// The result is kept inside `[max p_j, min(1, sum p_j)]`, the range any
/// union probability must lie in; a singular `Q` falls back to `max p_j`.
pub fn union_lower_bound<F: Real>(p: &[F], q: &[Vec<F>]) -> UnionBound<F> {
    let largest = p.iter().copied().fold(F::zero(), F::max);
    let envelope = p.iter().copied().sum::<F>().min(F::one());
    if p.is_empty() || largest == F::zero() {
        return UnionBound {
            value: F::zero(),
            singular: false,
        };
    }
    match solve(q, p) {
        Some(y) => {
            let v: F = p.iter().zip(&y).map(|(&a, &b)| a * b).sum();
            UnionBound {
                value: v.max(largest).min(envelope),
                singular: false,
            }
        }
        None => UnionBound {
            value: largest,
            singular: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_bound_values() {
        assert!((upper_bound_throughput(1).unwrap() - 0.87).abs() < 1e-15);
        let m4 = upper_bound_throughput(4).unwrap();
        assert!((m4 - 3.48).abs() < 1e-12);
        assert!(m4 >= 2.940);
        assert!(upper_bound_throughput(0).is_err());
    }

    #[test]
    fn single_event_is_exact() {
        let b = union_lower_bound(&[0.3_f64], &[vec![0.3]]);
        assert!((b.value - 0.3).abs() < 1e-15);
        assert!(!b.singular);
    }

    #[test]
    fn two_identical_events_match_hand_inverse() {
        // Q = [[a, c], [c, a]], inverse = [[a, -c], [-c, a]] / (a^2 - c^2),
        // p Q^-1 p^t = (a^3 - 2 a^2 c + a^3) / (a^2 - c^2) = 2a^2 / (a + c).
        for &(a, c) in &[(0.4_f64, 0.1), (0.25, 0.2), (0.9, 0.85)] {
            let det = a * a - c * c;
            let inv = [[a / det, -c / det], [-c / det, a / det]];
            let hand = a * (inv[0][0] * a + inv[0][1] * a) + a * (inv[1][0] * a + inv[1][1] * a);
            let b = union_lower_bound(&[a, a], &[vec![a, c], vec![c, a]]);
            assert!((b.value - hand).abs() < 1e-12, "{a} {c}: {} vs {hand}", b.value);
            assert!((hand - 2.0 * a * a / (a + c)).abs() < 1e-12);
            // Never above the true union of two events with this overlap.
            assert!(b.value <= 2.0 * a - c + 1e-12);
        }
    }

    #[test]
    fn singular_matrix_falls_back() {
        let b = union_lower_bound(&[0.5_f64, 0.5], &[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(b.singular);
        assert_eq!(b.value, 0.5);
    }

    #[test]
    fn solve_pivots() {
        let a = vec![vec![0.0_f64, 1.0], vec![2.0, 0.0]];
        let x = solve(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }
}
