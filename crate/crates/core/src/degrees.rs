//! Degree distributions of the transmission graph.
//!
//! Under frameless ALOHA both node degree distributions are binomial: a user
//! transmits in each of `T` slots with probability `p`, and each of the `N`
//! users of a group lands in a given slot with the same probability. The
//! density-evolution code evaluates them through the closed forms on
//! [`Binomial`]; [`DegreePolynomial`] keeps the explicit coefficients.

use libm::lgamma as ln_gamma;

use crate::{Error, Real, Result};

/// Generating polynomial, `coeffs[k]` multiplying `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePolynomial<F> {
    coeffs: Vec<F>,
}

impl<F: Real> DegreePolynomial<F> {
    pub fn new(coeffs: Vec<F>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("degree polynomial needs a coefficient".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !(**c >= F::zero()) || !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("negative or non-finite coefficient {c}")));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn total_mass(&self) -> F {
        self.coeffs.iter().copied().sum()
    }

    /// Mean degree, the derivative at 1.
    pub fn mean(&self) -> F {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| F::lit(k as f64) * c)
            .sum()
    }

    /// Horner evaluation.
    pub fn eval(&self, x: F) -> F {
        self.coeffs.iter().rev().fold(F::zero(), |acc, &c| acc * x + c)
    }

    /// Edge-perspective distribution `d'(x) / d'(1)`.
    pub fn edge_perspective(&self) -> Result<Self> {
        let mean = self.mean();
        if !(mean > F::zero()) {
            return Err(Error::InvalidArgument(
                "edge perspective of a distribution with all mass at degree 0".into(),
            ));
        }
        let coeffs = if self.coeffs.len() == 1 {
            vec![F::zero()]
        } else {
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| F::lit(k as f64) * c / mean)
                .collect()
        };
        Ok(Self { coeffs })
    }

    /// Drops the upper tail once its mass falls below `tail`, renormalizing the rest.
    pub fn truncated(&self, tail: F) -> Self {
        let mut remaining = F::zero();
        let mut keep = self.coeffs.len();
        for k in (1..self.coeffs.len()).rev() {
            remaining = remaining + self.coeffs[k];
            if remaining >= tail {
                break;
            }
            keep = k;
        }
        let mut coeffs = self.coeffs[..keep].to_vec();
        let mass: F = coeffs.iter().copied().sum();
        let total = self.total_mass();
        if mass > F::zero() {
            for c in &mut coeffs {
                *c = *c * total / mass;
            }
        }
        Self { coeffs }
    }
}

/// Node-perspective distribution of a user's degree over `slots` slots.
pub fn variable_node_dist<F: Real>(slots: u64, p: F) -> Result<DegreePolynomial<F>> {
    Binomial::new(slots, p)?.to_polynomial()
}

/// Node-perspective distribution of how many of a group's `users` hit one slot.
pub fn observation_node_dist<F: Real>(users: u64, p: F) -> Result<DegreePolynomial<F>> {
    Binomial::new(users, p)?.to_polynomial()
}

pub fn edge_perspective<F: Real>(d: &DegreePolynomial<F>) -> Result<DegreePolynomial<F>> {
    d.edge_perspective()
}

/// Binomial(n, p) distribution with its generating-function closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binomial<F> {
    pub n: u64,
    pub p: F,
}

impl<F: Real> Binomial<F> {
    pub fn new(n: u64, p: F) -> Result<Self> {
        if !(p >= F::zero() && p <= F::one()) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { n, p })
    }

    /// `(1 - p + p x)^n`.
    #[inline]
    pub fn eval(&self, x: F) -> F {
        pow_one_minus(self.p * (F::one() - x), self.n)
    }

    /// Edge-perspective generating function `(1 - p + p x)^(n-1)`.
    #[inline]
    pub fn edge_eval(&self, x: F) -> F {
        pow_one_minus(self.p * (F::one() - x), self.n.saturating_sub(1))
    }

    /// Edge perspective of a binomial is the binomial one trial shorter.
    pub fn edge_perspective(&self) -> Result<Self> {
        if self.n == 0 || self.p == F::zero() {
            return Err(Error::InvalidArgument(
                "edge perspective of a distribution with all mass at degree 0".into(),
            ));
        }
        Ok(Self {
            n: self.n - 1,
            p: self.p,
        })
    }

    /// Probability mass at `k`, through log-gamma so large `n` cannot overflow.
    pub fn pmf(&self, k: u64) -> F {
        if k > self.n {
            return F::zero();
        }
        let p = self.p.as_f64();
        if p == 0.0 {
            return if k == 0 { F::one() } else { F::zero() };
        }
        if p == 1.0 {
            return if k == self.n { F::one() } else { F::zero() };
        }
        let (n, kf) = (self.n as f64, k as f64);
        let log_choose = ln_gamma(n + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(n - kf + 1.0);
        F::lit((log_choose + kf * p.ln() + (n - kf) * (-p).ln_1p()).exp())
    }

    pub fn to_polynomial(&self) -> Result<DegreePolynomial<F>> {
        DegreePolynomial::new((0..=self.n).map(|k| self.pmf(k)).collect())
    }
}

/// `(1 - a)^n` for `a` in [0, 1], exact at the endpoints.
#[inline]
pub(crate) fn pow_one_minus<F: Real>(a: F, n: u64) -> F {
    if n == 0 {
        return F::one();
    }
    if a >= F::one() {
        return F::zero();
    }
    (F::lit(n as f64) * (-a).ln_1p()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn small_binomials() {
        close(variable_node_dist(1, 0.5).unwrap().coeffs(), &[0.5, 0.5], 1e-15);
        close(variable_node_dist(2, 0.5).unwrap().coeffs(), &[0.25, 0.5, 0.25], 1e-15);
        close(observation_node_dist(2, 0.5).unwrap().coeffs(), &[0.25, 0.5, 0.25], 1e-15);
        close(observation_node_dist(0, 0.7).unwrap().coeffs(), &[1.0], 0.0);
        assert!(variable_node_dist(3, 1.5).is_err());
        assert!(variable_node_dist(3, -0.1).is_err());
    }

    #[test]
    fn zero_mass_of_long_frame() {
        // Exact product (1 - 0.00031)^200, accumulated factor by factor.
        let mut direct = 1.0f64;
        for _ in 0..200 {
            direct *= 1.0 - 0.00031;
        }
        let d = variable_node_dist(200, 3.10 / 10000.0).unwrap();
        assert!((d.coeffs()[0] - direct).abs() < 1e-13);
    }

    #[test]
    fn large_group_is_near_poisson() {
        let d = observation_node_dist(10000, 3.1e-4).unwrap();
        let poisson3 = (-3.1f64).exp() * 3.1f64.powi(3) / 6.0;
        assert!((d.coeffs()[3] - poisson3).abs() < 1e-4);
        assert!((d.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn edge_perspective_examples() {
        let half = variable_node_dist(2, 0.5).unwrap();
        close(half.edge_perspective().unwrap().coeffs(), &[0.5, 0.5], 1e-15);
        let ones = DegreePolynomial::new(vec![0.0, 1.0]).unwrap();
        close(ones.edge_perspective().unwrap().coeffs(), &[1.0], 0.0);
        // d/dx (0.7 + 0.3x)^5 / (5 * 0.3) = (0.7 + 0.3x)^4
        let b5 = variable_node_dist(5, 0.3).unwrap();
        let b4: Vec<f64> = [2401.0, 4116.0, 2646.0, 756.0, 81.0].iter().map(|c| c / 10000.0).collect();
        close(b5.edge_perspective().unwrap().coeffs(), &b4, 1e-14);
        assert!(DegreePolynomial::new(vec![1.0, 0.0]).unwrap().edge_perspective().is_err());
        assert!(Binomial::new(0, 0.3).unwrap().edge_perspective().is_err());
    }

    #[test]
    fn evaluation() {
        let d = DegreePolynomial::new(vec![0.25f64, 0.5, 0.25]).unwrap();
        assert_eq!(d.eval(0.0), 0.25);
        assert!((d.eval(1.0) - 1.0).abs() < 1e-15);
        let b = variable_node_dist(10, 0.2).unwrap();
        assert!((b.eval(0.5) - 0.9f64.powi(10)).abs() < 1e-14);
        assert!((Binomial::new(10, 0.2).unwrap().eval(0.5) - 0.9f64.powi(10)).abs() < 1e-14);
    }

    #[test]
    fn closed_form_endpoints() {
        let b = Binomial::new(7, 1.0f64).unwrap();
        assert_eq!(b.eval(0.0), 0.0);
        assert_eq!(b.eval(1.0), 1.0);
        assert_eq!(Binomial::new(0, 1.0f64).unwrap().eval(0.0), 1.0);
        assert_eq!(Binomial::new(1, 0.4f64).unwrap().edge_eval(0.0), 1.0);
    }

    #[test]
    fn truncation_keeps_bulk() {
        let d = observation_node_dist(10000, 3.1e-4f64).unwrap();
        let t = d.truncated(1e-12);
        assert!(t.degree() < 40);
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
        assert!((t.eval(0.3) - d.eval(0.3)).abs() < 1e-11);
    }

    #[test]
    fn works_in_single_precision() {
        let d: DegreePolynomial<f32> = variable_node_dist(10, 0.2f32).unwrap();
        assert!((d.eval(0.5) - 0.9f32.powi(10)).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn binomial_edge_is_shorter_binomial(n in 1u64..60, p in 0.01f64..0.99) {
            let edge = variable_node_dist(n, p).unwrap().edge_perspective().unwrap();
            let shorter = variable_node_dist(n - 1, p).unwrap();
            for (a, b) in edge.coeffs().iter().zip(shorter.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((edge.eval(1.0) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn eval_is_monotone(n in 0u64..40, p in 0.0f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let d = variable_node_dist(n, p).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(d.eval(lo) <= d.eval(hi) + 1e-15);
            let c = Binomial::new(n, p).unwrap();
            prop_assert!((c.eval(hi) - d.eval(hi)).abs() < 1e-12);
        }
    }
}
