//! Frequency-dependent selection `(kappa, beta, p)` and its drift polynomial.

use crate::error::{Error, Result};
use crate::num::{binomial, pow0, Scalar};

/// Selection mechanism with interactions of size up to `kappa`.
///
/// `beta[l - 2]` is the rate of `l`-interactions and `p[l - 2][i]` the
/// probability that the founder of an `l`-group containing `i` type-`a`
/// individuals is replaced by a type-`a` offspring.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionKernel<T> {
    kappa: usize,
    beta: Vec<T>,
    p: Vec<Vec<T>>,
    // beta_l * C(l, i) * (p_i - i/l), the Bernstein weights of the drift
    drift_weights: Vec<Vec<T>>,
}

/// Checks every kernel invariant and lists violations in readable form.
pub fn validate_kernel<T: Scalar>(kappa: usize, beta: &[T], p: &[Vec<T>]) -> Vec<String> {
    let mut out = Vec::new();
    if kappa < 2 {
        out.push(format!("kappa = {kappa}: kappa must be at least 2"));
        return out;
    }
    if beta.len() != kappa - 1 {
        out.push(format!(
            "beta has {} entries, expected {} (l = 2..={kappa})",
            beta.len(),
            kappa - 1
        ));
    }
    if p.len() != kappa - 1 {
        out.push(format!(
            "p has {} rows, expected {} (l = 2..={kappa})",
            p.len(),
            kappa - 1
        ));
    }
    for (idx, &b) in beta.iter().enumerate() {
        let l = idx + 2;
        if !b.is_finite() || b < T::zero() {
            out.push(format!("beta_{l} = {b}: beta nonnegative"));
        }
    }
    for (idx, row) in p.iter().enumerate() {
        let l = idx + 2;
        if row.len() != l + 1 {
            out.push(format!("p row for l = {l} has {} entries, expected {}", row.len(), l + 1));
            continue;
        }
        if row[0] != T::zero() {
            out.push(format!("p_0^({l}) = {}: p_0 must be 0", row[0]));
        }
        if row[l] != T::one() {
            out.push(format!("p_{l}^({l}) = {}: p_l must be 1", row[l]));
        }
        for (i, &q) in row.iter().enumerate() {
            if !(q >= T::zero() && q <= T::one()) {
                out.push(format!("p_{i}^({l}) = {q}: probabilities must lie in [0, 1]"));
            }
        }
    }
    out
}

impl<T: Scalar> SelectionKernel<T> {
    pub fn new(kappa: usize, beta: Vec<T>, p: Vec<Vec<T>>) -> Result<Self> {
        let violations = validate_kernel(kappa, &beta, &p);
        if !violations.is_empty() {
            return Err(Error::InvalidSelection(violations));
        }
        let drift_weights = beta
            .iter()
            .zip(&p)
            .enumerate()
            .map(|(idx, (&b, row))| {
                let l = idx + 2;
                (0..=l)
                    .map(|i| b * binomial::<T>(l, i) * (row[i] - T::count(i) / T::count(l)))
                    .collect()
            })
            .collect();
        Ok(Self {
            kappa,
            beta,
            p,
            drift_weights,
        })
    }

    /// No selection: `kappa = 2`, `beta_2 = 0`.
    pub fn neutral() -> Self {
        Self::new(
            2,
            vec![T::zero()],
            vec![vec![T::zero(), T::of(0.5), T::one()]],
        )
        .expect("neutral kernel is valid")
    }

    /// Genic selection of strength `s` in favour of type `a`: `d(x) = s x (1 - x)`.
    pub fn genic(s: T) -> Result<Self> {
        Self::new(2, vec![s], vec![vec![T::zero(), T::one(), T::one()]])
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// `beta_l` for `2 <= l <= kappa`.
    pub fn beta(&self, l: usize) -> T {
        self.beta[l - 2]
    }

    pub fn betas(&self) -> &[T] {
        &self.beta
    }

    /// `p_i^(l)`.
    pub fn p(&self, l: usize, i: usize) -> T {
        self.p[l - 2][i]
    }

    pub fn p_rows(&self) -> &[Vec<T>] {
        &self.p
    }

    /// `sum_l beta_l`.
    pub fn total_beta(&self) -> T {
        self.beta.iter().fold(T::zero(), |acc, &b| acc + b)
    }

    /// Mean number of extra lines per selective branching, `sum_l beta_l (l - 1)`.
    pub fn b_beta(&self) -> T {
        self.beta
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (idx, &b)| acc + b * T::count(idx + 1))
    }

    pub fn is_neutral(&self) -> bool {
        self.beta.iter().all(|&b| b == T::zero())
    }

    /// Always empty for a constructed kernel.
    pub fn validate(&self) -> Vec<String> {
        validate_kernel(self.kappa, &self.beta, &self.p)
    }

    /// Selection drift `d(x) = sum_l beta_l sum_i C(l,i) x^i (1-x)^(l-i) (p_i^(l) - i/l)`,
    /// evaluated in Bernstein form.
    pub fn d_poly(&self, x: T) -> T {
        let y = T::one() - x;
        let mut total = T::zero();
        for (idx, weights) in self.drift_weights.iter().enumerate() {
            let l = idx + 2;
            for (i, &w) in weights.iter().enumerate() {
                if w != T::zero() {
                    total += w * pow0(x, i) * pow0(y, l - i);
                }
            }
        }
        total
    }

    pub fn cast<U: Scalar>(&self) -> SelectionKernel<U> {
        let c = |v: T| U::of(v.as_f64());
        SelectionKernel::new(
            self.kappa,
            self.beta.iter().map(|&b| c(b)).collect(),
            self.p
                .iter()
                .map(|row| row.iter().map(|&q| c(q)).collect())
                .collect(),
        )
        .expect("cast of a valid kernel stays valid")
    }
}
