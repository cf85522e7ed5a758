//! Atomic measures `Lambda`, `mu`, `nu`, the full parameter set, and every
//! rate integral of the line-counting process as an exact finite sum.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{binomial, binomial_term, pow0, Scalar};
use crate::selection::SelectionKernel;

/// Weights below this after merging are rejected.
pub const MIN_WEIGHT: f64 = 1e-15;

/// The two types, `a` and `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Allele {
    /// type `a`
    #[serde(rename = "a")]
    Lower,
    /// type `A`
    #[serde(rename = "A")]
    Upper,
}

impl Allele {
    pub const BOTH: [Allele; 2] = [Allele::Lower, Allele::Upper];
}

impl fmt::Display for Allele {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allele::Lower => "a",
            Allele::Upper => "A",
        })
    }
}

/// Where the atoms of a measure may sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `(0, 1]`, the non-Kingman part of `Lambda`.
    UnitInterval,
    /// `(-1, 1) \ {0}`, for `mu` and `nu`.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub location: T,
    pub weight: T,
}

/// Finite measure made of weighted point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> AtomicMeasure<T> {
    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    /// Validates `(location, weight)` pairs against `support` and merges
    /// duplicate locations.
    pub fn new(
        name: &'static str,
        support: Support,
        atoms: impl IntoIterator<Item = (T, T)>,
    ) -> Result<Self> {
        let bad = |reason: String| Error::InvalidMeasure {
            measure: name,
            reason,
        };
        let mut merged: Vec<Atom<T>> = Vec::new();
        for (idx, (location, weight)) in atoms.into_iter().enumerate() {
            if !location.is_finite() || !weight.is_finite() {
                return Err(bad(format!("atom {idx} is not finite")));
            }
            if weight <= T::zero() {
                return Err(bad(format!("atom {idx} has non-positive weight {weight}")));
            }
            let inside = match support {
                Support::UnitInterval => location > T::zero() && location <= T::one(),
                Support::Signed => {
                    location > -T::one() && location < T::one() && location != T::zero()
                }
            };
            if !inside {
                let range = match support {
                    Support::UnitInterval => "(0, 1]",
                    Support::Signed => "(-1, 1) without 0",
                };
                return Err(bad(format!("atom {idx} at {location} lies outside {range}")));
            }
            match merged.iter_mut().find(|a| a.location == location) {
                Some(a) => a.weight += weight,
                None => merged.push(Atom { location, weight }),
            }
        }
        if let Some(a) = merged.iter().find(|a| a.weight.as_f64() < MIN_WEIGHT) {
            return Err(bad(format!(
                "atom at {} has weight {} below {MIN_WEIGHT:e}",
                a.location, a.weight
            )));
        }
        merged.sort_by(|a, b| a.location.partial_cmp(&b.location).expect("finite"));
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> T {
        self.atoms.iter().fold(T::zero(), |acc, a| acc + a.weight)
    }

    /// Atoms favouring `allele`: positive locations for `a`, negative for `A`.
    /// Yields `(|r|, weight)`.
    pub fn signed_part(&self, allele: Allele) -> impl Iterator<Item = (T, T)> + '_ {
        self.atoms.iter().filter_map(move |a| {
            let keep = match allele {
                Allele::Lower => a.location > T::zero(),
                Allele::Upper => a.location < T::zero(),
            };
            keep.then(|| (a.location.abs(), a.weight))
        })
    }

    pub fn cast<U: Scalar>(&self) -> AtomicMeasure<U> {
        AtomicMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: U::of(a.location.as_f64()),
                    weight: U::of(a.weight.as_f64()),
                })
                .collect(),
        }
    }
}

/// Outcome of the recurrence condition `b + mu(-1,1) < c + nu(-1,1) + theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub b: f64,
    pub c: f64,
    pub mu_mass: f64,
    pub nu_mass: f64,
    pub theta: f64,
    pub verdict: bool,
}

impl AssumptionReport {
    pub fn c_is_infinite(&self) -> bool {
        self.c.is_infinite()
    }

    pub fn into_error(self) -> Error {
        Error::AssumptionViolated {
            b: self.b,
            mu: self.mu_mass,
            c: self.c,
            nu: self.nu_mass,
            theta: self.theta,
        }
    }
}

/// Complete parameter set of the forward process and its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    lambda0: T,
    lambda_tail: AtomicMeasure<T>,
    mu: AtomicMeasure<T>,
    nu: AtomicMeasure<T>,
    theta_lower: T,
    theta_upper: T,
    selection: SelectionKernel<T>,
}

/// Incremental construction of [`ModelParams`]; validation happens in `build`.
#[derive(Debug, Clone)]
pub struct ModelBuilder<T> {
    lambda0: T,
    lambda_atoms: Vec<(T, T)>,
    mu_atoms: Vec<(T, T)>,
    nu_atoms: Vec<(T, T)>,
    theta_lower: T,
    theta_upper: T,
    selection: SelectionKernel<T>,
}

impl<T: Scalar> ModelBuilder<T> {
    pub fn lambda0(mut self, w: T) -> Self {
        self.lambda0 = w;
        self
    }

    pub fn lambda_atom(mut self, r: T, w: T) -> Self {
        self.lambda_atoms.push((r, w));
        self
    }

    pub fn mu_atom(mut self, r: T, w: T) -> Self {
        self.mu_atoms.push((r, w));
        self
    }

    pub fn nu_atom(mut self, r: T, w: T) -> Self {
        self.nu_atoms.push((r, w));
        self
    }

    pub fn theta(mut self, lower: T, upper: T) -> Self {
        self.theta_lower = lower;
        self.theta_upper = upper;
        self
    }

    pub fn selection(mut self, kernel: SelectionKernel<T>) -> Self {
        self.selection = kernel;
        self
    }

    pub fn build(self) -> Result<ModelParams<T>> {
        let nonneg = |name: &'static str, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(v)
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be finite and nonnegative"),
                })
            }
        };
        Ok(ModelParams {
            lambda0: nonneg("lambda0", self.lambda0)?,
            lambda_tail: AtomicMeasure::new("lambda", Support::UnitInterval, self.lambda_atoms)?,
            mu: AtomicMeasure::new("mu", Support::Signed, self.mu_atoms)?,
            nu: AtomicMeasure::new("nu", Support::Signed, self.nu_atoms)?,
            theta_lower: nonneg("theta_a", self.theta_lower)?,
            theta_upper: nonneg("theta_A", self.theta_upper)?,
            selection: self.selection,
        })
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Starts from the all-zero model (no reproduction, no selection).
    pub fn builder() -> ModelBuilder<T> {
        ModelBuilder {
            lambda0: T::zero(),
            lambda_atoms: Vec::new(),
            mu_atoms: Vec::new(),
            nu_atoms: Vec::new(),
            theta_lower: T::zero(),
            theta_upper: T::zero(),
            selection: SelectionKernel::neutral(),
        }
    }

    /// Kingman reproduction only, `Lambda = lambda0 * delta_0`.
    pub fn kingman(lambda0: T) -> Self {
        Self::builder().lambda0(lambda0).build().expect("valid")
    }

    pub fn lambda0(&self) -> T {
        self.lambda0
    }
    pub fn lambda_tail(&self) -> &AtomicMeasure<T> {
        &self.lambda_tail
    }
    pub fn mu(&self) -> &AtomicMeasure<T> {
        &self.mu
    }
    pub fn nu(&self) -> &AtomicMeasure<T> {
        &self.nu
    }
    pub fn theta_lower(&self) -> T {
        self.theta_lower
    }
    pub fn theta_upper(&self) -> T {
        self.theta_upper
    }
    pub fn theta(&self) -> T {
        self.theta_lower + self.theta_upper
    }
    pub fn theta_of(&self, allele: Allele) -> T {
        match allele {
            Allele::Lower => self.theta_lower,
            Allele::Upper => self.theta_upper,
        }
    }
    pub fn selection(&self) -> &SelectionKernel<T> {
        &self.selection
    }

    /// Individual or coordinated mutations present.
    pub fn has_mutations(&self) -> bool {
        self.theta() > T::zero() || !self.nu.is_zero()
    }

    /// `Lambda([0, 1])`.
    pub fn lambda_mass(&self) -> T {
        self.lambda0 + self.lambda_tail.mass()
    }

    /// `lambda_{n,l} = Lambda({0}) 1{l=2} + sum w r^(l-2) (1-r)^(n-l)`.
    ///
    /// # Panics
    /// Unless `2 <= l <= n`.
    pub fn lambda_rate(&self, n: usize, l: usize) -> T {
        assert!(n >= 2 && (2..=n).contains(&l), "lambda_rate({n}, {l}) out of range");
        let kingman = if l == 2 { self.lambda0 } else { T::zero() };
        self.lambda_tail.atoms.iter().fold(kingman, |acc, a| {
            acc + a.weight * pow0(a.location, l - 2) * pow0(T::one() - a.location, n - l)
        })
    }

    fn signed_rate(measure: &AtomicMeasure<T>, n: usize, l: usize, allele: Allele) -> T {
        assert!((1..=n).contains(&l), "rate({n}, {l}) out of range");
        measure
            .signed_part(allele)
            .fold(T::zero(), |acc, (r, w)| {
                acc + w * pow0(r, l - 1) * pow0(T::one() - r, n - l)
            })
    }

    /// Coordinated mutation rate `m^c_{n,l}` of one fixed group of `l` lines.
    ///
    /// # Panics
    /// Unless `1 <= l <= n`.
    pub fn mut_rate(&self, n: usize, l: usize, allele: Allele) -> T {
        Self::signed_rate(&self.nu, n, l, allele)
    }

    /// Environmental branching rate `sigma^c_{n,l}` of one fixed group of `l` lines.
    ///
    /// # Panics
    /// Unless `1 <= l <= n`.
    pub fn env_rate(&self, n: usize, l: usize, allele: Allele) -> T {
        Self::signed_rate(&self.mu, n, l, allele)
    }

    /// Rate of the `n -> n - k + 1` coalescence, `C(n,k) lambda_{n,k}`.
    /// Stable for large `n`.
    pub fn coalescence_event_rate(&self, n: usize, k: usize) -> T {
        if n < 2 || k < 2 || k > n {
            return T::zero();
        }
        let kingman = if k == 2 {
            self.lambda0 * binomial::<T>(n, 2)
        } else {
            T::zero()
        };
        self.lambda_tail.atoms.iter().fold(kingman, |acc, a| {
            let r = a.location;
            acc + a.weight / (r * r) * binomial_term(n, k, r)
        })
    }

    fn signed_event_rate(measure: &AtomicMeasure<T>, n: usize, l: usize, allele: Allele) -> T {
        if l == 0 || l > n {
            return T::zero();
        }
        measure
            .signed_part(allele)
            .fold(T::zero(), |acc, (r, w)| acc + w / r * binomial_term(n, l, r))
    }

    /// `C(n,l) sigma^c_{n,l}`.
    pub fn env_event_rate(&self, n: usize, l: usize, allele: Allele) -> T {
        Self::signed_event_rate(&self.mu, n, l, allele)
    }

    /// `C(n,l) m^c_{n,l} + 1{l=1} n theta_c`.
    pub fn mut_event_rate(&self, n: usize, l: usize, allele: Allele) -> T {
        let individual = if l == 1 && n >= 1 {
            T::count(n) * self.theta_of(allele)
        } else {
            T::zero()
        };
        individual + Self::signed_event_rate(&self.nu, n, l, allele)
    }

    /// Total coalescence rate from `n` lines,
    /// `C(n,2) Lambda({0}) + sum w (1 - (1-r)^n - n r (1-r)^(n-1)) / r^2`.
    pub fn total_coalescence_rate(&self, n: usize) -> T {
        if n < 2 {
            return T::zero();
        }
        let nn = T::count(n);
        self.lambda_tail
            .atoms
            .iter()
            .fold(self.lambda0 * binomial::<T>(n, 2), |acc, a| {
                let r = a.location;
                let q = T::one() - r;
                let tail = T::one() - pow0(q, n) - nn * r * pow0(q, n - 1);
                acc + a.weight * tail / (r * r)
            })
    }

    fn total_signed_rate(measure: &AtomicMeasure<T>, n: usize) -> T {
        measure.atoms.iter().fold(T::zero(), |acc, a| {
            let r = a.location.abs();
            acc + a.weight * (T::one() - pow0(T::one() - r, n)) / r
        })
    }

    /// Total rate out of a dual state with `n` lines, from closed forms of the
    /// event sums.
    pub fn total_dual_rate(&self, n: usize) -> T {
        if n == 0 {
            return T::zero();
        }
        let nn = T::count(n);
        self.total_coalescence_rate(n)
            + Self::total_signed_rate(&self.mu, n)
            + Self::total_signed_rate(&self.nu, n)
            + nn * (self.theta() + self.selection.total_beta())
    }

    /// Constant `C` with `total_dual_rate(n) <= C n^2`.
    ///
    /// Uses the whole mass of `Lambda`: an atom at `1` contributes a constant
    /// rate that the bound must also absorb.
    pub fn rate_bound_constant(&self) -> T {
        self.lambda_mass()
            + self.mu.mass()
            + self.nu.mass()
            + self.theta()
            + self.selection.total_beta()
    }

    /// `c(Lambda) = int |log(1-r)| Lambda(dr) / r^2`; atoms at `0` and `1` give `+inf`.
    pub fn c_lambda(&self) -> T {
        if self.lambda0 > T::zero() {
            return T::infinity();
        }
        self.lambda_tail.atoms.iter().fold(T::zero(), |acc, a| {
            let r = a.location;
            if r >= T::one() {
                T::infinity()
            } else {
                acc + a.weight * (-(-r).ln_1p()) / (r * r)
            }
        })
    }

    pub fn b_beta(&self) -> T {
        self.selection.b_beta()
    }

    pub fn check_assumption(&self) -> AssumptionReport {
        let b = self.b_beta().as_f64();
        let c = self.c_lambda().as_f64();
        let mu_mass = self.mu.mass().as_f64();
        let nu_mass = self.nu.mass().as_f64();
        let theta = self.theta().as_f64();
        let verdict = c.is_infinite() || b + mu_mass < c + nu_mass + theta;
        AssumptionReport {
            b,
            c,
            mu_mass,
            nu_mass,
            theta,
            verdict,
        }
    }

    /// Fails with [`Error::AssumptionViolated`] when the recurrence condition does not hold.
    pub fn require_assumption(&self) -> Result<()> {
        let report = self.check_assumption();
        if report.verdict {
            Ok(())
        } else {
            Err(report.into_error())
        }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            lambda0: U::of(self.lambda0.as_f64()),
            lambda_tail: self.lambda_tail.cast(),
            mu: self.mu.cast(),
            nu: self.nu.cast(),
            theta_lower: U::of(self.theta_lower.as_f64()),
            theta_upper: U::of(self.theta_upper.as_f64()),
            selection: self.selection.cast(),
        }
    }
}
