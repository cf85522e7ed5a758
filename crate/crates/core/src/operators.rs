//! Coefficient vectors in the Bernstein basis, the branching, mutation and
//! coalescence operators acting on them, and the duality function `H`.

use std::fmt;
use std::ops::Index;

use crate::distributions::{hp_pmf_closed, hyp_pmf, HpParams};
use crate::error::{Error, Result};
use crate::measures::Allele;
use crate::num::{binomial, Scalar};
use crate::selection::SelectionKernel;

/// Coefficients `v_0..v_n` of a polynomial of degree `n` in the Bernstein basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> CoefficientVector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: "coefficient vector needs at least one entry".into(),
            });
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: format!("entry {bad} is not finite"),
            });
        }
        Ok(Self { entries })
    }

    /// `e_n`: zeros except `v_n = 1`, so `H(x, e_n) = x^n`.
    pub fn unit(n: usize) -> Self {
        let mut entries = vec![T::zero(); n + 1];
        entries[n] = T::one();
        Self { entries }
    }

    /// The vector with a single one at position `i` of a degree-`n` vector.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut entries = vec![T::zero(); n + 1];
        entries[i] = T::one();
        Self { entries }
    }

    pub fn constant(n: usize, c: T) -> Self {
        Self {
            entries: vec![c; n + 1],
        }
    }

    pub fn scalar(c: T) -> Self {
        Self { entries: vec![c] }
    }

    /// Degree `n = dim - 1`, the number of lines of the dual.
    pub fn degree(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.entries.len() == 1
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn first(&self) -> T {
        self.entries[0]
    }

    pub fn last(&self) -> T {
        self.entries[self.entries.len() - 1]
    }

    pub fn sup_norm(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// `H(x, v)`.
    pub fn eval(&self, x: T) -> T {
        bernstein_eval(x, &self.entries)
    }

    pub fn cast<U: Scalar>(&self) -> CoefficientVector<U> {
        CoefficientVector {
            entries: self.entries.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }
}

impl<T> Index<usize> for CoefficientVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.entries[i]
    }
}

impl<T: fmt::Display> fmt::Display for CoefficientVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, x) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str(")")
    }
}

/// `H(x, w) = sum_i w_i C(n, i) x^i (1-x)^(n-i)` by de Casteljau.
pub fn bernstein_eval<T: Scalar>(x: T, w: &[T]) -> T {
    assert!(!w.is_empty(), "empty coefficient vector");
    let y = T::one() - x;
    let mut b = w.to_vec();
    for level in (1..b.len()).rev() {
        for i in 0..level {
            b[i] = y * b[i] + x * b[i + 1];
        }
    }
    b[0]
}

/// First derivative `d/dx H(x, w)`.
pub fn bernstein_derivative<T: Scalar>(x: T, w: &[T]) -> T {
    let n = w.len() - 1;
    if n == 0 {
        return T::zero();
    }
    let diff: Vec<T> = w.windows(2).map(|p| p[1] - p[0]).collect();
    T::count(n) * bernstein_eval(x, &diff)
}

/// Second derivative `d^2/dx^2 H(x, w)`.
pub fn bernstein_second_derivative<T: Scalar>(x: T, w: &[T]) -> T {
    let n = w.len() - 1;
    if n < 2 {
        return T::zero();
    }
    let diff: Vec<T> = w.windows(3).map(|p| p[2] - p[1] - (p[1] - p[0])).collect();
    T::count(n * (n - 1)) * bernstein_eval(x, &diff)
}

/// One transition type of the coefficient process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// `C^{n,k}`: `k` lines merge into one.
    Coalesce(usize),
    /// `D^{n,l}`: selective branching into `l` lines.
    Select(usize),
    /// `M_c^{n,l}`: `l` lines mutate to type `c` and are removed.
    Mutate(Allele, usize),
    /// `S_c^{n,l}`: `l` lines branch in an environment favouring `c`.
    Environment(Allele, usize),
}

impl EventKind {
    /// Number of lines after the event, starting from `n`.
    pub fn lines_after(&self, n: usize) -> usize {
        match *self {
            EventKind::Coalesce(k) => n + 1 - k,
            EventKind::Select(l) => n + l - 1,
            EventKind::Mutate(_, l) => n - l,
            EventKind::Environment(_, l) => n + l,
        }
    }

    /// Type of the label carried after the event, if the event sets one.
    pub fn label(&self) -> Option<Allele> {
        match *self {
            EventKind::Mutate(c, _) | EventKind::Environment(c, _) => Some(c),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            EventKind::Coalesce(k) => format!("coalesce({k})"),
            EventKind::Select(l) => format!("select({l})"),
            EventKind::Mutate(c, l) => format!("mut({c},{l})"),
            EventKind::Environment(c, l) => format!("env({c},{l})"),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn domain(op: &'static str, reason: String) -> Error {
    Error::OperatorDomain { op, reason }
}

/// `(C^{n,k} v)_i = i/(n-k+1) v_{i+k-1} + (1 - i/(n-k+1)) v_i`.
pub fn coalesce<T: Scalar>(v: &CoefficientVector<T>, k: usize) -> Result<CoefficientVector<T>> {
    let n = v.degree();
    if k < 2 || k > n {
        return Err(domain("coalesce", format!("k = {k} outside 2..={n}")));
    }
    let m = n - k + 1;
    let mm = T::count(m);
    let entries = (0..=m)
        .map(|i| {
            let w = T::count(i) / mm;
            w * v[i + k - 1] + (T::one() - w) * v[i]
        })
        .collect();
    Ok(CoefficientVector { entries })
}

/// `(D^{n,l} v)_i = E[p_K v_{i+1-K} + (1 - p_K) v_{i-K}]`, `K ~ Hyp(n+l-1, i, l)`.
pub fn select_branch<T: Scalar>(
    v: &CoefficientVector<T>,
    l: usize,
    kernel: &SelectionKernel<T>,
) -> Result<CoefficientVector<T>> {
    let n = v.degree();
    if n == 0 {
        return Err(domain("select_branch", "needs at least one line".into()));
    }
    if l < 2 || l > kernel.kappa() {
        return Err(domain("select_branch", format!("l = {l} outside 2..={}", kernel.kappa())));
    }
    let total = n + l - 1;
    let entries = (0..=total)
        .map(|i| {
            hyp_pmf::<T>(total, i, l)
                .into_iter()
                .enumerate()
                .filter(|(_, q)| *q > T::zero())
                .fold(T::zero(), |acc, (kk, q)| {
                    let p = kernel.p(l, kk);
                    let up = if p > T::zero() { p * v[i + 1 - kk] } else { T::zero() };
                    acc + q * (up + (T::one() - p) * v[i - kk])
                })
        })
        .collect();
    Ok(CoefficientVector { entries })
}

/// `M_a^{n,k} v = (v_{i+k})` and `M_A^{n,k} v = (v_i)`, `i = 0..=n-k`.
pub fn mutate<T: Scalar>(
    v: &CoefficientVector<T>,
    allele: Allele,
    k: usize,
) -> Result<CoefficientVector<T>> {
    let n = v.degree();
    if k < 1 || k > n {
        return Err(domain("mutate", format!("k = {k} outside 1..={n}")));
    }
    let entries = match allele {
        Allele::Lower => v.entries[k..].to_vec(),
        Allele::Upper => v.entries[..=n - k].to_vec(),
    };
    Ok(CoefficientVector { entries })
}

/// `(S_a^{n,l} v)_i = E[v_R]` with `R ~ HP(n+l, l, i)`; for `S_A`,
/// `R = n - HP(n+l, l, n+l-i)`.
pub fn environment<T: Scalar>(
    v: &CoefficientVector<T>,
    allele: Allele,
    l: usize,
) -> Result<CoefficientVector<T>> {
    let n = v.degree();
    if l < 1 || l > n {
        return Err(domain("environment", format!("l = {l} outside 1..={n}")));
    }
    let total = n + l;
    let entries = (0..=total)
        .map(|i| {
            let red = match allele {
                Allele::Lower => i,
                Allele::Upper => total - i,
            };
            let pmf = hp_pmf_closed::<T>(HpParams { total, pairs: l, red });
            pmf.into_iter().enumerate().fold(T::zero(), |acc, (r, q)| {
                let idx = match allele {
                    Allele::Lower => r,
                    Allele::Upper => n - r,
                };
                acc + q * v[idx]
            })
        })
        .collect();
    Ok(CoefficientVector { entries })
}

/// Applies the operator of `event` to `v`.
pub fn apply<T: Scalar>(
    event: EventKind,
    v: &CoefficientVector<T>,
    kernel: &SelectionKernel<T>,
) -> Result<CoefficientVector<T>> {
    match event {
        EventKind::Coalesce(k) => coalesce(v, k),
        EventKind::Select(l) => select_branch(v, l, kernel),
        EventKind::Mutate(c, k) => mutate(v, c, k),
        EventKind::Environment(c, l) => environment(v, c, l),
    }
}

/// Row-major matrix of the operator of `event` on degree-`n` vectors, built
/// column by column from basis vectors.
pub fn materialize<T: Scalar>(
    event: EventKind,
    n: usize,
    kernel: &SelectionKernel<T>,
) -> Result<Vec<Vec<T>>> {
    let columns = (0..=n)
        .map(|j| apply(event, &CoefficientVector::basis(n, j), kernel).map(|c| c.entries))
        .collect::<Result<Vec<_>>>()?;
    let rows = columns[0].len();
    Ok((0..rows)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect())
}

/// `(D^{n,l} e_n)_i = p_{i+1-n} C(l, n+l-1-i) / C(n+l-1, n+l-1-i)` for `i >= n`.
pub fn select_branch_unit_entry<T: Scalar>(
    kernel: &SelectionKernel<T>,
    n: usize,
    l: usize,
    i: usize,
) -> T {
    if i < n {
        return T::zero();
    }
    let top = n + l - 1 - i;
    kernel.p(l, i + 1 - n) * binomial::<T>(l, top) / binomial::<T>(n + l - 1, top)
}

/// `(S_a^{n,l} e_n)_i = 2^(n+l-i) C(l, n+l-i) / C(n+l, n+l-i)` for `i >= n`.
pub fn environment_unit_entry<T: Scalar>(n: usize, l: usize, i: usize) -> T {
    if i < n {
        return T::zero();
    }
    let top = n + l - i;
    T::of(2.0).powi(top as i32) * binomial::<T>(l, top) / binomial::<T>(n + l, top)
}
