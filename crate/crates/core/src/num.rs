//! Scalar abstraction and the binomial arithmetic shared by every rate and
//! operator in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type the deterministic parts of the crate are generic over.
///
/// Implemented for `f32` and `f64`. Simulation code works on `f64` through the
/// aliases at the crate root.
pub trait Scalar:
    'static
    + Send
    + Sync
    + Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
{
    /// Converts an `f64` constant.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Largest `n` for which binomial coefficients are computed in exact integer
/// arithmetic. Above it they go through `ln_gamma`.
pub const EXACT_BINOMIAL_MAX: usize = 60;

fn exact_binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if n <= EXACT_BINOMIAL_MAX {
        return (exact_binomial(n, k) as f64).ln();
    }
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    if n <= EXACT_BINOMIAL_MAX {
        T::from_u128(exact_binomial(n, k)).expect("binomial representable")
    } else {
        T::of(ln_binomial(n, k).exp())
    }
}

/// `C(n, k) p^k (1-p)^(n-k)` with the convention `0^0 = 1`.
pub fn binomial_term<T: Scalar>(n: usize, k: usize, p: T) -> T {
    if k > n {
        return T::zero();
    }
    if p <= T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    if p >= T::one() {
        return if k == n { T::one() } else { T::zero() };
    }
    if n <= EXACT_BINOMIAL_MAX {
        binomial::<T>(n, k) * p.powi(k as i32) * (T::one() - p).powi((n - k) as i32)
    } else {
        let ln = T::of(ln_binomial(n, k))
            + T::count(k) * p.ln()
            + T::count(n - k) * (-p).ln_1p();
        ln.exp()
    }
}

/// All terms `binomial_term(n, k, p)` for `k = 0..=n`.
pub fn binomial_terms<T: Scalar>(n: usize, p: T) -> Vec<T> {
    (0..=n).map(|k| binomial_term(n, k, p)).collect()
}

/// `x^k` with `0^0 = 1`, for the rate integrals.
#[inline]
pub(crate) fn pow0<T: Scalar>(x: T, k: usize) -> T {
    if k == 0 {
        T::one()
    } else {
        x.powi(k as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_lgamma_binomials_agree_at_the_switch() {
        for k in 0..=61 {
            let exact = exact_binomial(61, k) as f64;
            let approx: f64 = binomial(61, k);
            assert!((approx - exact).abs() <= 1e-11 * exact, "k={k}");
        }
        assert_eq!(binomial::<f64>(60, 30), 118264581564861424.0);
        assert_eq!(binomial::<f64>(3, 5), 0.0);
    }

    #[test]
    fn binomial_terms_sum_to_one() {
        for &n in &[0usize, 1, 5, 60, 61, 500] {
            for &p in &[0.0, 0.1, 0.5, 0.93, 1.0] {
                let s: f64 = binomial_terms(n, p).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} p={p} sum={s}");
            }
        }
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        assert_eq!(binomial_term(4, 0, 0.0_f64), 1.0);
        assert_eq!(binomial_term(4, 4, 1.0_f64), 1.0);
        assert_eq!(pow0(0.0_f64, 0), 1.0);
    }

    #[test]
    fn f32_instantiation() {
        let t: f32 = binomial_term(3, 1, 1.0 / 3.0);
        assert!((t - 4.0 / 9.0).abs() < 1e-6);
    }
}
