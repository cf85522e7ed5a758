//! Binomial, hypergeometric and hypergeometric-pairing laws.
//!
//! The pairing law `HP(total, pairs, red)` counts the groups that contain a
//! red ball after `pairs` disjoint pairs are formed uniformly among `total`
//! balls, `red` of which are red; the remaining balls stay singletons.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};

use crate::error::{Error, Result};
use crate::num::{binomial, binomial_term, ln_binomial, Scalar, EXACT_BINOMIAL_MAX};
use std::f64::consts::LN_2;

/// Largest number of balls for which [`hp_pmf`] enumerates.
pub const HP_ENUMERATION_LIMIT: usize = 20;

/// Parameters of `HP(total, pairs, red)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HpParams {
    pub total: usize,
    pub pairs: usize,
    pub red: usize,
}

impl HpParams {
    /// `pairs = 0` is allowed: every ball is a singleton and `R = red`.
    pub fn new(total: usize, pairs: usize, red: usize) -> Result<Self> {
        if 2 * pairs > total || red > total {
            return Err(Error::InvalidParameter {
                name: "hp",
                reason: format!("HP({total}, {pairs}, {red}) needs 2*pairs <= total and red <= total"),
            });
        }
        Ok(Self { total, pairs, red })
    }

    pub fn singletons(&self) -> usize {
        self.total - 2 * self.pairs
    }

    /// Number of groups, the largest value `R` can take.
    pub fn groups(&self) -> usize {
        self.total - self.pairs
    }
}

/// `Bin(n, x)` pmf on `0..=n`.
pub fn binom_pmf<T: Scalar>(n: usize, x: T) -> Vec<T> {
    crate::num::binomial_terms(n, x)
}

pub fn binom_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, x: f64) -> usize {
    if n == 0 || x <= 0.0 {
        return 0;
    }
    if x >= 1.0 {
        return n;
    }
    Binomial::new(n as u64, x).expect("valid binomial").sample(rng) as usize
}

/// `Hyp(n, k, j)`: red balls among `j` drawn without replacement from `n`
/// balls of which `k` are red. The pmf is indexed `0..=min(k, j)`.
///
/// # Panics
/// If `k > n` or `j > n`.
pub fn hyp_pmf<T: Scalar>(n: usize, k: usize, j: usize) -> Vec<T> {
    assert!(k <= n && j <= n, "Hyp({n}, {k}, {j}) out of range");
    let denom = binomial::<T>(n, j);
    (0..=k.min(j))
        .map(|m| {
            if m + n < j + k {
                T::zero()
            } else {
                if n > EXACT_BINOMIAL_MAX {
                    T::of((ln_binomial(k, m) + ln_binomial(n - k, j - m) - ln_binomial(n, j)).exp())
                } else {
                    binomial::<T>(k, m) * binomial::<T>(n - k, j - m) / denom
                }
            }
        })
        .collect()
}

pub fn hyp_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, j: usize) -> usize {
    assert!(k <= n && j <= n, "Hyp({n}, {k}, {j}) out of range");
    if k == 0 || j == 0 {
        return 0;
    }
    if k == n {
        return j;
    }
    if j == n {
        return k;
    }
    Hypergeometric::new(n as u64, k as u64, j as u64)
        .expect("valid hypergeometric")
        .sample(rng) as usize
}

/// Exact `HP` pmf by enumeration, indexed `0..=groups`.
///
/// Red sets are enumerated against one fixed pairing; by exchangeability this
/// has the same law as a fixed red set under a uniform pairing.
pub fn hp_pmf(params: HpParams) -> Result<Vec<f64>> {
    if params.total > HP_ENUMERATION_LIMIT {
        return Err(Error::TooLargeForExactPmf {
            total: params.total,
            limit: HP_ENUMERATION_LIMIT,
        });
    }
    let HpParams { total, pairs, red } = params;
    let mut counts = vec![0u64; params.groups() + 1];
    let pair_mask: u32 = (0..pairs).fold(0, |m, j| m | (1 << (2 * j)));
    let single_mask: u32 = ((1u64 << total) - 1) as u32 & !((1u64 << (2 * pairs)) - 1) as u32;
    for set in 0u32..(1u32 << total) {
        if set.count_ones() as usize != red {
            continue;
        }
        let pair_hits = ((set | (set >> 1)) & pair_mask).count_ones();
        let single_hits = (set & single_mask).count_ones();
        counts[(pair_hits + single_hits) as usize] += 1;
    }
    let all: u64 = counts.iter().sum();
    Ok(counts.into_iter().map(|c| c as f64 / all as f64).collect())
}

/// Exact `HP` pmf from a counting formula, valid for any size.
///
/// With `a` pairs holding two red balls, `b` pairs holding one and `c` red
/// singletons, the number of red placements is
/// `C(pairs, a) C(pairs - a, b) 2^b C(singletons, c)` and `R = a + b + c`.
pub fn hp_pmf_closed<T: Scalar>(params: HpParams) -> Vec<T> {
    let HpParams { pairs, red, .. } = params;
    let singles = params.singletons();
    let mut pmf = vec![T::zero(); params.groups() + 1];
    // products of binomials overflow long before the pmf does
    let large = params.total > EXACT_BINOMIAL_MAX;
    let denom = binomial::<T>(params.total, red);
    let ln_denom = ln_binomial(params.total, red);
    let two = T::of(2.0);
    for a in 0..=pairs.min(red / 2) {
        for b in 0..=(pairs - a).min(red - 2 * a) {
            let c = red - 2 * a - b;
            if c > singles {
                continue;
            }
            pmf[a + b + c] += if large {
                let ln = ln_binomial(pairs, a) + ln_binomial(pairs - a, b) + b as f64 * LN_2
                    + ln_binomial(singles, c)
                    - ln_denom;
                T::of(ln.exp())
            } else {
                binomial::<T>(pairs, a) * binomial::<T>(pairs - a, b) * two.powi(b as i32) * binomial::<T>(singles, c)
                    / denom
            };
        }
    }
    pmf
}

/// Shuffle, pair the first `2 * pairs` positions consecutively, count red groups.
pub fn hp_sample<R: Rng + ?Sized>(rng: &mut R, params: HpParams) -> usize {
    let mut balls: Vec<bool> = (0..params.total).map(|b| b < params.red).collect();
    balls.shuffle(rng);
    let (paired, single) = balls.split_at(2 * params.pairs);
    paired.chunks_exact(2).filter(|p| p[0] || p[1]).count() + single.iter().filter(|&&b| b).count()
}

/// `R^A_{n,l,i} = n - HP(n + l, l, n + l - i)`.
pub fn ra_sample<R: Rng + ?Sized>(rng: &mut R, n: usize, l: usize, i: usize) -> usize {
    let params = HpParams::new(n + l, l, n + l - i).expect("valid R^A parameters");
    n - hp_sample(rng, params)
}

/// Exact pmfs of the two composite laws behind the environment and
/// coordinated-mutation parts of the duality.
pub mod identities {
    use super::*;

    /// Law of `R^a_{n, J, I(n + J)}` with `J ~ Bin(n, r)`, `I(m) ~ Bin(m, x)`,
    /// all pmfs enumerated.
    pub fn branching_mixture(n: usize, r: f64, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n + 1];
        for (j, pj) in binom_pmf(n, r).into_iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for (i, pi) in binom_pmf(n + j, x).into_iter().enumerate() {
                if pi == 0.0 {
                    continue;
                }
                let hp = hp_pmf(HpParams::new(n + j, j, i)?)?;
                for (k, q) in hp.into_iter().enumerate() {
                    out[k] += pj * pi * q;
                }
            }
        }
        Ok(out)
    }

    /// Law of `I(n - J) + J` with `J ~ Bin(n, r)`, `I(m) ~ Bin(m, x)`.
    pub fn mutation_mixture(n: usize, r: f64, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for j in 0..=n {
            let pj = binomial_term(n, j, r);
            for (i, pi) in binom_pmf(n - j, x).into_iter().enumerate() {
                out[i + j] += pj * pi;
            }
        }
        out
    }

    pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
        let len = p.len().max(q.len());
        0.5 * (0..len)
            .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Brute force over every perfect matching of the first `2 * pairs` slots
    // chosen among all balls, independent of the enumeration above.
    fn hp_by_pairings(total: usize, pairs: usize, red: usize) -> Vec<f64> {
        fn rec(free: &mut Vec<usize>, left: usize, red: usize, acc: usize, out: &mut Vec<u64>) {
            if left == 0 {
                let singles = free.iter().filter(|&&b| b < red).count();
                out[acc + singles] += 1;
                return;
            }
            // choose the pair containing the smallest free ball, or leave it single
            let first = free.remove(0);
            let remaining_slots = free.len() + 1;
            if remaining_slots > 2 * left {
                rec(free, left, red, acc + usize::from(first < red), out);
            }
            for idx in 0..free.len() {
                let partner = free.remove(idx);
                let hit = usize::from(first < red || partner < red);
                rec(free, left - 1, red, acc + hit, out);
                free.insert(idx, partner);
            }
            free.insert(0, first);
        }
        let mut out = vec![0u64; total - pairs + 1];
        let mut free: Vec<usize> = (0..total).collect();
        rec(&mut free, pairs, red, 0, &mut out);
        let all: u64 = out.iter().sum();
        out.into_iter().map(|c| c as f64 / all as f64).collect()
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binom_pmf(0, 0.3), vec![1.0]);
        assert_eq!(binom_pmf(2, 0.5), vec![0.25, 0.5, 0.25]);
        assert!((binom_pmf::<f64>(3, 1.0 / 3.0)[1] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn hypergeometric_examples() {
        assert!((hyp_pmf::<f64>(4, 2, 2)[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hyp_pmf::<f64>(5, 0, 3), vec![1.0]);
        assert_eq!(hyp_pmf::<f64>(3, 3, 2), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn pairing_examples() {
        let p = |t, l, i| hp_pmf(HpParams::new(t, l, i).unwrap()).unwrap();
        assert_eq!(p(2, 1, 2), vec![0.0, 1.0]);
        assert_eq!(p(3, 1, 1), vec![0.0, 1.0, 0.0]);
        let q = p(4, 1, 2);
        assert!((q[1] - 1.0 / 6.0).abs() < 1e-15 && (q[2] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_closed_form_and_pairings_agree() {
        for total in 0..=8 {
            for pairs in 0..=total / 2 {
                for red in 0..=total {
                    let params = HpParams::new(total, pairs, red).unwrap();
                    let enumerated = hp_pmf(params).unwrap();
                    let closed: Vec<f64> = hp_pmf_closed(params);
                    let brute = hp_by_pairings(total, pairs, red);
                    for k in 0..enumerated.len() {
                        assert!((enumerated[k] - closed[k]).abs() < 1e-14, "{params:?}");
                        assert!((enumerated[k] - brute[k]).abs() < 1e-14, "{params:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_is_capped() {
        let big = HpParams::new(HP_ENUMERATION_LIMIT + 1, 3, 4).unwrap();
        assert!(matches!(hp_pmf(big), Err(Error::TooLargeForExactPmf { .. })));
        let s: f64 = hp_pmf_closed::<f64>(HpParams::new(200, 40, 90).unwrap()).iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ra_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(ra_sample(&mut rng, 1, 1, 2), 1);
            assert_eq!(ra_sample(&mut rng, 1, 1, 0), 0);
            assert_eq!(ra_sample(&mut rng, 2, 1, 3), 2);
        }
    }

    #[test]
    fn identities_on_the_grid() {
        for n in 0..=8 {
            for &r in &[0.0, 0.25, 0.5, 1.0] {
                for &x in &[0.0, 0.3, 0.7, 1.0] {
                    let lhs = identities::branching_mixture(n, r, x).unwrap();
                    let rhs = binom_pmf(n, x + r * x * (1.0 - x));
                    assert!(identities::total_variation(&lhs, &rhs) <= 1e-12);
                    let lhs = identities::mutation_mixture(n, r, x);
                    let rhs = binom_pmf(n, x + r * (1.0 - x));
                    assert!(identities::total_variation(&lhs, &rhs) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_pmfs_stay_finite() {
        let hp: Vec<f64> = hp_pmf_closed(HpParams::new(1700, 650, 900).unwrap());
        assert!(hp.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((hp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let hyp: Vec<f64> = hyp_pmf(3000, 1200, 1500);
        assert!((hyp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

}
