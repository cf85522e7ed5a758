//! Moran model with `K` individuals, simulated on the frequency chain
//! `i = #a` and already sped up by `K`, so its clock runs in the time units
//! of the diffusion limit.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::distributions::{binom_sample, hyp_pmf, hyp_sample};
use crate::error::{Error, Result};
use crate::forward::ForwardSimulator;
use crate::measures::ModelParams;
use crate::stats::{replicate, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MoranState {
    pub k: usize,
    pub i: usize,
}

/// Population-wide event driven by one atom; the rate does not depend on `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoranJump {
    /// Every individual dies with probability `r` and is replaced by offspring
    /// of an `a` parent with probability `i/K`, otherwise of an `A` parent.
    LargeOffspring { r: f64 },
    /// Individuals of the favoured type reproduce with probability `|r|`;
    /// offspring replace a uniformly chosen group of the same size.
    Environment { r: f64 },
    /// Every individual mutates with probability `|r|` to `a` (`r > 0`) or `A`.
    CoordinatedMutation { r: f64 },
}

impl MoranJump {
    pub fn apply<R: Rng + ?Sized>(&self, k: usize, i: usize, rng: &mut R) -> usize {
        match *self {
            MoranJump::LargeOffspring { r } => {
                if rng.random::<f64>() * (k as f64) < i as f64 {
                    i + binom_sample(rng, k - i, r)
                } else {
                    i - binom_sample(rng, i, r)
                }
            }
            MoranJump::Environment { r } => {
                if r > 0.0 {
                    let born = binom_sample(rng, i, r);
                    i + hyp_sample(rng, k, k - i, born)
                } else {
                    let born = binom_sample(rng, k - i, -r);
                    i - hyp_sample(rng, k, i, born)
                }
            }
            MoranJump::CoordinatedMutation { r } => {
                if r > 0.0 {
                    i + binom_sample(rng, k - i, r)
                } else {
                    i - binom_sample(rng, i, -r)
                }
            }
        }
    }
}

/// Transition tables of the frequency chain.
#[derive(Debug, Clone)]
pub struct MoranChain {
    k: usize,
    up: Vec<f64>,
    down: Vec<f64>,
    jumps: Vec<(MoranJump, f64)>,
    jump_total: f64,
    absorbing: bool,
}

/// Rates of the `+1` / `-1` moves at `i` from single-offspring
/// reproduction, selection and individual mutation.
fn single_step_rates(model: &ModelParams<f64>, k: usize, i: usize) -> (f64, f64) {
    let kf = k as f64;
    let (fi, fa) = (i as f64, (k - i) as f64);
    let neutral = model.lambda0() * fi * fa / 2.0;
    let mut up = neutral + model.theta_lower() * fa;
    let mut down = neutral + model.theta_upper() * fi;
    let sel = model.selection();
    for l in 2..=sel.kappa() {
        let beta = sel.beta(l);
        if beta == 0.0 {
            continue;
        }
        // founder of type A, the other l-1 members hold j type a
        if i < k {
            let e: f64 = hyp_pmf::<f64>(k - 1, i, l - 1)
                .iter()
                .enumerate()
                .map(|(j, q)| q * sel.p(l, j))
                .sum();
            up += kf * beta * (fa / kf) * e;
        }
        if i > 0 {
            let e: f64 = hyp_pmf::<f64>(k - 1, i - 1, l - 1)
                .iter()
                .enumerate()
                .map(|(j, q)| q * (1.0 - sel.p(l, j + 1)))
                .sum();
            down += kf * beta * (fi / kf) * e;
        }
    }
    (up, down)
}

impl MoranChain {
    pub fn new(model: &ModelParams<f64>, k: usize) -> Result<Self> {
        if k < model.selection().kappa().max(2) {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: format!("population size {k} below interaction size {}", model.selection().kappa()),
            });
        }
        let (up, down) = (0..=k).map(|i| single_step_rates(model, k, i)).unzip();
        let mut jumps = Vec::new();
        for a in model.lambda_tail().atoms() {
            jumps.push((MoranJump::LargeOffspring { r: a.location }, a.weight / (a.location * a.location)));
        }
        for a in model.mu().atoms() {
            jumps.push((MoranJump::Environment { r: a.location }, a.weight / a.location.abs()));
        }
        for a in model.nu().atoms() {
            jumps.push((MoranJump::CoordinatedMutation { r: a.location }, a.weight / a.location.abs()));
        }
        let jump_total = jumps.iter().map(|j| j.1).sum();
        Ok(Self {
            k,
            up,
            down,
            jumps,
            jump_total,
            absorbing: !model.has_mutations(),
        })
    }

    pub fn population(&self) -> usize {
        self.k
    }

    /// `(+1 rate, -1 rate)` at `i`.
    pub fn single_step(&self, i: usize) -> (f64, f64) {
        (self.up[i], self.down[i])
    }

    pub fn jumps(&self) -> &[(MoranJump, f64)] {
        &self.jumps
    }

    pub fn total_rate(&self, i: usize) -> f64 {
        self.up[i] + self.down[i] + self.jump_total
    }

    pub fn is_absorbed(&self, i: usize) -> bool {
        self.absorbing && (i == 0 || i == self.k)
    }

    /// Next state of the embedded jump chain; `None` if no event can occur.
    pub fn jump<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Option<usize> {
        let total = self.total_rate(i);
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        if u < self.up[i] {
            return Some(i + 1);
        }
        u -= self.up[i];
        if u < self.down[i] {
            return Some(i - 1);
        }
        u -= self.down[i];
        let idx = self
            .jumps
            .iter()
            .position(|&(_, rate)| {
                let hit = u < rate;
                u -= rate;
                hit
            })
            .unwrap_or(self.jumps.len() - 1);
        Some(self.jumps[idx].0.apply(self.k, i, rng))
    }

    /// One event with its exponential waiting time; `None` if frozen.
    pub fn moran_step<R: Rng + ?Sized>(&self, state: &mut MoranState, rng: &mut R) -> Option<f64> {
        let total = self.total_rate(state.i);
        let next = self.jump(state.i, rng)?;
        state.i = next;
        let wait: f64 = Distribution::<f64>::sample(&Exp1, rng);
        Some(wait / total)
    }

    /// `i` at each of the ascending `times`.
    pub fn values_at<R: Rng + ?Sized>(&self, i0: usize, times: &[f64], rng: &mut R) -> Vec<usize> {
        let mut i = i0;
        let mut clock = 0.0;
        let mut out = Vec::with_capacity(times.len());
        let mut pending: Option<f64> = None;
        for &t in times {
            loop {
                if self.is_absorbed(i) {
                    break;
                }
                let total = self.total_rate(i);
                if total <= 0.0 {
                    break;
                }
                let wait = pending.take().unwrap_or_else(|| Distribution::<f64>::sample(&Exp1, rng) / total);
                if clock + wait > t {
                    pending = Some(wait);
                    break;
                }
                clock += wait;
                i = self.jump(i, rng).expect("positive total rate");
            }
            out.push(i);
        }
        out
    }

    /// Runs the embedded chain to `0` or `K`; `Some(true)` on fixation of `a`.
    /// `None` after `max_events` events or when the chain cannot move.
    pub fn fixation<R: Rng + ?Sized>(&self, i0: usize, max_events: u64, rng: &mut R) -> Option<bool> {
        let mut i = i0;
        for _ in 0..max_events {
            if i == 0 || i == self.k {
                return Some(i == self.k);
            }
            i = self.jump(i, rng)?;
        }
        (i == 0 || i == self.k).then_some(i == self.k)
    }
}

/// Fraction of `reps` chains from `i0` that fix at `K`.
pub fn moran_fixation(
    model: &ModelParams<f64>,
    k: usize,
    i0: usize,
    reps: usize,
    seed: u64,
) -> Result<Estimate> {
    if model.has_mutations() {
        return Err(Error::MutationsPresent("moran_fixation"));
    }
    let chain = MoranChain::new(model, k)?;
    let outcomes = replicate(seed, 0x4d4f_5241, reps, |rng| chain.fixation(i0, u64::MAX, rng));
    if outcomes.iter().any(Option::is_none) {
        return Err(Error::InvalidParameter {
            name: "model",
            reason: "Moran chain has no events; fixation is undefined".into(),
        });
    }
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count();
    Ok(Estimate::proportion(hits, reps))
}

/// Moment `E[X_t^k]` of the Moran frequency next to the diffusion estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentComparison {
    pub k: i32,
    pub moran: Estimate,
    pub sde: Estimate,
    pub z: f64,
}

/// Compares moments of `i/K` at time `t` with the forward diffusion from the same start.
#[allow(clippy::too_many_arguments)]
pub fn moran_vs_sde(
    model: &ModelParams<f64>,
    k: usize,
    i0: usize,
    t: f64,
    moments: &[i32],
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<MomentComparison>> {
    let chain = MoranChain::new(model, k)?;
    let x0 = i0 as f64 / k as f64;
    let moran = replicate(seed, 0x4d56_5331, reps, |rng| chain.values_at(i0, &[t], rng)[0] as f64 / k as f64);
    let fwd = ForwardSimulator::new(model);
    let sde = replicate(seed, 0x4d56_5332, reps, |rng| fwd.values_at(x0, dt, &[t], rng)[0]);
    Ok(moments
        .iter()
        .map(|&m| {
            let a = Estimate::from_samples(&moran.iter().map(|x| x.powi(m)).collect::<Vec<_>>());
            let b = Estimate::from_samples(&sde.iter().map(|x| x.powi(m)).collect::<Vec<_>>());
            MomentComparison {
                k: m,
                moran: a,
                sde: b,
                z: a.z_between(&b),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::SelectionKernel;
    use crate::stats::stream_rng;

    #[test]
    fn neutral_rates_by_hand() {
        let m = ModelParams::<f64>::kingman(1.0);
        let c = MoranChain::new(&m, 4).unwrap();
        assert_eq!(c.single_step(1), (1.5, 1.5));
        assert_eq!(c.single_step(2), (2.0, 2.0));
        assert_eq!(c.single_step(0), (0.0, 0.0));
        assert!(c.is_absorbed(0) && c.is_absorbed(4));
    }

    #[test]
    fn genic_pair_rates_by_hand() {
        // K = 3, i = 1, beta_2 = 1, p_1 = 1: an A founder (prob 2/3) meets the
        // single a with prob 1/2 and is always replaced; an a founder never is.
        let m = ModelParams::<f64>::builder()
            .selection(SelectionKernel::genic(1.0).unwrap())
            .build()
            .unwrap();
        let c = MoranChain::new(&m, 3).unwrap();
        let (up, down) = c.single_step(1);
        assert!((up - 3.0 * (2.0 / 3.0) * 0.5).abs() < 1e-15);
        assert_eq!(down, 0.0);
    }

    #[test]
    fn mutation_rates_and_absorption() {
        let m = ModelParams::<f64>::builder().lambda0(1.0).theta(0.0, 0.5).build().unwrap();
        let c = MoranChain::new(&m, 5).unwrap();
        assert_eq!(c.single_step(0), (0.0, 0.0));
        assert_eq!(c.single_step(5).1, 0.5 * 5.0);
        assert!(!c.is_absorbed(5));
    }

    #[test]
    fn jumps_stay_in_range() {
        let mut rng = stream_rng(1, 0, 0);
        for jump in [
            MoranJump::LargeOffspring { r: 0.7 },
            MoranJump::Environment { r: 0.6 },
            MoranJump::Environment { r: -0.6 },
            MoranJump::CoordinatedMutation { r: 0.5 },
            MoranJump::CoordinatedMutation { r: -0.5 },
        ] {
            for i in 0..=6 {
                for _ in 0..50 {
                    assert!(jump.apply(6, i, &mut rng) <= 6);
                }
            }
        }
    }

    #[test]
    fn drift_matches_selection_polynomial() {
        let kernel = SelectionKernel::new(3, vec![0.3, 0.2], vec![vec![0.0, 0.6, 1.0], vec![0.0, 0.2, 0.9, 1.0]]).unwrap();
        let m = ModelParams::<f64>::builder().selection(kernel).build().unwrap();
        let k = 2000;
        let c = MoranChain::new(&m, k).unwrap();
        for i in [200, 1000, 1700] {
            let (up, down) = c.single_step(i);
            let x = i as f64 / k as f64;
            let drift = (up - down) / k as f64;
            assert!((drift - m.selection().d_poly(x)).abs() < 1e-3);
        }
    }
}
