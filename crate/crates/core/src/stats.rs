//! Monte Carlo plumbing: per-replica RNG streams, replicated runs and
//! mean/standard-error summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Generator used by every simulation.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, purpose, replica)`.
///
/// Replica `r` always gets the same stream, so changing the replica count
/// never perturbs earlier replicas.
pub fn stream_rng(seed: u64, purpose: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose)));
    rng.set_stream(replica);
    rng
}

/// Runs `f` for replicas `0..reps` in parallel; results come back in replica order.
pub fn replicate<R, F>(seed: u64, purpose: u64, reps: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&mut SimRng) -> R + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(&mut stream_rng(seed, purpose, r)))
        .collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            n: 0,
        }
    }

    /// Summation runs sequentially in sample order so results do not depend on
    /// thread scheduling.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        if samples.iter().all(|&x| x == samples[0]) {
            return Self { mean: samples[0], se: 0.0, n };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        let se = (ss / (n - 1) as f64 / n as f64).sqrt();
        Self { mean, se, n }
    }

    /// Fraction of `hits` among `n` trials.
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }

    /// `(mean - target) / se`; zero when both the error and the gap vanish.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.se)
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_between(&self, other: &Estimate) -> f64 {
        z_score(self.mean - other.mean, self.se.hypot(other.se))
    }
}

fn z_score(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap / se
    } else if gap.abs() <= 1e-12 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

/// Mean of batch averages with the between-batch standard error.
pub fn batch_means(batch_averages: &[f64]) -> Estimate {
    Estimate::from_samples(batch_averages)
}
