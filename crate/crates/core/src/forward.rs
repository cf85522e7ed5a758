//! Forward jump-diffusion for the type-`a` frequency: Euler steps for the
//! drift and Kingman noise, exact Poisson clocks for the atomic jumps.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::ModelParams;
use crate::stats::{replicate, Estimate};

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardConfig {
    pub x0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl ForwardConfig {
    pub fn new(x0: f64, t_end: f64) -> Result<Self> {
        Self::with_dt(x0, t_end, DEFAULT_DT.min(t_end.max(f64::MIN_POSITIVE)))
    }

    pub fn with_dt(x0: f64, t_end: f64, dt: f64) -> Result<Self> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(0.0..=1.0).contains(&x0) {
            return bad("x0", format!("{x0} outside [0, 1]"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return bad("t", format!("{t_end} must be finite and nonnegative"));
        }
        if dt.is_nan() || dt <= 0.0 || (t_end > 0.0 && dt > t_end) {
            return bad("dt", format!("{dt} must be positive and at most t = {t_end}"));
        }
        Ok(Self { x0, t_end, dt })
    }

    /// Index of the Euler step at which time `t` is reached.
    pub fn step_index(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Effect of one jump channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpAction {
    /// Lambda atom: with probability `x` the `a` parent replaces a fraction
    /// `r`, `x -> x + r(1-x)`; otherwise `x -> x - r x`.
    Neutral { r: f64 },
    /// `mu` atom: `x -> x + r x (1-x)`.
    Environment { r: f64 },
    /// `nu` atom: `x -> x + |r| (1{r > 0} (1-x) - 1{r < 0} x)`.
    CoordinatedMutation { r: f64 },
}

impl JumpAction {
    /// New frequency given `u ~ U[0, 1]` (only the neutral channel uses it).
    pub fn apply(&self, x: f64, u: f64) -> f64 {
        let y = match *self {
            JumpAction::Neutral { r } => {
                if u <= x {
                    x + r * (1.0 - x)
                } else {
                    x - r * x
                }
            }
            JumpAction::Environment { r } => x + r * x * (1.0 - x),
            JumpAction::CoordinatedMutation { r } => {
                if r > 0.0 {
                    x + r * (1.0 - x)
                } else {
                    x + r * x
                }
            }
        };
        y.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpCatalog {
    channels: Vec<(JumpAction, f64)>,
    cumulative: Vec<f64>,
}

impl JumpCatalog {
    pub fn new(model: &ModelParams<f64>) -> Self {
        let mut channels = Vec::new();
        for a in model.lambda_tail().atoms() {
            let r = a.location;
            channels.push((JumpAction::Neutral { r }, a.weight / (r * r)));
        }
        for a in model.mu().atoms() {
            let r = a.location;
            channels.push((JumpAction::Environment { r }, a.weight / r.abs()));
        }
        for a in model.nu().atoms() {
            let r = a.location;
            channels.push((JumpAction::CoordinatedMutation { r }, a.weight / r.abs()));
        }
        let mut acc = 0.0;
        let cumulative = channels
            .iter()
            .map(|&(_, rate)| {
                acc += rate;
                acc
            })
            .collect();
        Self {
            channels,
            cumulative,
        }
    }

    pub fn channels(&self) -> &[(JumpAction, f64)] {
        &self.channels
    }

    pub fn total_rate(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn choose(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.channels.len() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub t: f64,
    pub channel: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ForwardPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

/// Stepper holding the model-derived pieces shared by all replicas.
#[derive(Debug, Clone)]
pub struct ForwardSimulator<'m> {
    model: &'m ModelParams<f64>,
    jumps: JumpCatalog,
    sigma: f64,
    absorbing: bool,
}

/// Per-path mutable state of [`ForwardSimulator`].
#[derive(Debug, Clone, Copy)]
struct Cursor {
    x: f64,
    step: usize,
    next_jump: f64,
}

impl<'m> ForwardSimulator<'m> {
    pub fn new(model: &'m ModelParams<f64>) -> Self {
        Self {
            model,
            jumps: JumpCatalog::new(model),
            sigma: model.lambda0().sqrt(),
            absorbing: !model.has_mutations(),
        }
    }

    pub fn jump_catalog(&self) -> &JumpCatalog {
        &self.jumps
    }

    /// `d(x) + theta_a (1-x) - theta_A x`.
    pub fn drift(&self, x: f64) -> f64 {
        self.model.selection().d_poly(x) + self.model.theta_lower() * (1.0 - x)
            - self.model.theta_upper() * x
    }

    fn draw_jump_time<R: Rng + ?Sized>(&self, from: f64, rng: &mut R) -> f64 {
        let rate = self.jumps.total_rate();
        if rate > 0.0 {
            from + Distribution::<f64>::sample(&Exp1, rng) / rate
        } else {
            f64::INFINITY
        }
    }

    fn frozen(&self, x: f64) -> bool {
        self.absorbing && (x == 0.0 || x == 1.0)
    }

    /// Advances one step of length `dt`: Euler sub-step with clamping, then
    /// every jump whose clock rings inside the step.
    fn advance<R: Rng + ?Sized>(
        &self,
        c: &mut Cursor,
        dt: f64,
        rng: &mut R,
        log: &mut Option<&mut Vec<JumpRecord>>,
    ) {
        let x = c.x;
        let mut y = x + self.drift(x) * dt;
        if self.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            y += self.sigma * (x * (1.0 - x)).max(0.0).sqrt() * dt.sqrt() * z;
        }
        c.x = y.clamp(0.0, 1.0);
        c.step += 1;
        let t_end = c.step as f64 * dt;
        while c.next_jump <= t_end {
            let u_channel = rng.random::<f64>() * self.jumps.total_rate();
            let channel = self.jumps.choose(u_channel);
            let from = c.x;
            c.x = self.jumps.channels[channel].0.apply(from, rng.random::<f64>());
            if let Some(log) = log.as_deref_mut() {
                log.push(JumpRecord {
                    t: c.next_jump,
                    channel,
                    from,
                    to: c.x,
                });
            }
            c.next_jump = self.draw_jump_time(c.next_jump, rng);
        }
    }

    /// Full trajectory recorded every `record_every` steps, plus the jump log.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        cfg: &ForwardConfig,
        record_every: usize,
        rng: &mut R,
    ) -> ForwardPath {
        let record_every = record_every.max(1);
        let steps = cfg.step_index(cfg.t_end);
        let mut path = ForwardPath::default();
        let mut jumps = Vec::new();
        let mut c = Cursor {
            x: cfg.x0,
            step: 0,
            next_jump: self.draw_jump_time(0.0, rng),
        };
        path.times.push(0.0);
        path.values.push(c.x);
        while c.step < steps {
            if self.frozen(c.x) {
                c.step = steps;
            } else {
                self.advance(&mut c, cfg.dt, rng, &mut Some(&mut jumps));
            }
            if c.step.is_multiple_of(record_every) || c.step == steps {
                path.times.push(c.step as f64 * cfg.dt);
                path.values.push(c.x);
            }
        }
        path.jumps = jumps;
        path
    }

    /// `X_t` at each of the ascending `times`, rounded to the step grid.
    pub fn values_at<R: Rng + ?Sized>(&self, x0: f64, dt: f64, times: &[f64], rng: &mut R) -> Vec<f64> {
        let mut c = Cursor {
            x: x0,
            step: 0,
            next_jump: self.draw_jump_time(0.0, rng),
        };
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let target = (t / dt).round() as usize;
            while c.step < target {
                if self.frozen(c.x) {
                    c.step = target;
                    break;
                }
                self.advance(&mut c, dt, rng, &mut None);
            }
            out.push(c.x);
        }
        out
    }

    /// Runs until `X` is frozen at `0` or `1`; `None` if `t_max` comes first.
    ///
    /// Only meaningful without mutations, where both boundaries absorb.
    pub fn absorption<R: Rng + ?Sized>(&self, x0: f64, dt: f64, t_max: f64, rng: &mut R) -> Option<bool> {
        let mut c = Cursor {
            x: x0,
            step: 0,
            next_jump: self.draw_jump_time(0.0, rng),
        };
        let max_steps = (t_max / dt).ceil() as usize;
        while c.step < max_steps {
            if self.frozen(c.x) {
                return Some(c.x == 1.0);
            }
            self.advance(&mut c, dt, rng, &mut None);
        }
        self.frozen(c.x).then_some(c.x == 1.0)
    }
}

/// Ensemble estimate of `E_x[X_t^k]`.
pub fn moment_estimate(
    model: &ModelParams<f64>,
    cfg: &ForwardConfig,
    k: i32,
    reps: usize,
    seed: u64,
) -> Estimate {
    let sim = ForwardSimulator::new(model);
    let samples = replicate(seed, 0x4657_4431, reps, |rng| {
        sim.values_at(cfg.x0, cfg.dt, &[cfg.t_end], rng)[0].powi(k)
    });
    Estimate::from_samples(&samples)
}
