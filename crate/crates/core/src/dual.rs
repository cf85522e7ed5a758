//! Gillespie simulation of the Bernstein coefficient process `V` and its
//! labeled line-counting projection, with the drift diagnostics of `L`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{Allele, ModelParams};
use crate::num::Scalar;
use crate::operators::{apply, CoefficientVector, EventKind};
use crate::stats::{batch_means, Estimate};

pub const DEFAULT_L_MAX: usize = 10_000;
pub const DEFAULT_BATCHES: usize = 20;

/// Every transition out of a state with `n` lines, with its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCatalog<T> {
    n: usize,
    events: Vec<(EventKind, T)>,
    cumulative: Vec<T>,
}

impl<T: Scalar> EventCatalog<T> {
    pub fn lines(&self) -> usize {
        self.n
    }

    /// Events with positive rate, in a fixed order.
    pub fn events(&self) -> &[(EventKind, T)] {
        &self.events
    }

    pub fn total(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event whose cumulative rate interval contains `u`, for `0 <= u < total`.
    pub fn choose(&self, u: T) -> EventKind {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.events[idx.min(self.events.len() - 1)].0
    }
}

/// Complete event list for `n` lines.
pub fn enumerate_events<T: Scalar>(model: &ModelParams<T>, n: usize) -> EventCatalog<T> {
    let mut events = Vec::new();
    let mut push = |kind: EventKind, rate: T| {
        if rate > T::zero() {
            events.push((kind, rate));
        }
    };
    for k in 2..=n {
        push(EventKind::Coalesce(k), model.coalescence_event_rate(n, k));
    }
    if n >= 1 {
        let sel = model.selection();
        for l in 2..=sel.kappa() {
            push(EventKind::Select(l), T::count(n) * sel.beta(l));
        }
    }
    for c in Allele::BOTH {
        for l in 1..=n {
            push(EventKind::Mutate(c, l), model.mut_event_rate(n, l, c));
        }
    }
    for c in Allele::BOTH {
        for l in 1..=n {
            push(EventKind::Environment(c, l), model.env_event_rate(n, l, c));
        }
    }
    let mut acc = T::zero();
    let cumulative = events
        .iter()
        .map(|&(_, r)| {
            acc += r;
            acc
        })
        .collect();
    EventCatalog {
        n,
        events,
        cumulative,
    }
}

/// State of the dual: coefficients, label of the last mutation or
/// environment event, and time.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub v: CoefficientVector<f64>,
    pub label: Allele,
    pub clock: f64,
}

impl DualState {
    pub fn new(v: CoefficientVector<f64>) -> Self {
        Self {
            v,
            label: Allele::Lower,
            clock: 0.0,
        }
    }

    pub fn lines(&self) -> usize {
        self.v.degree()
    }

    pub fn is_absorbed(&self) -> bool {
        self.v.is_scalar()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub coalescence: u64,
    pub selection: u64,
    pub mutation: u64,
    pub environment: u64,
}

impl EventCounts {
    fn record(&mut self, e: EventKind) {
        match e {
            EventKind::Coalesce(_) => self.coalescence += 1,
            EventKind::Select(_) => self.selection += 1,
            EventKind::Mutate(..) => self.mutation += 1,
            EventKind::Environment(..) => self.environment += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.coalescence + self.selection + self.mutation + self.environment
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub state: DualState,
    pub absorbed: bool,
    /// Absorbed scalar value `V_inf`.
    pub limit: Option<f64>,
    pub counts: EventCounts,
    pub max_lines: usize,
}

/// Averaging window for [`DualSimulator::stationary_functional`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryConfig {
    pub burn_in: f64,
    pub horizon: f64,
    pub batches: usize,
}

impl StationaryConfig {
    /// Burn-in of 10% of the horizon and the default batch count.
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            burn_in: 0.1 * horizon,
            horizon,
            batches: DEFAULT_BATCHES,
        }
    }
}

/// Event-driven simulator; shareable across replica threads.
#[derive(Debug)]
pub struct DualSimulator<'m> {
    model: &'m ModelParams<f64>,
    l_max: usize,
    catalogs: Vec<OnceLock<EventCatalog<f64>>>,
}

impl<'m> DualSimulator<'m> {
    pub fn new(model: &'m ModelParams<f64>) -> Self {
        Self::with_l_max(model, DEFAULT_L_MAX)
    }

    pub fn with_l_max(model: &'m ModelParams<f64>, l_max: usize) -> Self {
        Self {
            model,
            l_max,
            catalogs: (0..=l_max).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn model(&self) -> &ModelParams<f64> {
        self.model
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn catalog(&self, n: usize) -> &EventCatalog<f64> {
        self.catalogs[n].get_or_init(|| enumerate_events(self.model, n))
    }

    fn guard(&self, v: &CoefficientVector<f64>) -> Result<()> {
        if v.degree() > self.l_max {
            return Err(Error::Explosion {
                lines: v.degree(),
                limit: self.l_max,
            });
        }
        Ok(())
    }

    /// Waiting time and event of the next transition; `None` if no event can occur.
    fn propose<R: Rng + ?Sized>(&self, state: &DualState, rng: &mut R) -> Option<(f64, EventKind)> {
        let cat = self.catalog(state.lines());
        let total = cat.total();
        if total <= 0.0 {
            return None;
        }
        let wait: f64 = Exp1.sample(rng);
        let u = rng.random::<f64>() * total;
        Some((wait / total, cat.choose(u)))
    }

    fn perform(&self, state: &mut DualState, event: EventKind) -> Result<()> {
        let next = apply(event, &state.v, self.model.selection())?;
        self.guard(&next)?;
        state.v = next;
        if let Some(c) = event.label() {
            state.label = c;
        }
        Ok(())
    }

    /// One transition. Returns `None`, leaving the state untouched, when the
    /// total rate is zero.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut DualState, rng: &mut R) -> Result<Option<EventKind>> {
        if state.is_absorbed() {
            return Err(Error::Absorbed);
        }
        let Some((wait, event)) = self.propose(state, rng) else {
            return Ok(None);
        };
        self.perform(state, event)?;
        state.clock += wait;
        Ok(Some(event))
    }

    /// Runs from `v0` until `t_end` or absorption, calling `observe` on the
    /// initial state and after every event.
    pub fn simulate_with<R, F>(
        &self,
        v0: CoefficientVector<f64>,
        t_end: f64,
        rng: &mut R,
        mut observe: F,
    ) -> Result<PathSummary>
    where
        R: Rng + ?Sized,
        F: FnMut(&DualState, Option<EventKind>),
    {
        self.guard(&v0)?;
        let mut state = DualState::new(v0);
        let mut counts = EventCounts::default();
        let mut max_lines = state.lines();
        observe(&state, None);
        while !state.is_absorbed() {
            let Some((wait, event)) = self.propose(&state, rng) else {
                break;
            };
            if state.clock + wait > t_end {
                break;
            }
            self.perform(&mut state, event)?;
            state.clock += wait;
            counts.record(event);
            max_lines = max_lines.max(state.lines());
            observe(&state, Some(event));
        }
        let absorbed = state.is_absorbed();
        if !absorbed {
            state.clock = t_end;
        }
        Ok(PathSummary {
            limit: absorbed.then(|| state.v[0]),
            absorbed,
            counts,
            max_lines,
            state,
        })
    }

    pub fn simulate_until<R: Rng + ?Sized>(
        &self,
        v0: CoefficientVector<f64>,
        t_end: f64,
        rng: &mut R,
    ) -> Result<PathSummary> {
        self.simulate_with(v0, t_end, rng, |_, _| {})
    }

    /// `V_t` at each of the ascending `times` along one path.
    pub fn sample_at<R: Rng + ?Sized>(
        &self,
        v0: CoefficientVector<f64>,
        times: &[f64],
        rng: &mut R,
    ) -> Result<Vec<CoefficientVector<f64>>> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        self.guard(&v0)?;
        let mut state = DualState::new(v0);
        let mut out = Vec::with_capacity(times.len());
        let mut pending = None;
        for &t in times {
            loop {
                if state.is_absorbed() {
                    break;
                }
                let (wait, event) = match pending.take() {
                    Some(p) => p,
                    None => match self.propose(&state, rng) {
                        Some(p) => p,
                        None => break,
                    },
                };
                if state.clock + wait > t {
                    // keep the drawn event; by memorylessness only its absolute time matters
                    pending = Some((wait, event));
                    break;
                }
                self.perform(&mut state, event)?;
                state.clock += wait;
            }
            out.push(state.v.clone());
        }
        Ok(out)
    }

    /// Time average of `H(x, V_t)` from `V_0 = e_1` over
    /// `[burn_in, burn_in + horizon]` for every `x` in `xs`, with batch-means
    /// standard errors. The average only converges when the recurrence
    /// condition holds; that is left to the caller.
    pub fn stationary_functional<R: Rng + ?Sized>(
        &self,
        xs: &[f64],
        cfg: StationaryConfig,
        rng: &mut R,
    ) -> Result<Vec<Estimate>> {
        if self.model.has_mutations() {
            return Err(Error::MutationsPresent("stationary_functional"));
        }
        if cfg.batches == 0 || cfg.horizon <= 0.0 || cfg.burn_in < 0.0 {
            return Err(Error::InvalidParameter {
                name: "stationary",
                reason: "horizon and batch count must be positive".into(),
            });
        }
        let width = cfg.horizon / cfg.batches as f64;
        let mut sums = vec![vec![0.0; xs.len()]; cfg.batches];
        let mut state = DualState::new(CoefficientVector::unit(1));
        let end = cfg.burn_in + cfg.horizon;
        let mut values: Vec<f64> = xs.iter().map(|&x| state.v.eval(x)).collect();
        loop {
            let proposal = self.propose(&state, rng);
            let next_time = proposal.map_or(end, |(w, _)| (state.clock + w).min(end));
            // spread the constant segment [clock, next_time) over the batches it meets
            let mut a = state.clock.max(cfg.burn_in);
            while a < next_time {
                let b = ((a - cfg.burn_in) / width).floor() as usize;
                let b = b.min(cfg.batches - 1);
                let stop = (cfg.burn_in + (b + 1) as f64 * width).min(next_time);
                for (s, v) in sums[b].iter_mut().zip(&values) {
                    *s += v * (stop - a);
                }
                a = stop;
            }
            match proposal {
                Some((w, event)) if state.clock + w < end => {
                    self.perform(&mut state, event)?;
                    state.clock += w;
                    for (val, &x) in values.iter_mut().zip(xs) {
                        *val = state.v.eval(x);
                    }
                }
                _ => break,
            }
        }
        Ok((0..xs.len())
            .map(|j| {
                let avgs: Vec<f64> = sums.iter().map(|s| s[j] / width).collect();
                batch_means(&avgs)
            })
            .collect())
    }
}

/// One line of the Lyapunov table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovRow {
    pub n: usize,
    pub delta: f64,
    pub f: f64,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub rows: Vec<LyapunovRow>,
    /// Smallest `n0 <= 100` with negative drift on all of `[n0, 10 n0]`.
    pub n0: Option<usize>,
}

/// Largest `n0` searched by [`lyapunov_report`].
pub const LYAPUNOV_N0_MAX: usize = 100;

/// `delta(n) = C(n,2) Lambda({0}) - n sum w log(1 - (n r - 1 + (1-r)^n) / n) / r^2`.
pub fn lyapunov_delta(model: &ModelParams<f64>, n: usize) -> f64 {
    let nn = n as f64;
    let kingman = model.lambda0() * nn * (nn - 1.0) / 2.0;
    model.lambda_tail().atoms().iter().fold(kingman, |acc, a| {
        let r = a.location;
        let inner = (nn * r - 1.0 + (1.0 - r).powi(n as i32)) / nn;
        acc - nn * a.weight * (-inner).ln_1p() / (r * r)
    })
}

/// `f(l) = sum_{k=2}^{l} k / delta(k) log(k / (k-1))` for `l = 0..=len-1`,
/// with `f(0) = f(1) = 0`.
pub fn lyapunov_f(model: &ModelParams<f64>, len: usize) -> Vec<f64> {
    let mut f = vec![0.0; len.max(2)];
    for k in 2..len {
        let kk = k as f64;
        f[k] = f[k - 1] + kk / lyapunov_delta(model, k) * (kk / (kk - 1.0)).ln();
    }
    f.truncate(len);
    f
}

/// `B^L g(n)`, the generator of the line-counting process applied to `g`.
///
/// `g` must be defined on `0..=max(2n, n + kappa - 1)`.
pub fn line_generator(model: &ModelParams<f64>, g: &[f64], n: usize) -> f64 {
    let cat = enumerate_events(model, n);
    let here = g[n];
    cat.events()
        .iter()
        .map(|&(e, rate)| rate * (g[e.lines_after(n)] - here))
        .sum()
}

/// Table of `delta`, `f` and the drift `B^L f` for `n_lo..=n_hi`, and the
/// first `n0` after which the drift stays negative up to `10 n0`.
pub fn lyapunov_report(model: &ModelParams<f64>, n_lo: usize, n_hi: usize) -> Result<LyapunovReport> {
    if model.lambda_mass() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "the Lyapunov function needs a non-zero Lambda".into(),
        });
    }
    let n_lo = n_lo.max(1);
    if n_hi < n_lo {
        return Err(Error::InvalidParameter {
            name: "n_hi",
            reason: format!("n_hi = {n_hi} below n_lo = {n_lo}"),
        });
    }
    let len = 2 * n_hi + model.selection().kappa() + 1;
    let f = lyapunov_f(model, len);
    let rows: Vec<LyapunovRow> = (n_lo..=n_hi)
        .map(|n| LyapunovRow {
            n,
            delta: lyapunov_delta(model, n),
            f: f[n],
            drift: line_generator(model, &f, n),
        })
        .collect();
    let drift = |n: usize| rows[n - n_lo].drift;
    let n0 = (n_lo..=LYAPUNOV_N0_MAX.min(n_hi / 10)).find(|&n0| (n0..=10 * n0).all(|n| drift(n) < 0.0));
    Ok(LyapunovReport { rows, n0 })
}
