//! Numerical checks of the duality and of its consequences: Monte Carlo
//! duality gaps, the generator identity, fixation probabilities, stationary
//! moments and the moment recursion.

use serde::Serialize;

use crate::dual::{enumerate_events, DualSimulator, StationaryConfig};
use crate::error::{Error, Result};
use crate::forward::ForwardSimulator;
use crate::measures::{Allele, ModelParams};
use crate::num::{binomial, Scalar};
use crate::operators::{
    apply, bernstein_derivative, bernstein_eval, bernstein_second_derivative, CoefficientVector,
};
use crate::stats::{replicate, Estimate};

/// Largest degree accepted by [`generator_residual`].
pub const GENERATOR_MAX_DEGREE: usize = 30;

const FORWARD_STREAM: u64 = 0x4657_4431;
const DUAL_STREAM: u64 = 0x4455_414c;
const MOMENT_STREAM: u64 = 0x524f_4831;

/// `E_x[H(X_t, v)]` against `E_v[H(x, V_t)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityGap {
    pub x: f64,
    pub t: f64,
    pub v_index: usize,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub z: f64,
}

/// Duality gaps on the grid `xs x ts x vs`, `reps` replicas per side.
///
/// Each forward path serves every `(t, v)` for its `x`; each dual path serves
/// every `(t, x)` for its `v`.
pub fn duality_grid(
    model: &ModelParams<f64>,
    xs: &[f64],
    ts: &[f64],
    vs: &[CoefficientVector<f64>],
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<DualityGap>> {
    let mut times = ts.to_vec();
    times.sort_by(f64::total_cmp);
    let t_index = |t: f64| times.iter().position(|&s| s == t).expect("time from grid");

    let fwd = ForwardSimulator::new(model);
    // lhs[x][t][v]
    let lhs: Vec<Vec<Vec<Estimate>>> = xs
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let paths = replicate(seed, FORWARD_STREAM + xi as u64, reps, |rng| fwd.values_at(x, dt, &times, rng));
            (0..times.len())
                .map(|ti| {
                    vs.iter()
                        .map(|v| {
                            let s: Vec<f64> = paths.iter().map(|p| v.eval(p[ti])).collect();
                            Estimate::from_samples(&s)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let sim = DualSimulator::new(model);
    // rhs[v][t][x]
    let mut rhs: Vec<Vec<Vec<Estimate>>> = Vec::with_capacity(vs.len());
    for (vi, v) in vs.iter().enumerate() {
        let paths = replicate(seed, DUAL_STREAM + vi as u64, reps, |rng| sim.sample_at(v.clone(), &times, rng));
        let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
        rhs.push(
            (0..times.len())
                .map(|ti| {
                    xs.iter()
                        .map(|&x| {
                            let s: Vec<f64> = paths.iter().map(|p| p[ti].eval(x)).collect();
                            Estimate::from_samples(&s)
                        })
                        .collect()
                })
                .collect(),
        );
    }

    let mut out = Vec::new();
    for (vi, _) in vs.iter().enumerate() {
        for &t in ts {
            let ti = t_index(t);
            for (xi, &x) in xs.iter().enumerate() {
                let l = lhs[xi][ti][vi];
                let r = rhs[vi][ti][xi];
                out.push(DualityGap {
                    x,
                    t,
                    v_index: vi,
                    lhs: l,
                    rhs: r,
                    z: l.z_between(&r),
                });
            }
        }
    }
    Ok(out)
}

/// Single duality gap at `(x, v, t)`.
pub fn duality_gap(
    model: &ModelParams<f64>,
    x: f64,
    v: &CoefficientVector<f64>,
    t: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<DualityGap> {
    Ok(duality_grid(model, &[x], &[t], std::slice::from_ref(v), reps, dt, seed)?[0])
}

/// Generator of the forward process applied to `H(., w)` at `x`.
pub fn forward_generator<T: Scalar>(model: &ModelParams<T>, x: T, w: &[T]) -> T {
    let one = T::one();
    let h = |y: T| bernstein_eval(y, w);
    let h0 = h(x);
    let d1 = bernstein_derivative(x, w);
    let mut total = model.lambda0() / T::of(2.0) * x * (one - x) * bernstein_second_derivative(x, w);
    for a in model.lambda_tail().atoms() {
        let r = a.location;
        let up = h(x + r * (one - x)) - h0;
        let down = h(x - r * x) - h0;
        total += a.weight / (r * r) * (x * up + (one - x) * down);
    }
    let drift = model.selection().d_poly(x) + model.theta_lower() * (one - x) - model.theta_upper() * x;
    total += drift * d1;
    for a in model.mu().atoms() {
        let r = a.location;
        total += a.weight / r.abs() * (h(x + r * x * (one - x)) - h0);
    }
    for a in model.nu().atoms() {
        let r = a.location;
        let target = if r > T::zero() { x + r * (one - x) } else { x + r * x };
        total += a.weight / r.abs() * (h(target) - h0);
    }
    total
}

/// Rate matrix of the coefficient process applied to `H(x, .)` at `w`.
pub fn dual_generator<T: Scalar>(model: &ModelParams<T>, x: T, w: &CoefficientVector<T>) -> Result<T> {
    let h0 = w.eval(x);
    let mut total = T::zero();
    for &(event, rate) in enumerate_events(model, w.degree()).events() {
        let next = apply(event, w, model.selection())?;
        total += rate * (next.eval(x) - h0);
    }
    Ok(total)
}

/// `|A H(., w)(x) - B H(x, .)(w)|`.
pub fn generator_residual<T: Scalar>(model: &ModelParams<T>, x: T, w: &CoefficientVector<T>) -> Result<T> {
    if w.degree() > GENERATOR_MAX_DEGREE {
        return Err(Error::InvalidParameter {
            name: "w",
            reason: format!("degree {} above {GENERATOR_MAX_DEGREE}", w.degree()),
        });
    }
    Ok((forward_generator(model, x, w.entries()) - dual_generator(model, x, w)?).abs())
}

/// `P_x(X_inf = 1)` for every `x` in `xs` from the stationary dual started at `e_1`.
pub fn fixation_probability(
    model: &ModelParams<f64>,
    xs: &[f64],
    cfg: StationaryConfig,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if model.has_mutations() {
        return Err(Error::MutationsPresent("fixation_probability"));
    }
    model.require_assumption()?;
    let sim = DualSimulator::new(model);
    let mut rng = crate::stats::stream_rng(seed, DUAL_STREAM, 0);
    sim.stationary_functional(xs, cfg, &mut rng)
}

/// Fraction of forward paths from `x` absorbed at `1`; paths still inside
/// `(0, 1)` at `t_max` are reported as an error.
pub fn fixation_forward(
    model: &ModelParams<f64>,
    x: f64,
    reps: usize,
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<Estimate> {
    if model.has_mutations() {
        return Err(Error::MutationsPresent("fixation_forward"));
    }
    let sim = ForwardSimulator::new(model);
    let out = replicate(seed, FORWARD_STREAM ^ x.to_bits(), reps, |rng| sim.absorption(x, dt, t_max, rng));
    let unresolved = out.iter().filter(|o| o.is_none()).count();
    if unresolved > 0 {
        return Err(Error::InvalidParameter {
            name: "t_max",
            reason: format!("{unresolved} of {reps} paths not absorbed by t = {t_max}"),
        });
    }
    Ok(Estimate::proportion(out.iter().filter(|o| **o == Some(true)).count(), reps))
}

/// Stationary moments `rho_0..rho_{n_max}` with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub rho: Vec<Estimate>,
}

impl MomentTable {
    pub fn n_max(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn means(&self) -> Vec<f64> {
        self.rho.iter().map(|e| e.mean).collect()
    }

    /// Table of known values, without error.
    pub fn exact(values: &[f64]) -> Self {
        Self {
            rho: values.iter().map(|&v| Estimate::exact(v)).collect(),
        }
    }

    /// `rho_k >= rho_{k+1}` up to `z` standard errors of the difference.
    pub fn is_monotone(&self, z: f64) -> bool {
        self.rho
            .windows(2)
            .all(|w| w[1].mean - w[0].mean <= z * w[0].se.hypot(w[1].se) + 1e-12)
    }
}

/// `rho_n = E_{e_n}[V_inf]` by running the dual to absorption `reps` times per `n`.
pub fn stationary_moments(model: &ModelParams<f64>, n_max: usize, reps: usize, seed: u64) -> Result<MomentTable> {
    if !model.has_mutations() {
        return Err(Error::NoMutations("stationary_moments"));
    }
    model.require_assumption()?;
    stationary_moments_unchecked(model, n_max, reps, seed)
}

/// [`stationary_moments`] without the recurrence check; paths that outgrow
/// the line cap surface as [`Error::Explosion`].
pub fn stationary_moments_unchecked(
    model: &ModelParams<f64>,
    n_max: usize,
    reps: usize,
    seed: u64,
) -> Result<MomentTable> {
    let sim = DualSimulator::new(model);
    let mut rho = vec![Estimate::exact(1.0)];
    for n in 1..=n_max {
        rho.push(absorbed_mean(&sim, &CoefficientVector::unit(n), reps, seed, MOMENT_STREAM + n as u64)?);
    }
    Ok(MomentTable { rho })
}

/// Mean absorbed value `E_v[V_inf]` by direct simulation.
pub fn absorbed_mean(
    sim: &DualSimulator<'_>,
    v: &CoefficientVector<f64>,
    reps: usize,
    seed: u64,
    stream: u64,
) -> Result<Estimate> {
    let out = replicate(seed, stream, reps, |rng| sim.simulate_until(v.clone(), f64::INFINITY, rng));
    let values = out
        .into_iter()
        .map(|r| r.map(|s| s.limit.expect("infinite horizon ends in absorption")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Coefficients `c_k` with `E_w[V_inf] = sum_k c_k rho_k`:
/// `c_k = sum_{i<=k} C(m,i) C(m-i,k-i) (-1)^(k-i) w_i`, `m = deg w`.
pub fn moment_coefficients(w: &[f64]) -> Vec<f64> {
    let m = w.len() - 1;
    (0..=m)
        .map(|k| {
            (0..=k)
                .map(|i| {
                    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial::<f64>(m, i) * binomial::<f64>(m - i, k - i) * w[i]
                })
                .sum()
        })
        .collect()
}

/// `E_v[V_inf]` expressed through the stationary moments.
pub fn expected_absorbed_value(v: &CoefficientVector<f64>, rho: &MomentTable) -> Result<Estimate> {
    if v.degree() > rho.n_max() {
        return Err(Error::InsufficientMoments {
            needed: v.degree(),
            available: rho.n_max(),
        });
    }
    let c = moment_coefficients(v.entries());
    let mean = c.iter().zip(&rho.rho).map(|(c, r)| c * r.mean).sum();
    let var: f64 = c.iter().zip(&rho.rho).map(|(c, r)| (c * r.se).powi(2)).sum();
    Ok(Estimate {
        mean,
        se: var.sqrt(),
        n: rho.rho.iter().map(|r| r.n).max().unwrap_or(0),
    })
}

/// `alpha_n` and `alpha_{n,k}` for `k = 0..=max(n+kappa-1, 2n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionCoeffs {
    pub n: usize,
    pub alpha_n: f64,
    pub alpha_nk: Vec<f64>,
}

impl RecursionCoeffs {
    pub fn upper(&self) -> usize {
        self.alpha_nk.len() - 1
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Recursion coefficients from their closed forms.
pub fn recursion_coefficients(model: &ModelParams<f64>, n: usize) -> RecursionCoeffs {
    assert!(n >= 1, "the recursion starts at n = 1");
    let sel = model.selection();
    let kappa = sel.kappa();
    let upper = (n + kappa - 1).max(2 * n);
    let mut alpha = vec![0.0; upper + 1];
    let sign = |e: usize| if e.is_multiple_of(2) { 1.0 } else { -1.0 };
    for (k, a) in alpha.iter_mut().enumerate().take(n) {
        let theta = if k + 1 == n { model.theta_lower() } else { 0.0 };
        *a = binomial::<f64>(n, k) * (model.mut_rate(n, n - k, Allele::Lower) + theta);
        if k >= 1 && n - k + 1 >= 2 {
            *a += binomial::<f64>(n, k - 1) * model.lambda_rate(n, n - k + 1);
        }
    }
    for (k, a) in alpha.iter_mut().enumerate().skip(n) {
        if k < n + kappa {
            for l in 2.max(k + 1 - n)..=kappa {
                let inner: f64 = (n..=k)
                    .map(|i| {
                        sign(k - i) * sel.p(l, i + 1 - n) * factorial(l)
                            / (factorial(n + l - 1 - k) * factorial(k - i) * factorial(i + 1 - n))
                    })
                    .sum();
                *a += n as f64 * sel.beta(l) * inner;
            }
        }
        if k <= 2 * n {
            if k > n {
                *a += binomial::<f64>(n, k - n) * model.env_rate(n, k - n, Allele::Upper);
            }
            for l in 1.max(k - n)..=n {
                let inner: f64 = (n..=k)
                    .map(|i| {
                        sign(k - i) * 2f64.powi((n + l - i) as i32) * factorial(l)
                            / (factorial(n + l - k) * factorial(k - i) * factorial(i - n))
                    })
                    .sum();
                *a += binomial::<f64>(n, l) * model.env_rate(n, l, Allele::Lower) * inner;
            }
        }
    }
    RecursionCoeffs {
        n,
        alpha_n: model.total_dual_rate(n),
        alpha_nk: alpha,
    }
}

/// Recursion coefficients by first-step analysis of the dual from `e_n`:
/// every event rate times the moment expansion of the image of `e_n`.
pub fn recursion_coefficients_from_dual(model: &ModelParams<f64>, n: usize) -> Result<RecursionCoeffs> {
    let kappa = model.selection().kappa();
    let upper = (n + kappa - 1).max(2 * n);
    let mut alpha = vec![0.0; upper + 1];
    let cat = enumerate_events(model, n);
    let e_n = CoefficientVector::unit(n);
    for &(event, rate) in cat.events() {
        let image = apply(event, &e_n, model.selection())?;
        for (k, c) in moment_coefficients(image.entries()).into_iter().enumerate() {
            alpha[k] += rate * c;
        }
    }
    Ok(RecursionCoeffs {
        n,
        alpha_n: cat.total(),
        alpha_nk: alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionResidual {
    pub n: usize,
    pub residual: f64,
    pub se: f64,
    /// `|residual| / se`; zero when both vanish.
    pub scaled: f64,
}

/// `alpha_n rho_n - sum_k alpha_{n,k} rho_k` with its propagated standard error.
pub fn recursion_residual(model: &ModelParams<f64>, n: usize, rho: &MomentTable) -> Result<RecursionResidual> {
    let coeffs = recursion_coefficients(model, n);
    if coeffs.upper() > rho.n_max() {
        return Err(Error::InsufficientMoments {
            needed: coeffs.upper(),
            available: rho.n_max(),
        });
    }
    let mut weights = coeffs.alpha_nk.iter().map(|a| -a).collect::<Vec<_>>();
    weights[n] += coeffs.alpha_n;
    let residual: f64 = weights.iter().zip(&rho.rho).map(|(w, r)| w * r.mean).sum();
    let se = weights
        .iter()
        .zip(&rho.rho)
        .map(|(w, r)| (w * r.se).powi(2))
        .sum::<f64>()
        .sqrt();
    let scaled = if se > 0.0 {
        residual.abs() / se
    } else if residual.abs() <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(RecursionResidual {
        n,
        residual,
        se,
        scaled,
    })
}
