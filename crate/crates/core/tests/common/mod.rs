#![allow(dead_code)]

use lwf_core::{Model, SelectionKernel};
use rand::Rng;

pub fn neutral() -> Model {
    Model::kingman(1.0)
}

pub fn genic(s: f64) -> Model {
    Model::builder()
        .lambda0(1.0)
        .selection(SelectionKernel::genic(s).unwrap())
        .build()
        .unwrap()
}

/// Lambda tail, branching selection, environment, coordinated and individual mutation.
pub fn full() -> Model {
    Model::builder()
        .lambda_atom(0.5, 1.0)
        .mu_atom(0.4, 0.2)
        .mu_atom(-0.3, 0.1)
        .nu_atom(0.25, 0.1)
        .nu_atom(-0.5, 0.1)
        .theta(0.3, 0.2)
        .selection(
            SelectionKernel::new(3, vec![0.3, 0.2], vec![vec![0.0, 0.6, 1.0], vec![0.0, 0.2, 0.9, 1.0]]).unwrap(),
        )
        .build()
        .unwrap()
}

pub fn theta_only(a: f64, b: f64) -> Model {
    Model::builder().lambda0(1.0).theta(a, b).build().unwrap()
}

/// Same Lambda tail as [`full`] with strong branching and no mutation.
pub fn violating() -> Model {
    Model::builder()
        .lambda_atom(0.5, 1.0)
        .selection(SelectionKernel::genic(10.0).unwrap())
        .build()
        .unwrap()
}

fn signed_location<R: Rng>(rng: &mut R) -> f64 {
    let r: f64 = rng.random_range(0.05..=1.0);
    if rng.random_bool(0.5) {
        r
    } else {
        -r
    }
}

/// Random model with every ingredient switched on with probability 1/2.
pub fn random_model<R: Rng>(rng: &mut R) -> Model {
    let mut b = Model::builder();
    if rng.random_bool(0.5) {
        b = b.lambda0(rng.random_range(0.0..2.0));
    }
    for _ in 0..rng.random_range(0..3) {
        b = b.lambda_atom(rng.random_range(0.05..=1.0), rng.random_range(0.01..1.0));
    }
    for _ in 0..rng.random_range(0..3) {
        b = b.mu_atom(signed_location(rng), rng.random_range(0.01..0.5));
    }
    for _ in 0..rng.random_range(0..3) {
        b = b.nu_atom(signed_location(rng), rng.random_range(0.01..0.5));
    }
    if rng.random_bool(0.5) {
        b = b.theta(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    }
    if rng.random_bool(0.5) {
        let kappa = rng.random_range(2..=4);
        let beta = (2..=kappa).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = (2..=kappa)
            .map(|l| {
                (0..=l)
                    .map(|i| match i {
                        0 => 0.0,
                        i if i == l => 1.0,
                        _ => rng.random_range(0.0..=1.0),
                    })
                    .collect()
            })
            .collect();
        b = b.selection(SelectionKernel::new(kappa, beta, p).unwrap());
    }
    b.build().unwrap()
}

/// `(1 - exp(-2 s x)) / (1 - exp(-2 s))`, or `x` when `s = 0`.
pub fn diffusion_fixation(s: f64, x: f64) -> f64 {
    if s == 0.0 {
        x
    } else {
        (1.0 - (-2.0 * s * x).exp()) / (1.0 - (-2.0 * s).exp())
    }
}

/// `k`-th moment of Beta(a, b).
pub fn beta_moment(a: f64, b: f64, k: usize) -> f64 {
    (0..k).map(|j| (a + j as f64) / (a + b + j as f64)).product()
}

/// Binomial pmf from the product formula.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let c: f64 = (0..k).map(|j| (n - j) as f64 / (j + 1) as f64).product();
            c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
        })
        .collect()
}
