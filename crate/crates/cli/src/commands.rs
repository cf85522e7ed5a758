use anyhow::bail;
use lwf_core::analysis::{
    absorbed_mean, duality_grid, expected_absorbed_value, fixation_forward, generator_residual,
    recursion_coefficients, recursion_coefficients_from_dual, recursion_residual, stationary_moments_unchecked,
    MomentTable,
};
use lwf_core::dual::{lyapunov_report, DualSimulator, StationaryConfig};
use lwf_core::forward::{ForwardConfig, ForwardSimulator};
use lwf_core::moran::{moran_fixation, moran_vs_sde};
use lwf_core::stats::{replicate, stream_rng, Estimate};
use lwf_core::{Coefficients, Model};
use serde_json::json;

use crate::record::{Table, Verdict};
use crate::{row, Cli, Command};

const FIXATION_T_MAX: f64 = 10_000.0;
const Z_LIMIT: f64 = 3.0;
const RESIDUAL_LIMIT: f64 = 1e-10;

pub struct Output {
    pub values: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub table: Table,
}

pub fn run(command: Command, cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    match command {
        Command::Check => check(model),
        Command::SimulateForward => simulate_forward(cli, model),
        Command::SimulateDual => simulate_dual(cli, model),
        Command::Moran => moran(cli, model),
        Command::Duality => duality(cli, model),
        Command::Fixation => fixation(cli, model),
        Command::Moments => moments(cli, model),
        Command::Recursion => recursion(cli, model),
    }
}

fn require_recurrence(cli: &Cli, model: &Model) -> anyhow::Result<()> {
    let report = model.check_assumption();
    if !report.verdict && !cli.force {
        bail!(
            "{}; rerun with --force to proceed anyway",
            report.into_error()
        );
    }
    Ok(())
}

fn check(model: &Model) -> anyhow::Result<Output> {
    let report = model.check_assumption();
    let mut table = Table::new(&["n", "delta", "f", "drift"]);
    let lyapunov = if model.lambda_mass() > 0.0 {
        let lyap = lyapunov_report(model, 1, 1000)?;
        for r in &lyap.rows {
            table.push(row![r.n, r.delta, r.f, r.drift]);
        }
        json!({
            "n0": lyap.n0,
            "rows": lyap.rows.iter().take(100).collect::<Vec<_>>(),
        })
    } else {
        json!(null)
    };
    let detail = format!(
        "b + mu = {} vs c + nu + theta = {}{}",
        report.b + report.mu_mass,
        report.c + report.nu_mass + report.theta,
        if report.c_is_infinite() { " (c infinite)" } else { "" }
    );
    Ok(Output {
        values: json!({ "lyapunov": lyapunov }),
        verdicts: vec![Verdict::new("assumption", report.verdict, detail)],
        table,
    })
}

fn simulate_forward(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let x0 = cli.x0.unwrap_or(0.5);
    let t = cli.t.unwrap_or(1.0);
    let cfg = ForwardConfig::with_dt(x0, t, cli.dt)?;
    let record_every = (cfg.step_index(t) / 1000).max(1);
    let sim = ForwardSimulator::new(model);
    let paths = replicate(cli.seed, 0x5346_5744, cli.replicas, |rng| sim.simulate_path(&cfg, record_every, rng));
    let finals: Vec<f64> = paths.iter().map(|p| *p.values.last().expect("paths hold x0")).collect();
    let mut table = Table::new(&["replica", "x_t", "jumps"]);
    for (i, (p, x)) in paths.iter().zip(&finals).enumerate() {
        table.push(row![i, x, p.jumps.len()]);
    }
    let squares: Vec<f64> = finals.iter().map(|x| x * x).collect();
    let at = |v: f64| finals.iter().filter(|&&x| x == v).count() as f64 / finals.len() as f64;
    Ok(Output {
        values: json!({
            "mean": Estimate::from_samples(&finals),
            "second_moment": Estimate::from_samples(&squares),
            "fraction_at_0": at(0.0),
            "fraction_at_1": at(1.0),
            "first_path": { "times": paths[0].times, "values": paths[0].values, "jumps": paths[0].jumps },
        }),
        verdicts: Vec::new(),
        table,
    })
}

fn simulate_dual(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let v = cli.vector()?.unwrap_or_else(|| Coefficients::unit(1));
    let x0 = cli.x0.unwrap_or(0.5);
    let t = cli.t.unwrap_or(1.0);
    let sim = DualSimulator::new(model);
    let paths = replicate(cli.seed, 0x5344_5541, cli.replicas, |rng| sim.simulate_until(v.clone(), t, rng))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&[
        "replica",
        "lines",
        "absorbed",
        "h_x0",
        "max_lines",
        "coalescence",
        "selection",
        "mutation",
        "environment",
    ]);
    let mut h = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let value = p.state.v.eval(x0);
        h.push(value);
        let c = p.counts;
        table.push(row![
            i,
            p.state.lines(),
            p.absorbed,
            value,
            p.max_lines,
            c.coalescence,
            c.selection,
            c.mutation,
            c.environment
        ]);
    }
    let lines: Vec<f64> = paths.iter().map(|p| p.state.lines() as f64).collect();
    Ok(Output {
        values: json!({
            "h_x0": Estimate::from_samples(&h),
            "lines": Estimate::from_samples(&lines),
            "absorbed_fraction": paths.iter().filter(|p| p.absorbed).count() as f64 / paths.len() as f64,
        }),
        verdicts: Vec::new(),
        table,
    })
}

fn moran(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let k = cli.population;
    let x0 = cli.x0.unwrap_or(0.5);
    let i0 = (x0 * k as f64).round() as usize;
    let t = cli.t.unwrap_or(1.0);
    let cmp = moran_vs_sde(model, k, i0, t, &[1, 2], cli.replicas, cli.dt, cli.seed)?;
    let mut table = Table::new(&["moment", "moran", "moran_se", "sde", "sde_se", "z"]);
    let mut verdicts = Vec::new();
    for c in &cmp {
        table.push(row![c.k, c.moran.mean, c.moran.se, c.sde.mean, c.sde.se, c.z]);
        verdicts.push(Verdict::new(
            format!("moment_{}", c.k),
            c.z.abs() <= Z_LIMIT,
            format!("z = {:.3}", c.z),
        ));
    }
    let fixation = if model.has_mutations() {
        json!(null)
    } else {
        let moran = moran_fixation(model, k, i0, cli.replicas, cli.seed)?;
        let diffusion = fixation_forward(model, i0 as f64 / k as f64, cli.replicas, cli.dt, FIXATION_T_MAX, cli.seed)?;
        json!({ "moran": moran, "diffusion": diffusion })
    };
    Ok(Output {
        values: json!({ "population": k, "i0": i0, "moments": cmp, "fixation": fixation }),
        verdicts,
        table,
    })
}

fn duality(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let xs = cli.x0.map_or_else(|| vec![0.2, 0.5, 0.8], |x| vec![x]);
    let ts = cli.t.map_or_else(|| vec![0.1, 0.5, 1.0], |t| vec![t]);
    let vs = cli
        .vector()?
        .map_or_else(|| vec![Coefficients::unit(1), Coefficients::unit(2)], |v| vec![v]);
    let gaps = duality_grid(model, &xs, &ts, &vs, cli.replicas, cli.dt, cli.seed)?;
    let mut table = Table::new(&["v_index", "x", "t", "lhs", "lhs_se", "rhs", "rhs_se", "z"]);
    for g in &gaps {
        table.push(row![g.v_index, g.x, g.t, g.lhs.mean, g.lhs.se, g.rhs.mean, g.rhs.se, g.z]);
    }
    let excursions = gaps.iter().filter(|g| g.z.abs() > Z_LIMIT).count();
    let mut residual = 0.0f64;
    for v in &vs {
        for j in 0..=10 {
            residual = residual.max(generator_residual(model, j as f64 / 10.0, v)?);
        }
    }
    Ok(Output {
        values: json!({
            "v": vs.iter().map(|v| v.entries().to_vec()).collect::<Vec<_>>(),
            "gaps": gaps,
            "generator_residual": residual,
        }),
        verdicts: vec![
            Verdict::new(
                "duality_gaps",
                excursions <= 1,
                format!("{excursions} of {} points beyond |z| = {Z_LIMIT}", gaps.len()),
            ),
            Verdict::new(
                "generator_identity",
                residual <= RESIDUAL_LIMIT,
                format!("max residual {residual:e}"),
            ),
        ],
        table,
    })
}

fn fixation(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    if model.has_mutations() {
        bail!("fixation needs a model without mutation (theta, nu)");
    }
    require_recurrence(cli, model)?;
    let x0 = cli.x0.unwrap_or(0.5);
    let mut xs: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
    let x0_index = xs.iter().position(|&x| x == x0).unwrap_or_else(|| {
        xs.push(x0);
        xs.len() - 1
    });
    let cfg = StationaryConfig::with_horizon(cli.t.unwrap_or(10_000.0));
    let sim = DualSimulator::new(model);
    let f = sim.stationary_functional(&xs, cfg, &mut stream_rng(cli.seed, 0x4649_5831, 0))?;
    let forward = fixation_forward(model, x0, cli.replicas, cli.dt, FIXATION_T_MAX, cli.seed)?;
    let mut table = Table::new(&["x", "f", "se"]);
    for (x, e) in xs.iter().zip(&f).take(11) {
        table.push(row![x, e.mean, e.se]);
    }
    let ends = f[0].mean == 0.0 && f[10].mean == 1.0;
    let monotone = f[..11]
        .windows(2)
        .all(|w| w[1].mean >= w[0].mean - Z_LIMIT * w[0].se.hypot(w[1].se));
    let z = f[x0_index].z_between(&forward);
    Ok(Output {
        values: json!({
            "grid": xs[..11],
            "dual": f[..11],
            "x0": x0,
            "dual_at_x0": f[x0_index],
            "forward_at_x0": forward,
        }),
        verdicts: vec![
            Verdict::new("boundary", ends, format!("f(0) = {}, f(1) = {}", f[0].mean, f[10].mean)),
            Verdict::new("monotone", monotone, "f nondecreasing within 3 SE"),
            Verdict::new("forward_cross_check", z.abs() <= Z_LIMIT, format!("z = {z:.3}")),
        ],
        table,
    })
}

fn moment_table(cli: &Cli, model: &Model, n_max: usize) -> anyhow::Result<MomentTable> {
    if !model.has_mutations() {
        bail!("stationary moments need mutation (theta or nu)");
    }
    require_recurrence(cli, model)?;
    Ok(stationary_moments_unchecked(model, n_max, cli.replicas, cli.seed)?)
}

fn moments(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let n_max = cli.n_max.unwrap_or(3);
    let rho = moment_table(cli, model, n_max)?;
    let v = match cli.vector()? {
        Some(v) => v,
        None if n_max >= 2 => Coefficients::new(vec![0.2, 0.7, 0.4])?,
        None => Coefficients::unit(n_max),
    };
    let formula = expected_absorbed_value(&v, &rho)?;
    let direct = absorbed_mean(&DualSimulator::new(model), &v, cli.replicas, cli.seed, 0x4556_4551)?;
    let z = formula.z_between(&direct);
    let mut table = Table::new(&["n", "rho", "se"]);
    for (n, e) in rho.rho.iter().enumerate() {
        table.push(row![n, e.mean, e.se]);
    }
    Ok(Output {
        values: json!({
            "rho": rho.rho,
            "v": v.entries(),
            "expected_absorbed_value": formula,
            "direct_simulation": direct,
        }),
        verdicts: vec![
            Verdict::new("monotone", rho.is_monotone(Z_LIMIT), "rho_k >= rho_(k+1) within 3 SE"),
            Verdict::new("absorbed_value_cross_check", z.abs() <= Z_LIMIT, format!("z = {z:.3}")),
        ],
        table,
    })
}

fn recursion(cli: &Cli, model: &Model) -> anyhow::Result<Output> {
    let n_max = cli.n_max.unwrap_or(3);
    if n_max == 0 {
        bail!("--n-max must be at least 1");
    }
    let coeffs: Vec<_> = (1..=n_max).map(|n| recursion_coefficients(model, n)).collect();
    let needed = coeffs.iter().map(|c| c.upper()).max().unwrap_or(0);
    let rho = moment_table(cli, model, needed)?;
    let mut table = Table::new(&["n", "alpha_n", "residual", "se", "scaled"]);
    let mut residuals = Vec::new();
    let mut worst_coeff = 0.0f64;
    for c in &coeffs {
        let other = recursion_coefficients_from_dual(model, c.n)?;
        for (a, b) in c.alpha_nk.iter().zip(&other.alpha_nk) {
            worst_coeff = worst_coeff.max((a - b).abs());
        }
        worst_coeff = worst_coeff.max((c.alpha_n - other.alpha_n).abs());
        let r = recursion_residual(model, c.n, &rho)?;
        table.push(row![c.n, c.alpha_n, r.residual, r.se, r.scaled]);
        residuals.push(r);
    }
    let worst = residuals.iter().map(|r| r.scaled).fold(0.0, f64::max);
    Ok(Output {
        values: json!({
            "coefficients": coeffs,
            "rho": rho.rho,
            "residuals": residuals,
        }),
        verdicts: vec![
            Verdict::new("residuals", worst <= Z_LIMIT, format!("max scaled residual {worst:.3}")),
            Verdict::new(
                "coefficients",
                worst_coeff <= RESIDUAL_LIMIT,
                format!("closed form vs first-step analysis differ by {worst_coeff:e}"),
            ),
        ],
        table,
    })
}
