//! Execution of each pipeline kind into CSV tables.
//!
//! Work is split into independent cells (one design, one sweep point) and
//! mapped over the current rayon pool; results are collected in input order
//! so the tables do not depend on the number of workers.

use nalgebra::DVector;
use precond_risk::finite_sim::{
    build_preconditioner, dimension_for, optimal_early_stopping, sample_design, sample_theta_star, simulate_replicate,
    yky_diagnostic, Design, EntryDist, FlowSpectrum, LabelKind, LabelModel, MeanStd, ReplicateRisk, SimOptions,
    TrajectoryPoint,
};
use precond_risk::geomspace;
use precond_risk::risk_theory::{
    bias_lower_bound, misspecified_bias, risk_report, snr, sweep_alpha, theoretical_bias, theoretical_variance,
    MisspecSpec,
};
use precond_risk::rkhs_sim::{
    build_model, iterations_to_threshold, rate_damping, run_gd, run_preconditioned, sample_dataset, summarize_sweep,
};
use precond_risk::rng::substream;
use precond_risk::spectra::{
    make_joint, make_two_atom, precondition_spectrum, PreconditionerSpec, PriorSpec, SpectralMeasure,
};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config::{DampingGrid, ExperimentConfig, Pipeline, TimeGrid};
use crate::error::{at, CliResult};
use crate::output::{f, opt_f, Table};

const THEORY_COLUMNS: &[&str] =
    &["gamma", "sigma2", "preconditioner", "alpha", "bias", "variance", "total", "m0", "m_prime"];
const SIM_COLUMNS: &[&str] =
    &["seed", "n", "d", "gamma", "preconditioner", "alpha", "sigma2", "label_model", "bias", "variance", "risk"];
const SIM_SUMMARY_COLUMNS: &[&str] = &[
    "gamma",
    "n",
    "d",
    "preconditioner",
    "replicates",
    "bias_mean",
    "bias_std",
    "variance_mean",
    "variance_std",
    "total_mean",
    "total_std",
];

/// One per-seed simulation row in `SIM_COLUMNS` order.
fn sim_row(
    seed: u64,
    n: usize,
    gamma: f64,
    p: &PreconditionerSpec,
    sigma2: f64,
    label_model: &str,
    r: &ReplicateRisk,
) -> Vec<String> {
    vec![
        seed.to_string(),
        n.to_string(),
        dimension_for(n, gamma).to_string(),
        f(gamma),
        p.label(),
        opt_f(p.alpha()),
        f(sigma2),
        label_model.to_string(),
        f(r.bias),
        f(r.variance),
        f(r.risk),
    ]
}

/// Maps `f` over `items` in parallel; the first error in input order wins.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> CliResult<R> + Sync + Send) -> CliResult<Vec<R>> {
    let out: Vec<CliResult<R>> = items.par_iter().map(f).collect();
    out.into_iter().collect()
}

fn design(n: usize, gamma: f64, fx: &SpectralMeasure, seed: u64) -> CliResult<Design> {
    at("finite_sim", "sample_design", sample_design(n, dimension_for(n, gamma), fx, EntryDist::Gaussian, seed))
}

fn time_grid(flow: &FlowSpectrum, n: usize, g: &TimeGrid) -> Vec<f64> {
    let eigs = flow.gram_eigenvalues();
    let unit = n as f64 / eigs[eigs.len() - 1];
    geomspace(g.lo * unit, g.hi * unit, g.points)
}

/// Groups rows by `key` in first-appearance order.
fn group_by<K: PartialEq + Clone, V: Copy>(items: impl IntoIterator<Item = (K, V)>) -> Vec<(K, Vec<V>)> {
    let mut groups: Vec<(K, Vec<V>)> = Vec::new();
    for (k, v) in items {
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.1.push(v),
            None => groups.push((k, vec![v])),
        }
    }
    groups
}

fn mean_std_cells(values: impl IntoIterator<Item = f64>) -> [String; 2] {
    let m = MeanStd::of(values);
    [f(m.mean), f(m.std)]
}

pub fn run_pipeline(cfg: &ExperimentConfig) -> CliResult<Vec<Table>> {
    let fx = at("spectra", "build_spectrum", cfg.spectrum.build())?;
    match &cfg.pipeline {
        Pipeline::GammaSweep { gammas, simulation } => {
            let mut tables = vec![gamma_theory(cfg, &fx, gammas)?];
            if let Some(sim) = simulation {
                let labels = LabelModel { kind: LabelKind::WellSpecified, sigma: cfg.sigma2.sqrt(), prior: cfg.prior };
                tables.extend(gamma_simulation(cfg, &fx, sim.n, &sim.gammas, &labels)?);
            }
            Ok(tables)
        }
        Pipeline::AlphaSweep { gamma, families, alphas, snr: target } => {
            let prior = cfg.prior;
            let sigma2 = match target {
                Some(s) => snr(&fx, |x| prior.value(x), 1.0) / s,
                None => cfg.sigma2,
            };
            let mut t = Table::new(
                "sweep.csv",
                &["family", "alpha", "gamma", "sigma2", "snr", "bias", "variance", "total", "m0", "m_prime"],
            );
            for fam in families {
                let rows = at(
                    "risk_theory",
                    "sweep_alpha",
                    sweep_alpha(&fx, |x| prior.value(x), *gamma, sigma2, *fam, alphas),
                )?;
                let ratio = snr(&fx, |x| prior.value(x), sigma2);
                for (a, r) in rows {
                    t.push(vec![
                        format!("{fam:?}").to_lowercase(),
                        f(a),
                        f(*gamma),
                        f(sigma2),
                        f(ratio),
                        f(r.bias),
                        f(r.variance),
                        f(r.total),
                        f(r.m0),
                        f(r.m_prime),
                    ]);
                }
            }
            Ok(vec![t])
        }
        Pipeline::Misspecification { gamma, trace_terms, simulation_n } => {
            misspecification(cfg, &fx, *gamma, trace_terms, *simulation_n)
        }
        Pipeline::Trajectory { gamma, n, time_grid } => trajectories(cfg, &fx, *gamma, *n, time_grid),
        Pipeline::Alignment { gamma, n, prior_exponents, time_grid } => {
            alignment(cfg, &fx, *gamma, *n, prior_exponents, time_grid)
        }
        Pipeline::Yky { gamma, n, sigmas, two_atom_kappas } => yky(cfg, &fx, *gamma, *n, sigmas, two_atom_kappas),
        Pipeline::Quadratic { gamma, n, alpha_qs, test_points } => {
            quadratic(cfg, &fx, *gamma, *n, alpha_qs, *test_points)
        }
        Pipeline::Rkhs { .. } => rkhs(cfg),
    }
}

fn gamma_theory(cfg: &ExperimentConfig, fx: &SpectralMeasure, gammas: &[f64]) -> CliResult<Table> {
    let prior = cfg.prior;
    let specs: Vec<_> = cfg.preconditioners.iter().filter(|p| !p.is_sample()).collect();
    let rows = par_map(gammas, |&g| {
        specs
            .iter()
            .map(|p| at("risk_theory", "risk_report", risk_report(fx, |x| prior.value(x), p, g, cfg.sigma2)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut t = Table::new("theory.csv", THEORY_COLUMNS);
    for (reports, &g) in rows.iter().zip(gammas) {
        for (r, p) in reports.iter().zip(&specs) {
            t.push(vec![
                f(g),
                f(cfg.sigma2),
                p.label(),
                opt_f(p.alpha()),
                f(r.bias),
                f(r.variance),
                f(r.total),
                f(r.m0),
                f(r.m_prime),
            ]);
        }
    }
    Ok(t)
}

fn gamma_simulation(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    n: usize,
    gammas: &[f64],
    labels: &LabelModel,
) -> CliResult<Vec<Table>> {
    let cells: Vec<(f64, u64)> = gammas.iter().flat_map(|&g| cfg.seeds.iter().map(move |&s| (g, s))).collect();
    let opts = SimOptions::default();
    let results = par_map(&cells, |&(g, seed)| {
        let d = design(n, g, fx, seed)?;
        cfg.preconditioners
            .iter()
            .map(|p| at("finite_sim", "simulate_replicate", simulate_replicate(&d, p, labels, &opts)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut raw = Table::new("simulation.csv", SIM_COLUMNS);
    let mut keyed = Vec::new();
    for (&(g, seed), reps) in cells.iter().zip(&results) {
        for (r, p) in reps.iter().zip(&cfg.preconditioners) {
            raw.push(sim_row(seed, n, g, p, cfg.sigma2, &labels.kind.label(), r));
            keyed.push(((g.to_bits(), p.label()), (r.bias, r.variance, r.risk)));
        }
    }
    let mut summary = Table::new("simulation_summary.csv", SIM_SUMMARY_COLUMNS);
    for ((g_bits, label), vals) in group_by(keyed) {
        let g = f64::from_bits(g_bits);
        let mut row = vec![f(g), n.to_string(), dimension_for(n, g).to_string(), label, vals.len().to_string()];
        row.extend(mean_std_cells(vals.iter().map(|v| v.0)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.1)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.2)));
        summary.push(row);
    }
    Ok(vec![raw, summary])
}

fn misspecification(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    gamma: f64,
    trace_terms: &[f64],
    simulation_n: Option<usize>,
) -> CliResult<Vec<Table>> {
    let prior = cfg.prior;
    let mut theory = Table::new(
        "theory.csv",
        &["gamma", "trace_term", "sigma2", "preconditioner", "alpha", "bias", "variance", "total"],
    );
    for p in cfg.preconditioners.iter().filter(|p| !p.is_sample()) {
        let joint = at("spectra", "make_joint", make_joint(fx, |x| prior.value(x), p))?;
        let fxp = at("spectra", "precondition_spectrum", precondition_spectrum(fx, p))?;
        let variance = at("risk_theory", "theoretical_variance", theoretical_variance(&fxp, gamma, cfg.sigma2))?;
        for &tc in trace_terms {
            let mis = at("risk_theory", "misspec_spec", MisspecSpec::new(tc))?;
            let bias = at("risk_theory", "misspecified_bias", misspecified_bias(&joint, gamma, &mis))?;
            theory.push(vec![
                f(gamma),
                f(tc),
                f(cfg.sigma2),
                p.label(),
                opt_f(p.alpha()),
                f(bias),
                f(variance),
                f(bias + variance),
            ]);
        }
    }
    let mut tables = vec![theory];
    let Some(n) = simulation_n else { return Ok(tables) };

    let d = dimension_for(n, gamma);
    let results = par_map(&cfg.seeds, |&seed| {
        let des = design(n, gamma, fx, seed)?;
        let mut out = Vec::new();
        for &tc in trace_terms {
            let spectrum = at("spectra", "point_mass", SpectralMeasure::point_mass(tc))?;
            let labels = LabelModel {
                kind: LabelKind::UnobservedFeatures { d_c: d, spectrum, prior: PriorSpec::Isotropic },
                sigma: cfg.sigma2.sqrt(),
                prior,
            };
            for p in &cfg.preconditioners {
                let r = at(
                    "finite_sim",
                    "simulate_replicate",
                    simulate_replicate(&des, p, &labels, &SimOptions::default()),
                )?;
                out.push((tc, p, r));
            }
        }
        Ok(out)
    })?;
    let mut raw = Table::new("simulation.csv", SIM_COLUMNS);
    let mut keyed = Vec::new();
    for (seed, rows) in cfg.seeds.iter().zip(&results) {
        for (tc, p, r) in rows {
            raw.push(sim_row(*seed, n, gamma, p, cfg.sigma2, &format!("unobserved(trace_term={tc})"), r));
            keyed.push(((tc.to_bits(), p.label()), (r.bias, r.variance, r.risk)));
        }
    }
    let mut summary = Table::new(
        "simulation_summary.csv",
        &[
            "trace_term",
            "n",
            "d",
            "preconditioner",
            "replicates",
            "bias_mean",
            "bias_std",
            "variance_mean",
            "variance_std",
            "total_mean",
            "total_std",
        ],
    );
    let mut groups = group_by(keyed);
    groups.sort_by(|a, b| f64::from_bits(a.0 .0).total_cmp(&f64::from_bits(b.0 .0)));
    for ((tc_bits, label), vals) in groups {
        let mut row = vec![f(f64::from_bits(tc_bits)), n.to_string(), d.to_string(), label, vals.len().to_string()];
        row.extend(mean_std_cells(vals.iter().map(|v| v.0)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.1)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.2)));
        summary.push(row);
    }
    tables.extend([raw, summary]);
    Ok(tables)
}

fn trajectories(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    gamma: f64,
    n: usize,
    grid: &TimeGrid,
) -> CliResult<Vec<Table>> {
    let results = par_map(&cfg.seeds, |&seed| {
        let des = design(n, gamma, fx, seed)?;
        let mut out = Vec::new();
        for p in &cfg.preconditioners {
            let pm = at("finite_sim", "build_preconditioner", build_preconditioner(p, &des))?;
            let flow = at("finite_sim", "flow_spectrum", FlowSpectrum::new(&des, &pm))?;
            let terms = flow.prior_terms(&cfg.prior);
            let path: Vec<TrajectoryPoint> = time_grid(&flow, n, grid)
                .into_iter()
                .map(|t| {
                    let filt = flow.filter_at(t);
                    let bias = flow.bias(&terms, &filt);
                    let variance = flow.variance(cfg.sigma2, &filt);
                    TrajectoryPoint { t, bias, variance, risk: bias + variance }
                })
                .collect();
            let es = at("finite_sim", "optimal_early_stopping", optimal_early_stopping(&path))?;
            out.push((p.label(), path, es));
        }
        Ok(out)
    })?;
    let mut traj = Table::new("trajectory.csv", &["seed", "preconditioner", "t", "bias", "variance", "risk"]);
    let mut stop = Table::new(
        "early_stopping.csv",
        &["seed", "preconditioner", "t_star", "risk", "bias", "variance", "t_bias", "bias_min"],
    );
    for (seed, runs) in cfg.seeds.iter().zip(&results) {
        for (label, path, es) in runs {
            for pt in path {
                traj.push(vec![seed.to_string(), label.clone(), f(pt.t), f(pt.bias), f(pt.variance), f(pt.risk)]);
            }
            stop.push(vec![
                seed.to_string(),
                label.clone(),
                f(es.t_star),
                f(es.risk),
                f(es.bias),
                f(es.variance),
                f(es.t_bias),
                f(es.bias_min),
            ]);
        }
    }
    Ok(vec![traj, stop])
}

fn alignment(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    gamma: f64,
    n: usize,
    exponents: &[f64],
    grid: &TimeGrid,
) -> CliResult<Vec<Table>> {
    let priors: Vec<PriorSpec> = exponents.iter().map(|&b| PriorSpec::CovariancePower { exponent: -b }).collect();
    let mut theory = Table::new("theory.csv", &["prior_exponent", "preconditioner", "bias", "bias_lower_bound"]);
    for (b, prior) in exponents.iter().zip(&priors) {
        let bound = at("risk_theory", "bias_lower_bound", bias_lower_bound(fx, |x| prior.value(x), gamma))?;
        for p in cfg.preconditioners.iter().filter(|p| !p.is_sample()) {
            let joint = at("spectra", "make_joint", make_joint(fx, |x| prior.value(x), p))?;
            let bias = at("risk_theory", "theoretical_bias", theoretical_bias(&joint, gamma))?;
            theory.push(vec![f(*b), p.label(), f(bias), f(bound)]);
        }
    }

    let results = par_map(&cfg.seeds, |&seed| {
        let des = design(n, gamma, fx, seed)?;
        let mut out = Vec::new();
        for p in &cfg.preconditioners {
            let pm = at("finite_sim", "build_preconditioner", build_preconditioner(p, &des))?;
            let flow = at("finite_sim", "flow_spectrum", FlowSpectrum::new(&des, &pm))?;
            let filters: Vec<DVector<f64>> = time_grid(&flow, n, grid).into_iter().map(|t| flow.filter_at(t)).collect();
            let stat = flow.stationary_filter();
            for (b, prior) in exponents.iter().zip(&priors) {
                let terms = flow.prior_terms(prior);
                let stationary = flow.bias(&terms, &stat);
                let es = filters.iter().map(|fl| flow.bias(&terms, fl)).fold(stationary, f64::min);
                out.push((*b, p.label(), stationary, es));
            }
        }
        Ok(out)
    })?;
    let mut raw = Table::new(
        "simulation.csv",
        &["prior_exponent", "seed", "preconditioner", "stationary_bias", "early_stopping_bias"],
    );
    let mut keyed = Vec::new();
    for (seed, rows) in cfg.seeds.iter().zip(&results) {
        for (b, label, st, es) in rows {
            raw.push(vec![f(*b), seed.to_string(), label.clone(), f(*st), f(*es)]);
            keyed.push(((b.to_bits(), label.clone()), (*st, *es)));
        }
    }
    let mut summary = Table::new(
        "simulation_summary.csv",
        &[
            "prior_exponent",
            "preconditioner",
            "replicates",
            "stationary_bias_mean",
            "stationary_bias_std",
            "early_stopping_bias_mean",
            "early_stopping_bias_std",
        ],
    );
    let mut groups = group_by(keyed);
    groups.sort_by(|a, b| f64::from_bits(a.0 .0).total_cmp(&f64::from_bits(b.0 .0)));
    for ((b_bits, label), vals) in groups {
        let mut row = vec![f(f64::from_bits(b_bits)), label, vals.len().to_string()];
        row.extend(mean_std_cells(vals.iter().map(|v| v.0)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.1)));
        summary.push(row);
    }
    Ok(vec![theory, raw, summary])
}

fn yky(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    gamma: f64,
    n: usize,
    sigmas: &[f64],
    kappas: &[f64],
) -> CliResult<Vec<Table>> {
    // Labels reuse theta* and the noise direction across the sweep, so the
    // curves differ only through the swept quantity.
    let evaluate = |des: &Design, seed: u64, sigma: f64| -> CliResult<f64> {
        let theta = sample_theta_star(&des.sigma_x_eigs, &cfg.prior, &mut substream(seed, 1));
        let mut rng = substream(seed, 2);
        let eps = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let y = &des.x * theta + eps * sigma;
        at("finite_sim", "yky_diagnostic", yky_diagnostic(des, &y))
    };
    let sigma_rows = par_map(&cfg.seeds, |&seed| {
        let des = design(n, gamma, fx, seed)?;
        sigmas.iter().map(|&s| evaluate(&des, seed, s)).collect::<CliResult<Vec<_>>>()
    })?;
    let kappa_cells: Vec<(f64, u64)> = kappas.iter().flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s))).collect();
    let kappa_rows = par_map(&kappa_cells, |&(k, seed)| {
        let spec = at("spectra", "make_two_atom", make_two_atom(k, true))?;
        let des = design(n, gamma, &spec, seed)?;
        evaluate(&des, seed, cfg.sigma2.sqrt())
    })?;

    let mut raw = Table::new("yky.csv", &["variable", "value", "seed", "sqrt_yky_over_n"]);
    let mut keyed = Vec::new();
    for (seed, vals) in cfg.seeds.iter().zip(&sigma_rows) {
        for (s, v) in sigmas.iter().zip(vals) {
            raw.push(vec!["sigma".into(), f(*s), seed.to_string(), f(*v)]);
            keyed.push((("sigma", s.to_bits()), *v));
        }
    }
    for ((k, seed), v) in kappa_cells.iter().zip(&kappa_rows) {
        raw.push(vec!["kappa".into(), f(*k), seed.to_string(), f(*v)]);
        keyed.push((("kappa", k.to_bits()), *v));
    }
    let mut summary = Table::new("yky_summary.csv", &["variable", "value", "replicates", "mean", "std"]);
    for ((var, bits), vals) in group_by(keyed) {
        let mut row = vec![var.to_string(), f(f64::from_bits(bits)), vals.len().to_string()];
        row.extend(mean_std_cells(vals));
        summary.push(row);
    }
    Ok(vec![raw, summary])
}

fn quadratic(
    cfg: &ExperimentConfig,
    fx: &SpectralMeasure,
    gamma: f64,
    n: usize,
    alpha_qs: &[f64],
    test_points: usize,
) -> CliResult<Vec<Table>> {
    let opts = SimOptions { test_points };
    let cells: Vec<(f64, u64)> = alpha_qs.iter().flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let results = par_map(&cells, |&(a, seed)| {
        let des = design(n, gamma, fx, seed)?;
        let labels =
            LabelModel { kind: LabelKind::QuadraticMisspec { alpha_q: a }, sigma: cfg.sigma2.sqrt(), prior: cfg.prior };
        cfg.preconditioners
            .iter()
            .map(|p| at("finite_sim", "simulate_replicate", simulate_replicate(&des, p, &labels, &opts)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut raw = Table::new("simulation.csv", SIM_COLUMNS);
    let mut keyed = Vec::new();
    for (&(a, seed), reps) in cells.iter().zip(&results) {
        for (r, p) in reps.iter().zip(&cfg.preconditioners) {
            let kind = LabelKind::QuadraticMisspec { alpha_q: a };
            raw.push(sim_row(seed, n, gamma, p, cfg.sigma2, &kind.label(), r));
            keyed.push(((a.to_bits(), p.label()), (r.bias, r.variance, r.risk)));
        }
    }
    let mut summary = Table::new(
        "simulation_summary.csv",
        &[
            "alpha_q",
            "preconditioner",
            "replicates",
            "bias_mean",
            "bias_std",
            "variance_mean",
            "variance_std",
            "total_mean",
            "total_std",
        ],
    );
    for ((bits, label), vals) in group_by(keyed) {
        let mut row = vec![f(f64::from_bits(bits)), label, vals.len().to_string()];
        row.extend(mean_std_cells(vals.iter().map(|v| v.0)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.1)));
        row.extend(mean_std_cells(vals.iter().map(|v| v.2)));
        summary.push(row);
    }
    Ok(vec![raw, summary])
}

/// Dataset seed for model seed `seed` and sample size `n`.
pub fn rkhs_dataset_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(n as u64)
}

fn rkhs(cfg: &ExperimentConfig) -> CliResult<Vec<Table>> {
    let Pipeline::Rkhs { n_trunc, s, r_values, sigma, noise, eta, t_max, n_values, dampings, threshold, include_gd } =
        &cfg.pipeline
    else {
        unreachable!("rkhs called with another pipeline")
    };
    let cells: Vec<(f64, u64, usize)> = r_values
        .iter()
        .flat_map(|&r| cfg.seeds.iter().flat_map(move |&sd| n_values.iter().map(move |&n| (r, sd, n))))
        .collect();
    let results = par_map(&cells, |&(r, seed, n)| {
        let model = at("rkhs_sim", "build_model", build_model(*n_trunc, *s, r, seed))?;
        let data =
            at("rkhs_sim", "sample_dataset", sample_dataset(&model, n, *sigma, *noise, rkhs_dataset_seed(seed, n)))?;
        let alphas = match dampings {
            DampingGrid::Rate => vec![rate_damping(n, r, *s)],
            DampingGrid::Values { values } => values.clone(),
        };
        let trajs = alphas
            .iter()
            .map(|&a| at("rkhs_sim", "run_preconditioned", run_preconditioned(&model, &data, *eta, a, *t_max)))
            .collect::<CliResult<Vec<_>>>()?;
        let rows = summarize_sweep(n, 0, &alphas, &trajs, *threshold);
        let gd = if *include_gd {
            let tr = at("rkhs_sim", "run_gd", run_gd(&model, &data, *eta, *t_max))?;
            let (best_t, best) = tr.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            let thr = rows[0].threshold;
            Some((best, best_t, *tr.last().unwrap(), thr, iterations_to_threshold(&tr, thr), tr))
        } else {
            None
        };
        Ok((rows, trajs, gd))
    })?;
    let mut t = Table::new(
        "rkhs.csv",
        &["r", "seed", "n", "method", "alpha", "best_risk", "best_t", "final_risk", "threshold", "iters_to_threshold"],
    );
    let mut points =
        Table::new("rkhs_trajectory.csv", &["seed", "method", "n", "N", "s", "r", "alpha", "eta", "t", "risk"]);
    let iters = |i: Option<usize>| i.map(|v| v.to_string()).unwrap_or_default();
    for (&(r, seed, n), (rows, trajs, gd)) in cells.iter().zip(&results) {
        let runs = rows
            .iter()
            .zip(trajs)
            .map(|(row, tr)| ("preconditioned", f(row.alpha), tr))
            .chain(gd.iter().map(|g| ("gd", String::new(), &g.5)));
        for (method, alpha, tr) in runs {
            for (step, risk) in tr.iter().enumerate() {
                points.push(vec![
                    seed.to_string(),
                    method.into(),
                    n.to_string(),
                    n_trunc.to_string(),
                    f(*s),
                    f(r),
                    alpha.clone(),
                    f(*eta),
                    step.to_string(),
                    f(*risk),
                ]);
            }
        }
        for row in rows {
            t.push(vec![
                f(r),
                seed.to_string(),
                n.to_string(),
                "preconditioned".into(),
                f(row.alpha),
                f(row.best_risk),
                row.best_t.to_string(),
                f(row.final_risk),
                f(row.threshold),
                iters(row.iters_to_threshold),
            ]);
        }
        if let Some((best, best_t, last, thr, it, _)) = gd {
            t.push(vec![
                f(r),
                seed.to_string(),
                n.to_string(),
                "gd".into(),
                String::new(),
                f(*best),
                best_t.to_string(),
                f(*last),
                f(*thr),
                iters(*it),
            ]);
        }
    }
    Ok(vec![t, points])
}
