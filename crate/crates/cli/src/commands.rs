use std::path::{Path, PathBuf};

use ada_trotter::adaptive::{run_ada_trotter, run_fixed_trotter, RunOptions, RunRecord, StepRecord};
use ada_trotter::hilbert::StateVector;
use ada_trotter::noise::run_noisy_ada_trotter;
use ada_trotter::operators::expectation;
use ada_trotter::propagate::{exact_trajectory, KrylovConfig};
use ada_trotter::spectral::{
    dense_diagonalize, diagonal_ensemble, energy_distribution, long_time_average, AveragingWindow, MicrocanonicalCurve, Weighting,
    DEFAULT_MIN_STATES,
};
use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use rayon::prelude::*;

use crate::output::{num, opt, write_meta, Table};
use crate::scenario::{bail_if_noisy, Resolved, Scenario};

/// Outcome of one scenario run, whatever the engine.
pub struct Trace {
    pub record: RunRecord<()>,
}

fn strip<S>(r: RunRecord<S>) -> RunRecord<()> {
    RunRecord {
        reference: r.reference,
        initial: r.initial,
        steps: r.steps,
        observable_names: r.observable_names,
        moment_orders: r.moment_orders,
        states: Vec::new(),
        final_state: (),
    }
}

fn options(s: &Scenario, resolved: &Resolved) -> RunOptions {
    RunOptions { observables: resolved.observables.clone(), moment_orders: s.moment_orders.clone(), keep_states: false }
}

pub fn execute(s: &Scenario) -> Result<Trace> {
    let resolved = s.resolve()?;
    let opts = options(s, &resolved);
    let tol = s.tolerance_set();
    let cfg = s.search_config();
    let budget = s.budget();
    let record = match (s.noise_params(), s.ising_params()) {
        (Some(noise), Some(p)) => strip(run_noisy_ada_trotter(&p, &noise, &resolved.initial, &tol, &cfg, &budget, &opts)?),
        _ => strip(run_ada_trotter(
            &resolved.split,
            &resolved.initial,
            resolved.generators.as_deref(),
            &tol,
            &cfg,
            &budget,
            &opts,
        )?),
    };
    Ok(Trace { record })
}

fn fixed_steps(s: &Scenario, dt: f64) -> usize {
    match (s.budget.steps, s.budget.time) {
        (Some(n), Some(t)) => n.min((t / dt - 1e-9).ceil() as usize),
        (Some(n), None) => n,
        (None, Some(t)) => (t / dt - 1e-9).ceil() as usize,
        (None, None) => 0,
    }
}

fn execute_fixed(s: &Scenario, dt: f64, steps: usize) -> Result<Trace> {
    let resolved = s.resolve()?;
    let record = strip(run_fixed_trotter(&resolved.split, &resolved.initial, dt, steps, &options(s, &resolved))?);
    Ok(Trace { record })
}

fn scenario_json(s: &Scenario) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(s)?)
}

fn step_header(record: &RunRecord<()>) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "dt", "attempts", "freeze", "E_density", "var_density", "slack_E", "slack_var", "slack_G", "slack_Gvar", "d_E", "d_var",
        "d_G", "d_Gvar", "G_mean_dev", "G_var_dev",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(record.observable_names.iter().cloned());
    h.extend(record.moment_orders.iter().map(|n| format!("H{n}_root")));
    h
}

const STEP_COMMENTS: [&str; 5] = [
    "steps.csv: one row per accepted step",
    "t, dt: time in inverse energy units; E_density = <H>/L, var_density = (<H^2> - <H>^2)/L in energy units",
    "slack_*: deviation from the initial value minus the tolerance in force (d_*); empty when not constrained",
    "freeze: 1 when no step above t_min met the bounds; G_*_dev: sum_j |G_j - G_j(0)| / L and its variance analogue",
    "observables: expectation values of the named operators (magnetizations are per site); H<n>_root: <H^n>^(1/n) / L",
];

fn step_row(s: &StepRecord) -> Vec<String> {
    let tol = &s.tolerances;
    let mut row = vec![
        num(s.sample.t),
        num(s.dt),
        s.attempts.to_string(),
        u8::from(s.freeze).to_string(),
        num(s.sample.energy_density),
        num(s.sample.var_density),
        num(s.slacks.energy),
        num(s.slacks.variance),
        opt(s.slacks.gauge_mean),
        opt(s.slacks.gauge_var),
        num(tol.d_e),
        num(tol.d_var),
        num(tol.d_g),
        num(tol.d_gvar),
        opt(s.sample.gauge_mean_dev),
        opt(s.sample.gauge_var_dev),
    ];
    row.extend(s.sample.observables.iter().map(|&x| num(x)));
    row.extend(s.sample.moment_roots.iter().map(|&x| num(x)));
    row
}

fn write_steps(dir: &Path, record: &RunRecord<()>) -> Result<PathBuf> {
    let mut table = Table::create(dir, "steps.csv", &STEP_COMMENTS, &step_header(record))?;
    for s in &record.steps {
        table.row(&step_row(s))?;
    }
    table.finish()
}

fn write_members(dir: &Path, record: &RunRecord<()>) -> Result<PathBuf> {
    let mut table = Table::create(
        dir,
        "trajectories.csv",
        &[
            "trajectories.csv: per-trajectory moments of the noisy ensemble at every recorded time",
            "t in inverse energy units; E_density and var_density in energy units",
        ],
        &["t".into(), "trajectory".into(), "E_density".into(), "var_density".into()],
    )?;
    for sample in record.samples() {
        for (k, &(e, v)) in sample.members.iter().enumerate() {
            table.row(&[num(sample.t), k.to_string(), num(e), num(v)])?;
        }
    }
    table.finish()
}

fn reference_meta(record: &RunRecord<()>) -> Vec<(String, String)> {
    let mut extra = vec![
        ("reference.E_density".to_string(), num(record.reference.energy_density)),
        ("reference.var_density".to_string(), num(record.reference.var_density)),
    ];
    for (name, &v) in record.observable_names.iter().zip(&record.initial.observables) {
        extra.push((format!("initial.{name}"), num(v)));
    }
    extra.push(("result.steps".into(), record.steps.len().to_string()));
    extra.push(("result.final_t".into(), num(record.final_time())));
    extra.push(("result.freezes".into(), record.freeze_count().to_string()));
    extra.push(("result.mean_attempts".into(), num(record.mean_attempts())));
    extra
}

pub fn cmd_run(s: &Scenario, out: &Path) -> Result<Vec<PathBuf>> {
    let trace = execute(s)?;
    let mut files = vec![write_steps(out, &trace.record)?];
    if s.noise.is_some() {
        files.push(write_members(out, &trace.record)?);
    }
    files.push(write_meta(out, "run", &scenario_json(s)?, &reference_meta(&trace.record))?);
    Ok(files)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "d_E")]
    DE,
    #[value(name = "d_var")]
    DVar,
    #[value(name = "gamma")]
    Gamma,
    #[value(name = "dt")]
    Dt,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            Self::DE => "d_E",
            Self::DVar => "d_var",
            Self::Gamma => "gamma",
            Self::Dt => "dt",
        }
    }
}

pub struct SweepRequest {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub sites: Vec<usize>,
    pub exact: bool,
}

struct SweepPoint {
    sites: usize,
    value: f64,
    trace: Trace,
    averages: Vec<(f64, f64)>,
    exact: Vec<f64>,
}

fn window_for(s: &Scenario, t_final: f64) -> Result<AveragingWindow> {
    AveragingWindow::new(s.analysis.window_start * t_final, t_final).context("run too short for a long-time average")
}

fn weighting(s: &Scenario) -> Weighting {
    if s.analysis.step_weighted {
        Weighting::StepWeighted
    } else {
        Weighting::Unweighted
    }
}

fn sweep_point(base: &Scenario, axis: SweepAxis, sites: usize, value: f64, exact: bool) -> Result<SweepPoint> {
    let mut s = base.clone();
    s.set_sites(sites);
    match axis {
        SweepAxis::DE => s.tolerances.d_e = value,
        SweepAxis::DVar => s.tolerances.d_var = value,
        SweepAxis::Gamma => match &mut s.noise {
            Some(n) => n.gamma = value,
            None => bail!("a gamma sweep needs a noise section"),
        },
        SweepAxis::Dt => {}
    }
    s.validate()?;
    let trace = if axis == SweepAxis::Dt { execute_fixed(&s, value, fixed_steps(&s, value))? } else { execute(&s)? };
    let r = &trace.record;
    let times = r.times();
    let (mut averages, mut exact_means) = (Vec::new(), Vec::new());
    if r.final_time() > 0.0 {
        let window = window_for(&s, r.final_time())?;
        for name in &r.observable_names {
            let values = r.observable(name).unwrap_or_default();
            averages.push(long_time_average(&times, &values, &window, weighting(&s)).unwrap_or((f64::NAN, f64::NAN)));
        }
        if exact {
            let resolved = s.resolve()?;
            let n = (r.final_time() / 0.25).floor() as usize;
            let grid: Vec<f64> = (0..=n).map(|k| k as f64 * 0.25).collect();
            let states = exact_trajectory(resolved.split.total(), &resolved.initial, &grid, &KrylovConfig::default())?;
            for (_, op) in &resolved.observables {
                let values: Vec<f64> = states.iter().map(|st| expectation(op, st)).collect::<ada_trotter::Result<_>>()?;
                exact_means.push(long_time_average(&grid, &values, &window, Weighting::Unweighted).map_or(f64::NAN, |m| m.0));
            }
        }
    }
    Ok(SweepPoint { sites, value, trace, averages, exact: exact_means })
}

pub fn cmd_sweep(s: &Scenario, req: &SweepRequest, out: &Path) -> Result<Vec<PathBuf>> {
    if req.values.is_empty() {
        bail!("give at least one sweep value");
    }
    let sites = if req.sites.is_empty() { vec![s.sites()] } else { req.sites.clone() };
    let jobs: Vec<(usize, f64)> = sites.iter().flat_map(|&l| req.values.iter().map(move |&v| (l, v))).collect();
    let points: Vec<SweepPoint> =
        jobs.par_iter().map(|&(l, v)| sweep_point(s, req.axis, l, v, req.exact)).collect::<Result<_>>()?;

    let mut header: Vec<String> = ["sites", req.axis.name(), "steps", "final_t", "freezes", "mean_attempts", "final_E_dev", "final_var_dev"]
        .iter()
        .map(|x| x.to_string())
        .collect();
    for name in &s.observables {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
        if req.exact {
            header.push(format!("{name}_exact_mean"));
        }
    }
    let mut table = Table::create(
        out,
        "sweep.csv",
        &[
            "sweep.csv: one row per (system size, swept value)",
            "final_t in inverse energy units; final_*_dev: last sample minus initial value of the energy and variance densities",
            "<obs>_mean, <obs>_std: average and standard deviation over the trailing window [window_start*T, T]",
            "<obs>_exact_mean: exact evolution averaged over the same window, sampled every 0.25",
        ],
        &header,
    )?;
    for p in &points {
        let r = &p.trace.record;
        let last = r.steps.last().map_or(&r.initial, |st| &st.sample);
        let mut row = vec![
            p.sites.to_string(),
            num(p.value),
            r.steps.len().to_string(),
            num(r.final_time()),
            r.freeze_count().to_string(),
            num(r.mean_attempts()),
            num(last.energy_density - r.reference.energy_density),
            num(last.var_density - r.reference.var_density),
        ];
        for k in 0..r.observable_names.len() {
            let (m, sd) = p.averages.get(k).copied().unwrap_or((f64::NAN, f64::NAN));
            row.push(num(m));
            row.push(num(sd));
            if req.exact {
                row.push(num(p.exact.get(k).copied().unwrap_or(f64::NAN)));
            }
        }
        table.row(&row)?;
    }
    let sweep_meta = vec![
        ("sweep.axis".to_string(), req.axis.name().to_string()),
        ("sweep.values".to_string(), req.values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";")),
        ("sweep.sites".to_string(), sites.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";")),
    ];
    Ok(vec![table.finish()?, write_meta(out, "sweep", &scenario_json(s)?, &sweep_meta)?])
}

pub fn cmd_compare(s: &Scenario, dts: &[f64], steps: Option<usize>, out: &Path) -> Result<Vec<PathBuf>> {
    bail_if_noisy(s, "compare")?;
    if dts.iter().any(|&dt| !(dt > 0.0) || !dt.is_finite()) {
        bail!("fixed step sizes must be positive");
    }
    let budget = steps.or(s.budget.steps).context("compare needs a step budget (--steps or budget.steps)")?;
    let mut scenario = s.clone();
    scenario.budget.steps = Some(budget);
    scenario.budget.time = None;
    let resolved = scenario.resolve()?;
    let ada = execute(&scenario)?;
    let mut runs = vec![("ada".to_string(), None, ada)];
    for &dt in dts {
        runs.push(("fixed".to_string(), Some(dt), execute_fixed(&scenario, dt, budget)?));
    }

    let mut header: Vec<String> =
        ["method", "dt", "steps", "reached_t", "final_E_dev", "final_var_dev"].iter().map(|x| x.to_string()).collect();
    header.extend(s.observables.iter().map(|n| format!("max_err_{n}")));
    let mut table = Table::create(
        out,
        "compare.csv",
        &[
            "compare.csv: adaptive run and fixed-step baselines under the same step budget",
            "dt empty for the adaptive run; reached_t in inverse energy units",
            "max_err_<obs>: largest |trotterized - exact| over the run's recorded times, exact by Krylov propagation",
        ],
        &header,
    )?;
    for (method, dt, trace) in &runs {
        let r = &trace.record;
        let times = r.times();
        let exact: Vec<StateVector> = exact_trajectory(resolved.split.total(), &resolved.initial, &times, &KrylovConfig::default())?;
        let last = r.steps.last().map_or(&r.initial, |st| &st.sample);
        let mut row = vec![
            method.clone(),
            opt(*dt),
            r.steps.len().to_string(),
            num(r.final_time()),
            num(last.energy_density - r.reference.energy_density),
            num(last.var_density - r.reference.var_density),
        ];
        for (name, op) in &resolved.observables {
            let trotter = r.observable(name).unwrap_or_default();
            let mut err = 0.0f64;
            for (state, value) in exact.iter().zip(&trotter) {
                err = err.max((expectation(op, state)? - value).abs());
            }
            row.push(num(err));
        }
        table.row(&row)?;
    }
    let meta = vec![
        ("compare.dt".to_string(), dts.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";")),
        ("compare.steps".to_string(), budget.to_string()),
    ];
    Ok(vec![table.finish()?, write_meta(out, "compare", &scenario_json(&scenario)?, &meta)?])
}

pub fn cmd_ed(s: &Scenario, out: &Path) -> Result<Vec<PathBuf>> {
    bail_if_noisy(s, "ed")?;
    let resolved = s.resolve()?;
    let l = resolved.space.sites() as f64;
    let ed = dense_diagonalize(resolved.split.total())?;

    let mut spectrum = Table::create(
        out,
        "spectrum.csv",
        &["spectrum.csv: eigenvalues of H in ascending order", "energy in energy units; energy_density = energy / L"],
        &["index".into(), "energy".into(), "energy_density".into()],
    )?;
    for (k, &e) in ed.eigenvalues().iter().enumerate() {
        spectrum.row(&[k.to_string(), num(e), num(e / l)])?;
    }

    let mut distribution = Table::create(
        out,
        "distribution.csv",
        &["distribution.csv: energy distribution of the initial state", "probability = |<E|psi>|^2 for each eigenvalue"],
        &["energy".into(), "energy_density".into(), "probability".into()],
    )?;
    for (e, p) in energy_distribution(&ed, &resolved.initial)? {
        distribution.row(&[num(e), num(e / l), num(p)])?;
    }

    let mut curves = Table::create(
        out,
        "microcanonical.csv",
        &[
            "microcanonical.csv: eigenstate averages of each observable in an energy window",
            "energy_density in energy units per site; window half-width analysis.half_width_per_site * L",
        ],
        &["observable".into(), "energy_density".into(), "value".into()],
    )?;
    let mut meta = Vec::new();
    for (name, op) in &resolved.observables {
        let curve = MicrocanonicalCurve::new(&ed, op)?.with_window(s.analysis.half_width_per_site * l, DEFAULT_MIN_STATES)?;
        let (lo, hi) = curve.density_range();
        for k in 0..=100 {
            let e = lo + (hi - lo) * k as f64 / 100.0;
            if let Ok(v) = curve.value(e) {
                curves.row(&[name.clone(), num(e), num(v)])?;
            }
        }
        meta.push((format!("diagonal_ensemble.{name}"), num(diagonal_ensemble(&ed, &resolved.initial, op)?)));
    }
    let e0 = expectation(resolved.split.total(), &resolved.initial)?;
    meta.push(("initial.E_density".into(), num(e0 / l)));
    meta.push(("ed.dimension".into(), ed.dimension().to_string()));
    Ok(vec![spectrum.finish()?, distribution.finish()?, curves.finish()?, write_meta(out, "ed", &scenario_json(s)?, &meta)?])
}
