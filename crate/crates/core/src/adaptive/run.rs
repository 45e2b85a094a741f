//! Run drivers: the adaptive feedback loop and the fixed-step baseline.

use std::collections::HashMap;

use super::search::search;
use super::{Moments, SearchConfig, Slacks, ToleranceSet, Violations};
use crate::hilbert::StateVector;
use crate::operators::{expectation, moment, SparseOperator};
use crate::propagate::{trotter_step_with, KrylovConfig, TrotterSplit};
use crate::{Error, Result};

/// What a run needs from a propagator: advance a state, measure it.
pub trait Engine {
    type State: Clone;

    /// Number of matter sites `L` used for densities.
    fn sites(&self) -> usize;

    fn has_gauge(&self) -> bool;

    /// Called once before the search of every step.
    fn begin_step(&mut self) {}

    fn propagate(&mut self, state: &Self::State, dt: f64) -> Result<Self::State>;

    fn moments(&self, state: &Self::State, gauge: bool) -> Result<Moments>;

    fn expectation(&self, state: &Self::State, op: &SparseOperator) -> Result<f64>;

    /// Raw `⟨H^n⟩` of the target Hamiltonian.
    fn energy_moment(&self, state: &Self::State, n: u32) -> Result<f64>;

    /// `(𝓔, δ𝓔²)` of each member for ensemble engines; empty otherwise.
    fn member_moments(&self, _state: &Self::State) -> Result<Vec<(f64, f64)>> {
        Ok(Vec::new())
    }
}

/// Single state vector evolved by the Trotter step of one split.
#[derive(Clone, Debug)]
pub struct CleanEngine<'a> {
    pub split: &'a TrotterSplit,
    pub generators: Option<&'a [SparseOperator]>,
    pub krylov: KrylovConfig,
}

impl<'a> CleanEngine<'a> {
    pub fn new(split: &'a TrotterSplit, generators: Option<&'a [SparseOperator]>) -> Self {
        Self {
            split,
            generators,
            krylov: KrylovConfig::default(),
        }
    }
}

impl Engine for CleanEngine<'_> {
    type State = StateVector;

    fn sites(&self) -> usize {
        self.split.h_minus().space().sites()
    }

    fn has_gauge(&self) -> bool {
        self.generators.is_some()
    }

    fn propagate(&mut self, state: &StateVector, dt: f64) -> Result<StateVector> {
        trotter_step_with(self.split, dt, state, &self.krylov)
    }

    fn moments(&self, state: &StateVector, gauge: bool) -> Result<Moments> {
        let gens = if gauge { self.generators } else { None };
        Moments::measure(self.split.total(), state, gens)
    }

    fn expectation(&self, state: &StateVector, op: &SparseOperator) -> Result<f64> {
        expectation(op, state)
    }

    fn energy_moment(&self, state: &StateVector, n: u32) -> Result<f64> {
        moment(self.split.total(), state, n)
    }
}

/// Stop after `max_steps` accepted steps or once `t ≥ max_time`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Budget {
    pub max_steps: Option<usize>,
    pub max_time: Option<f64>,
}

impl Budget {
    pub fn steps(n: usize) -> Self {
        Self {
            max_steps: Some(n),
            max_time: None,
        }
    }

    pub fn time(t: f64) -> Self {
        Self {
            max_steps: None,
            max_time: Some(t),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_steps.is_none() && self.max_time.is_none() {
            return Err(Error::invalid("budget", "set max_steps, max_time or both"));
        }
        if let Some(t) = self.max_time {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid("budget", format!("max_time must be finite and ≥ 0, got {t}")));
            }
        }
        Ok(())
    }

    fn exhausted(&self, steps: usize, t: f64) -> bool {
        self.max_steps.is_some_and(|n| steps >= n) || self.max_time.is_some_and(|tm| t >= tm - 1e-12)
    }
}

/// Observables to record along a run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub observables: Vec<(String, SparseOperator)>,
    /// Orders `n` for which `⟨H^n⟩^{1/n}/L` is recorded.
    pub moment_orders: Vec<u32>,
    pub keep_states: bool,
}

/// Measurements at one recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub energy_density: f64,
    pub var_density: f64,
    /// `Σ_j |𝓖(j) − 𝓖₀(j)| / L` when generators are present.
    pub gauge_mean_dev: Option<f64>,
    /// `Σ_j |δ𝓖²(j) − δ𝓖₀²(j)| / L` when generators are present.
    pub gauge_var_dev: Option<f64>,
    pub observables: Vec<f64>,
    /// `⟨H^n⟩^{1/n}/L` for each requested order.
    pub moment_roots: Vec<f64>,
    /// Per-member `(𝓔, δ𝓔²)` for ensembles.
    pub members: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub dt: f64,
    pub attempts: usize,
    pub freeze: bool,
    /// Slacks of the accepted state under `tolerances`.
    pub slacks: Slacks,
    /// Tolerances in force when the step was accepted.
    pub tolerances: ToleranceSet,
    /// Tolerances multiplied after this step.
    pub inflated: Violations,
    pub sample: Sample,
}

#[derive(Clone, Debug)]
pub struct RunRecord<S = StateVector> {
    pub reference: Moments,
    pub initial: Sample,
    pub steps: Vec<StepRecord>,
    pub observable_names: Vec<String>,
    pub moment_orders: Vec<u32>,
    /// Initial state followed by every accepted state, if requested.
    pub states: Vec<S>,
    pub final_state: S,
}

impl<S> RunRecord<S> {
    /// Times of all samples, starting with 0.
    pub fn times(&self) -> Vec<f64> {
        self.samples().map(|s| s.t).collect()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|s| &s.sample))
    }

    pub fn final_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.sample.t)
    }

    /// Values of the named observable at every sample.
    pub fn observable(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.observable_names.iter().position(|n| n == name)?;
        Some(self.samples().map(|s| s.observables[k]).collect())
    }

    pub fn moment_root(&self, order: u32) -> Option<Vec<f64>> {
        let k = self.moment_orders.iter().position(|&n| n == order)?;
        Some(self.samples().map(|s| s.moment_roots[k]).collect())
    }

    pub fn freeze_count(&self) -> usize {
        self.steps.iter().filter(|s| s.freeze).count()
    }

    pub fn mean_attempts(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.attempts as f64).sum::<f64>() / self.steps.len() as f64
    }
}

fn sample<E: Engine>(
    engine: &E,
    state: &E::State,
    t: f64,
    reference: &Moments,
    opts: &RunOptions,
) -> Result<(Sample, Moments)> {
    let m = engine.moments(state, engine.has_gauge())?;
    let dev = m.deviations(reference);
    let observables = opts
        .observables
        .iter()
        .map(|(_, op)| engine.expectation(state, op))
        .collect::<Result<Vec<_>>>()?;
    let l = engine.sites() as f64;
    let moment_roots = opts
        .moment_orders
        .iter()
        .map(|&n| {
            let raw = engine.energy_moment(state, n)?;
            Ok(raw.signum() * raw.abs().powf(1.0 / n as f64) / l)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = Sample {
        t,
        energy_density: m.energy_density,
        var_density: m.var_density,
        gauge_mean_dev: dev.gauge_mean,
        gauge_var_dev: dev.gauge_var,
        observables,
        moment_roots,
        members: engine.member_moments(state)?,
    };
    Ok((s, m))
}

struct Candidate<S> {
    slacks: Slacks,
    state: Option<S>,
}

/// The adaptive loop: search the largest acceptable step, accept, advance.
///
/// The state of the accepted step is the one whose slacks were measured.
/// When the search result violates a constraint the largest evaluated step
/// satisfying all of them is taken instead. When there is none the run
/// freezes: it accepts `t_min` and multiplies every tolerance violated at
/// `t_min` by `soft_inflation`.
pub fn run_adaptive<E: Engine>(
    engine: &mut E,
    initial: E::State,
    tol: &ToleranceSet,
    cfg: &SearchConfig,
    budget: &Budget,
    opts: &RunOptions,
) -> Result<RunRecord<E::State>> {
    tol.validate()?;
    cfg.validate()?;
    budget.validate()?;
    if tol.gauge_constrained() && !engine.has_gauge() {
        return Err(Error::MissingGaugeGenerators);
    }
    let reference = engine.moments(&initial, engine.has_gauge())?;
    let (initial_sample, _) = sample(engine, &initial, 0.0, &reference, opts)?;
    let mut record = RunRecord {
        reference: reference.clone(),
        initial: initial_sample,
        steps: Vec::new(),
        observable_names: opts.observables.iter().map(|(n, _)| n.clone()).collect(),
        moment_orders: opts.moment_orders.clone(),
        states: if opts.keep_states { vec![initial.clone()] } else { Vec::new() },
        final_state: initial.clone(),
    };
    let mut state = initial;
    let mut t = 0.0;
    let mut current = *tol;

    while !budget.exhausted(record.steps.len(), t) {
        let step = record.steps.len();
        let time = t;
        let with_step = move |e: Error| Error::Step {
            step,
            time,
            source: Box::new(e),
        };
        engine.begin_step();
        let mut seen: HashMap<u64, Candidate<E::State>> = HashMap::new();
        let mut last: Option<u64> = None;
        let outcome = {
            let mut evaluate = |dt: f64| -> Result<Slacks> {
                let next = engine.propagate(&state, dt)?;
                let m = engine.moments(&next, current.gauge_constrained())?;
                let slacks = m.deviations(&reference).slacks(&current);
                if let Some(prev) = last.and_then(|k| seen.get_mut(&k)) {
                    if !prev.slacks.satisfied() {
                        prev.state = None;
                    }
                }
                seen.insert(
                    dt.to_bits(),
                    Candidate {
                        slacks,
                        state: Some(next),
                    },
                );
                last = Some(dt.to_bits());
                Ok(slacks)
            };
            search(&mut evaluate, cfg, current.d_e, current.d_var).map_err(with_step)?
        };

        let chosen = if outcome.freeze {
            None
        } else if seen.get(&outcome.dt.to_bits()).is_some_and(|c| c.slacks.satisfied()) {
            Some(outcome.dt)
        } else {
            seen.iter()
                .filter(|(_, c)| c.slacks.satisfied())
                .map(|(&k, _)| f64::from_bits(k))
                .filter(|&dt| dt > cfg.t_min)
                .fold(None, |best: Option<f64>, dt| Some(best.map_or(dt, |b| b.max(dt))))
        };
        let freeze = chosen.is_none();
        let dt = chosen.unwrap_or(cfg.t_min);
        let next = match seen.remove(&dt.to_bits()).and_then(|c| c.state) {
            Some(s) => s,
            None => engine.propagate(&state, dt).map_err(with_step)?,
        };
        t += dt;
        let (s, m) = sample(engine, &next, t, &reference, opts).map_err(with_step)?;
        let snapshot = current;
        let slacks = m.deviations(&reference).slacks(&snapshot);
        let inflated = if freeze {
            current.inflate(&slacks)
        } else {
            Violations::default()
        };
        record.steps.push(StepRecord {
            dt,
            attempts: outcome.attempts,
            freeze,
            slacks,
            tolerances: snapshot,
            inflated,
            sample: s,
        });
        if opts.keep_states {
            record.states.push(next.clone());
        }
        state = next;
    }
    record.final_state = state;
    Ok(record)
}

/// `n_steps` uniform steps of size `dt`; slacks are reported against `tol`.
pub fn run_fixed<E: Engine>(
    engine: &mut E,
    initial: E::State,
    dt: f64,
    n_steps: usize,
    tol: &ToleranceSet,
    opts: &RunOptions,
) -> Result<RunRecord<E::State>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    tol.validate()?;
    let reference = engine.moments(&initial, engine.has_gauge())?;
    let (initial_sample, _) = sample(engine, &initial, 0.0, &reference, opts)?;
    let mut record = RunRecord {
        reference: reference.clone(),
        initial: initial_sample,
        steps: Vec::with_capacity(n_steps),
        observable_names: opts.observables.iter().map(|(n, _)| n.clone()).collect(),
        moment_orders: opts.moment_orders.clone(),
        states: if opts.keep_states { vec![initial.clone()] } else { Vec::new() },
        final_state: initial.clone(),
    };
    let mut state = initial;
    let mut t = 0.0;
    for step in 0..n_steps {
        let time = t;
        let with_step = move |e: Error| Error::Step {
            step,
            time,
            source: Box::new(e),
        };
        engine.begin_step();
        let next = engine.propagate(&state, dt).map_err(with_step)?;
        t += dt;
        let (s, m) = sample(engine, &next, t, &reference, opts).map_err(with_step)?;
        record.steps.push(StepRecord {
            dt,
            attempts: 1,
            freeze: false,
            slacks: m.deviations(&reference).slacks(tol),
            tolerances: *tol,
            inflated: Violations::default(),
            sample: s,
        });
        if opts.keep_states {
            record.states.push(next.clone());
        }
        state = next;
    }
    record.final_state = state;
    Ok(record)
}

/// Adaptive run of a single state vector.
pub fn run_ada_trotter(
    split: &TrotterSplit,
    psi0: &StateVector,
    generators: Option<&[SparseOperator]>,
    tol: &ToleranceSet,
    cfg: &SearchConfig,
    budget: &Budget,
    opts: &RunOptions,
) -> Result<RunRecord> {
    psi0.ensure_normalized()?;
    let mut engine = CleanEngine::new(split, generators);
    run_adaptive(&mut engine, psi0.clone(), tol, cfg, budget, opts)
}

/// Fixed-step Trotter run of a single state vector.
pub fn run_fixed_trotter(
    split: &TrotterSplit,
    psi0: &StateVector,
    dt: f64,
    n_steps: usize,
    opts: &RunOptions,
) -> Result<RunRecord> {
    psi0.ensure_normalized()?;
    let mut engine = CleanEngine::new(split, None);
    run_fixed(&mut engine, psi0.clone(), dt, n_steps, &ToleranceSet::unbounded(), opts)
}
