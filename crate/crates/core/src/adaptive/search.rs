//! Step-size searches over `[t_min, t_max]`.

use std::collections::HashMap;

use super::Slacks;
use crate::{Error, Result};

/// Produces the constraint slacks of a trial step `dt` from the current state.
pub trait CandidateEvaluator {
    fn evaluate(&mut self, dt: f64) -> Result<Slacks>;
}

impl<F: FnMut(f64) -> Result<Slacks>> CandidateEvaluator for F {
    fn evaluate(&mut self, dt: f64) -> Result<Slacks> {
        self(dt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchAlgorithm {
    /// Walk down from `t_max` in steps of `resolution`.
    Sequential,
    /// Alternate interval halving on the variance and energy slacks.
    Bisection,
}

/// Bisection precision on the slack values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Precision {
    /// `p = d / divisor` for each tolerance `d` currently in force.
    Relative(f64),
    Absolute { energy: f64, variance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub algorithm: SearchAlgorithm,
    pub t_min: f64,
    pub t_max: f64,
    /// Sequential step `δτ`.
    pub resolution: f64,
    pub precision: Precision,
    /// Cap on halvings per bisection round (`M_max`).
    pub max_inner: usize,
    /// Cap on bisection rounds (`R_max`).
    pub max_rounds: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: SearchAlgorithm::Bisection,
            t_min: 0.01,
            t_max: 0.5,
            resolution: 0.001,
            precision: Precision::Relative(10.0),
            max_inner: 15,
            max_rounds: 8,
        }
    }
}

impl SearchConfig {
    pub fn sequential(t_min: f64, t_max: f64, resolution: f64) -> Self {
        Self {
            algorithm: SearchAlgorithm::Sequential,
            t_min,
            t_max,
            resolution,
            ..Self::default()
        }
    }

    pub fn bisection(t_min: f64, t_max: f64) -> Self {
        Self {
            algorithm: SearchAlgorithm::Bisection,
            t_min,
            t_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0) || !(self.t_min < self.t_max) || !self.t_max.is_finite() {
            return Err(Error::invalid(
                "window",
                format!("need 0 < t_min < t_max, got [{}, {}]", self.t_min, self.t_max),
            ));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::invalid("resolution", format!("must be positive, got {}", self.resolution)));
        }
        match self.precision {
            Precision::Relative(d) if !(d > 0.0) => {
                return Err(Error::invalid("precision", format!("divisor must be positive, got {d}")))
            }
            Precision::Absolute { energy, variance } if !(energy > 0.0 && variance > 0.0) => {
                return Err(Error::invalid("precision", "absolute precisions must be positive"))
            }
            _ => {}
        }
        if self.max_inner == 0 || self.max_rounds == 0 {
            return Err(Error::invalid("max_inner", "iteration caps must be at least 1"));
        }
        Ok(())
    }

    /// `N_max = (t_max − t_min)/δτ`, rounded to the nearest integer.
    pub fn sequential_candidates(&self) -> usize {
        (((self.t_max - self.t_min) / self.resolution).round() as usize).max(1)
    }

    /// Time resolution below which a bisection result counts as `t_min`.
    pub fn bisection_resolution(&self) -> f64 {
        (self.t_max - self.t_min) / 2f64.powi(self.max_inner.min(60) as i32)
    }

    /// `(p_E, p_var)` for the given tolerances.
    pub fn precisions(&self, d_e: f64, d_var: f64) -> (f64, f64) {
        match self.precision {
            Precision::Relative(div) => (d_e / div, d_var / div),
            Precision::Absolute { energy, variance } => (energy, variance),
        }
    }
}

/// Result of one search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOutcome {
    pub dt: f64,
    /// Number of distinct candidate evaluations.
    pub attempts: usize,
    /// No acceptable step above `t_min` was found.
    pub freeze: bool,
}

/// Evaluations cached by the exact bit pattern of `dt`.
struct Cache<'a, E: ?Sized> {
    eval: &'a mut E,
    seen: HashMap<u64, Slacks>,
    budget: usize,
}

impl<'a, E: CandidateEvaluator + ?Sized> Cache<'a, E> {
    fn new(eval: &'a mut E, budget: usize) -> Self {
        Self {
            eval,
            seen: HashMap::new(),
            budget,
        }
    }

    fn get(&mut self, dt: f64) -> Result<Option<Slacks>> {
        if let Some(s) = self.seen.get(&dt.to_bits()) {
            return Ok(Some(*s));
        }
        if self.seen.len() >= self.budget {
            return Ok(None);
        }
        let s = self.eval.evaluate(dt)?;
        self.seen.insert(dt.to_bits(), s);
        Ok(Some(s))
    }

    fn attempts(&self) -> usize {
        self.seen.len()
    }
}

/// Largest `t_max − n·δτ` (for `n < N_max`) whose slacks are all negative;
/// `t_min` with `freeze` when there is none.
pub fn sequential_search<E: CandidateEvaluator + ?Sized>(eval: &mut E, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut attempts = 0;
    for n in 0..cfg.sequential_candidates() {
        let dt = cfg.t_max - n as f64 * cfg.resolution;
        if dt <= cfg.t_min {
            break;
        }
        attempts += 1;
        if eval.evaluate(dt)?.satisfied() {
            return Ok(SearchOutcome {
                dt,
                attempts,
                freeze: false,
            });
        }
    }
    Ok(SearchOutcome {
        dt: cfg.t_min,
        attempts,
        freeze: true,
    })
}

/// Bisection on the variance (odd rounds) and energy (even rounds) slacks
/// with precisions `p_E`, `p_var`.
///
/// A round ends when its slack lands in `(−p, 0)`; the other constraint is
/// then checked at that point and the search stops when both hold. When a
/// round starts from a lower bracket end that violates its constraint, that
/// end is moved back to `t_min`. The slack at the original `t_min` is taken
/// to be negative without evaluating it.
pub fn bisection_search<E: CandidateEvaluator + ?Sized>(
    eval: &mut E,
    cfg: &SearchConfig,
    p_energy: f64,
    p_variance: f64,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let budget = cfg.max_rounds.saturating_mul(cfg.max_inner);
    let mut cache = Cache::new(eval, budget);
    let pick = |s: &Slacks, round: usize| if round % 2 == 0 { s.energy } else { s.variance };
    let mut lo = cfg.t_min;
    let mut hi = cfg.t_max;
    let mut mid = cfg.t_max;

    'rounds: for round in 1..=cfg.max_rounds {
        let p = if round % 2 == 0 { p_energy } else { p_variance };
        if round != 1 {
            match cache.get(mid)? {
                Some(s) if pick(&s, round) < 0.0 => break,
                Some(_) => {}
                None => break,
            }
        }
        let mut f_lo = if lo == cfg.t_min {
            -1.0
        } else {
            match cache.get(lo)? {
                Some(s) => pick(&s, round),
                None => break,
            }
        };
        if f_lo >= 0.0 {
            lo = cfg.t_min;
            f_lo = -1.0;
        }
        for _ in 0..cfg.max_inner {
            mid = 0.5 * (lo + hi);
            let f = match cache.get(mid)? {
                Some(s) => pick(&s, round),
                None => break 'rounds,
            };
            if f < 0.0 && f > -p {
                hi = mid;
                break;
            }
            if (f < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f;
            } else {
                hi = mid;
            }
        }
    }

    Ok(SearchOutcome {
        dt: mid,
        attempts: cache.attempts(),
        freeze: mid <= cfg.t_min + cfg.bisection_resolution(),
    })
}

/// Dispatches on `cfg.algorithm`; bisection precisions derive from the
/// tolerances `d_e`, `d_var`.
pub fn search<E: CandidateEvaluator + ?Sized>(
    eval: &mut E,
    cfg: &SearchConfig,
    d_e: f64,
    d_var: f64,
) -> Result<SearchOutcome> {
    match cfg.algorithm {
        SearchAlgorithm::Sequential => sequential_search(eval, cfg),
        SearchAlgorithm::Bisection => {
            let (pe, pv) = cfg.precisions(d_e, d_var);
            bisection_search(eval, cfg, pe, pv)
        }
    }
}
