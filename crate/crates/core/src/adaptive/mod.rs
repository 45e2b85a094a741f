//! Adaptive step-size control.
//!
//! A run keeps the energy density `𝓔 = ⟨H⟩/L`, the variance density
//! `δ𝓔² = (⟨H²⟩ − ⟨H⟩²)/L` and, for gauge theories, the site-averaged Gauss
//! generator moments close to their initial values. Each constraint is a
//! slack `f = deviation − tolerance`; a candidate step is acceptable when all
//! slacks are negative.

mod run;
mod search;

pub use run::{
    run_adaptive, run_ada_trotter, run_fixed, run_fixed_trotter, Budget, CleanEngine, Engine, RunOptions,
    RunRecord, Sample, StepRecord,
};
pub use search::{
    bisection_search, search, sequential_search, CandidateEvaluator, Precision, SearchAlgorithm, SearchConfig,
    SearchOutcome,
};

use crate::hilbert::StateVector;
use crate::operators::{first_two_moments, SparseOperator};
use crate::{Error, Result};

/// Tolerances on the conserved moments. Any of them may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceSet {
    pub d_e: f64,
    pub d_var: f64,
    pub d_g: f64,
    pub d_gvar: f64,
    /// Factor applied to a violated tolerance when the search freezes.
    pub soft_inflation: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            d_e: f64::INFINITY,
            d_var: f64::INFINITY,
            d_g: f64::INFINITY,
            d_gvar: f64::INFINITY,
            soft_inflation: 1.3,
        }
    }
}

impl ToleranceSet {
    pub fn energy(d_e: f64, d_var: f64) -> Self {
        Self {
            d_e,
            d_var,
            ..Self::default()
        }
    }

    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d_E", self.d_e), ("d_var", self.d_var), ("d_G", self.d_g), ("d_Gvar", self.d_gvar)] {
            if !(v > 0.0) {
                return Err(Error::invalid("tolerances", format!("{name} must be positive or infinite, got {v}")));
            }
        }
        if !(self.soft_inflation >= 1.0) || !self.soft_inflation.is_finite() {
            return Err(Error::invalid(
                "soft_inflation",
                format!("must be finite and ≥ 1, got {}", self.soft_inflation),
            ));
        }
        Ok(())
    }

    pub fn gauge_constrained(&self) -> bool {
        self.d_g.is_finite() || self.d_gvar.is_finite()
    }

    /// Multiplies every tolerance whose slack is non-negative.
    pub(crate) fn inflate(&mut self, slacks: &Slacks) -> Violations {
        let v = slacks.violations();
        let k = self.soft_inflation;
        if v.energy {
            self.d_e *= k;
        }
        if v.variance {
            self.d_var *= k;
        }
        if v.gauge_mean {
            self.d_g *= k;
        }
        if v.gauge_var {
            self.d_gvar *= k;
        }
        v
    }
}

/// Per-site Gauss generator expectation values and variances.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Energy and variance densities plus optional gauge moments of a state.
/// Measured once on the initial state, these are the reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub energy_density: f64,
    pub var_density: f64,
    pub gauge: Option<GaugeMoments>,
}

pub type ReferenceMoments = Moments;

impl Moments {
    pub fn measure(
        h: &SparseOperator,
        psi: &StateVector,
        generators: Option<&[SparseOperator]>,
    ) -> Result<Self> {
        let l = psi.space().sites() as f64;
        let (m1, m2) = first_two_moments(h, psi)?;
        let gauge = match generators {
            Some(gs) => {
                let mut mean = Vec::with_capacity(gs.len());
                let mut var = Vec::with_capacity(gs.len());
                for g in gs {
                    let (g1, g2) = first_two_moments(g, psi)?;
                    mean.push(g1);
                    var.push(g2 - g1 * g1);
                }
                Some(GaugeMoments { mean, var })
            }
            None => None,
        };
        Ok(Self {
            energy_density: m1 / l,
            var_density: (m2 - m1 * m1) / l,
            gauge,
        })
    }

    /// Absolute deviations from `reference`.
    pub fn deviations(&self, reference: &Moments) -> Deviations {
        let gauge = match (&self.gauge, &reference.gauge) {
            (Some(g), Some(r)) => {
                let sites = g.mean.len() as f64;
                let dm = g.mean.iter().zip(&r.mean).map(|(a, b)| (a - b).abs()).sum::<f64>() / sites;
                let dv = g.var.iter().zip(&r.var).map(|(a, b)| (a - b).abs()).sum::<f64>() / sites;
                Some((dm, dv))
            }
            _ => None,
        };
        Deviations {
            energy: (self.energy_density - reference.energy_density).abs(),
            variance: (self.var_density - reference.var_density).abs(),
            gauge_mean: gauge.map(|g| g.0),
            gauge_var: gauge.map(|g| g.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviations {
    pub energy: f64,
    pub variance: f64,
    pub gauge_mean: Option<f64>,
    pub gauge_var: Option<f64>,
}

impl Deviations {
    pub fn slacks(&self, tol: &ToleranceSet) -> Slacks {
        Slacks {
            energy: self.energy - tol.d_e,
            variance: self.variance - tol.d_var,
            gauge_mean: self.gauge_mean.map(|d| d - tol.d_g),
            gauge_var: self.gauge_var.map(|d| d - tol.d_gvar),
        }
    }
}

/// Signed constraint values; negative means satisfied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slacks {
    pub energy: f64,
    pub variance: f64,
    pub gauge_mean: Option<f64>,
    pub gauge_var: Option<f64>,
}

impl Slacks {
    pub fn new(energy: f64, variance: f64) -> Self {
        Self {
            energy,
            variance,
            gauge_mean: None,
            gauge_var: None,
        }
    }

    pub fn satisfied(&self) -> bool {
        !self.violations().any()
    }

    pub fn violations(&self) -> Violations {
        let bad = |f: f64| !(f < 0.0);
        Violations {
            energy: bad(self.energy),
            variance: bad(self.variance),
            gauge_mean: self.gauge_mean.is_some_and(bad),
            gauge_var: self.gauge_var.is_some_and(bad),
        }
    }

    /// Largest slack, the most violated constraint.
    pub fn worst(&self) -> f64 {
        [Some(self.energy), Some(self.variance), self.gauge_mean, self.gauge_var]
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub energy: bool,
    pub variance: bool,
    pub gauge_mean: bool,
    pub gauge_var: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.energy || self.variance || self.gauge_mean || self.gauge_var
    }
}

/// Slacks of a candidate state. Gauge slacks are computed only for finite
/// gauge tolerances.
pub fn constraint_values(
    candidate: &StateVector,
    reference: &ReferenceMoments,
    tol: &ToleranceSet,
    h: &SparseOperator,
    generators: Option<&[SparseOperator]>,
) -> Result<Slacks> {
    let generators = if tol.gauge_constrained() {
        Some(generators.ok_or(Error::MissingGaugeGenerators)?)
    } else {
        None
    };
    let m = Moments::measure(h, candidate, generators)?;
    Ok(m.deviations(reference).slacks(tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{product_state, BasisLabel};
    use crate::operators::{build_ising, build_qlm, IsingParams, QlmModel, QlmParams};

    #[test]
    fn initial_state_slacks_are_minus_tolerances() {
        let p = IsingParams::nearest_neighbor(-1.0, -1.7, 0.5, 6);
        let split = build_ising(&p).unwrap();
        let psi = product_state(&p.space().unwrap(), &BasisLabel::all_down(6))
            .unwrap()
            .global_y_rotation(std::f64::consts::PI / 8.0);
        let reference = Moments::measure(split.total(), &psi, None).unwrap();
        let tol = ToleranceSet::energy(0.03, 1.0);
        let s = constraint_values(&psi, &reference, &tol, split.total(), None).unwrap();
        assert_eq!(s.energy, -0.03);
        assert_eq!(s.variance, -1.0);
        assert!(s.gauge_mean.is_none());
        let inf = constraint_values(&psi, &reference, &ToleranceSet::unbounded(), split.total(), None).unwrap();
        assert_eq!(inf.energy, f64::NEG_INFINITY);
        assert!(inf.satisfied());
    }

    #[test]
    fn gauge_tolerance_requires_generators() {
        let p = IsingParams::nearest_neighbor(1.0, 1.0, 0.0, 4);
        let split = build_ising(&p).unwrap();
        let psi = product_state(&p.space().unwrap(), &BasisLabel::all_down(4)).unwrap();
        let reference = Moments::measure(split.total(), &psi, None).unwrap();
        let tol = ToleranceSet {
            d_g: 0.01,
            ..ToleranceSet::energy(0.1, 0.1)
        };
        assert!(matches!(
            constraint_values(&psi, &reference, &tol, split.total(), None),
            Err(Error::MissingGaugeGenerators)
        ));
    }

    #[test]
    fn gauge_slacks_on_vacuum() {
        let qp = QlmParams {
            j: 0.5,
            mu: 0.5,
            k: 0.5,
            two_s: 2,
            lambda: 0.3,
            sites: 4,
        };
        let model = build_qlm(&qp).unwrap();
        let psi = product_state(&qp.space().unwrap(), &QlmModel::vacuum_label(&qp)).unwrap();
        let gens = Some(model.generators.as_slice());
        let reference = Moments::measure(model.split.total(), &psi, gens).unwrap();
        let tol = ToleranceSet {
            d_g: 0.001,
            d_gvar: 0.003,
            ..ToleranceSet::energy(0.1, 0.2)
        };
        let s = constraint_values(&psi, &reference, &tol, model.split.total(), gens).unwrap();
        assert_eq!(s.gauge_mean, Some(-0.001));
        assert_eq!(s.gauge_var, Some(-0.003));
    }

    #[test]
    fn inflation_touches_only_violated() {
        let mut tol = ToleranceSet {
            d_g: 0.001,
            d_gvar: 0.003,
            ..ToleranceSet::energy(0.1, 0.2)
        };
        let slacks = Slacks {
            energy: -0.05,
            variance: 0.01,
            gauge_mean: Some(0.0),
            gauge_var: Some(-1e-4),
        };
        let v = tol.inflate(&slacks);
        assert!(!v.energy && v.variance && v.gauge_mean && !v.gauge_var);
        assert_eq!(tol.d_e, 0.1);
        assert!((tol.d_var - 0.26).abs() < 1e-15);
        assert!((tol.d_g - 0.0013).abs() < 1e-15);
        assert_eq!(tol.d_gvar, 0.003);
    }

    #[test]
    fn tolerance_validation() {
        assert!(ToleranceSet::energy(-0.1, 1.0).validate().is_err());
        assert!(ToleranceSet::energy(0.1, f64::NAN).validate().is_err());
        assert!(ToleranceSet::energy(0.1, f64::INFINITY).validate().is_ok());
        let bad = ToleranceSet {
            soft_inflation: 0.9,
            ..ToleranceSet::energy(0.1, 0.1)
        };
        assert!(bad.validate().is_err());
    }
}
