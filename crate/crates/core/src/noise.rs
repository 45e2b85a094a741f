//! Noisy Trotter steps emulated by ensembles of stochastic trajectories.
//!
//! Every trajectory draws fresh couplings for every site and every Trotter
//! step, `J_j = J + δJ_j`, `h^z_j = h_z + δh^z_j`, `h^x_j = h_x + δh^x_j`,
//! with each offset uniform in `γ[−|c|, |c|]` for the clean value `c`. The
//! adaptive controller sees only ensemble averages of the energy moments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adaptive::{run_adaptive, Budget, Engine, Moments, RunOptions, RunRecord, SearchConfig, ToleranceSet};
use crate::hilbert::{SpaceDescriptor, StateVector};
use crate::operators::{expectation, first_two_moments, ising_terms, moment, IsingParams, IsingTerms, SparseOperator};
use crate::propagate::{trotter_step_with, KrylovConfig, TrotterSplit};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Relative strength `γ` of the coupling noise.
    pub gamma: f64,
    /// Number of trajectories `s_max`.
    pub trajectories: usize,
    pub seed: u64,
    /// Reuse one noise draw for all candidates of a step instead of redrawing
    /// per candidate.
    pub reuse_noise_per_step: bool,
}

impl NoiseParams {
    pub fn new(gamma: f64, trajectories: usize, seed: u64) -> Self {
        Self {
            gamma,
            trajectories,
            seed,
            reuse_noise_per_step: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("must be finite and ≥ 0, got {}", self.gamma)));
        }
        if self.trajectories == 0 {
            return Err(Error::invalid("trajectories", "need at least one trajectory"));
        }
        Ok(())
    }
}

fn jitter<R: Rng>(value: f64, gamma: f64, rng: &mut R) -> f64 {
    value + gamma * value.abs() * (2.0 * rng.random::<f64>() - 1.0)
}

/// One random draw of all couplings. Bonds are drawn first, then the
/// longitudinal and transverse fields, each in ascending site order.
pub fn sample_step_terms<R: Rng>(base: &IsingTerms, gamma: f64, rng: &mut R) -> IsingTerms {
    IsingTerms {
        bonds: base.bonds.iter().map(|&(i, j, c)| (i, j, jitter(c, gamma, rng))).collect(),
        h_z: base.h_z.iter().map(|&h| jitter(h, gamma, rng)).collect(),
        h_x: base.h_x.iter().map(|&h| jitter(h, gamma, rng)).collect(),
    }
}

pub fn sample_step_hamiltonians<R: Rng>(base: &IsingParams, gamma: f64, rng: &mut R) -> Result<TrotterSplit> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma", format!("must be ≥ 0, got {gamma}")));
    }
    let space = base.space()?;
    sample_step_terms(&ising_terms(base)?, gamma, rng).split(&space)
}

/// `(Ē, δĒ²)`: the mean over trajectories of the energy density and of the
/// per-trajectory variance density.
pub fn ensemble_moments(states: &[StateVector], h: &SparseOperator) -> Result<(f64, f64)> {
    if states.is_empty() {
        return Err(Error::invalid("ensemble", "no trajectories"));
    }
    let l = h.space().sites() as f64;
    let s = states.len() as f64;
    let mut e = 0.0;
    let mut v = 0.0;
    for psi in states {
        let (m1, m2) = first_two_moments(h, psi)?;
        e += m1;
        v += m2 - m1 * m1;
    }
    Ok((e / (s * l), v / (s * l)))
}

/// Ensemble of trajectories sharing one clock.
pub struct NoisyEngine {
    space: SpaceDescriptor,
    base: IsingTerms,
    hamiltonian: SparseOperator,
    gamma: f64,
    reuse: bool,
    rngs: Vec<ChaCha8Rng>,
    step_start: Vec<ChaCha8Rng>,
    pub krylov: KrylovConfig,
}

impl NoisyEngine {
    pub fn new(base: &IsingParams, noise: &NoiseParams) -> Result<Self> {
        noise.validate()?;
        let space = base.space()?;
        let terms = ising_terms(base)?;
        let hamiltonian = terms.split(&space)?.total().clone();
        let rngs: Vec<ChaCha8Rng> = (0..noise.trajectories)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
                rng.set_stream(s as u64);
                rng
            })
            .collect();
        Ok(Self {
            space,
            base: terms,
            hamiltonian,
            gamma: noise.gamma,
            reuse: noise.reuse_noise_per_step,
            step_start: rngs.clone(),
            rngs,
            krylov: KrylovConfig::default(),
        })
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    /// `s_max` copies of `psi`.
    pub fn initial_ensemble(&self, psi: &StateVector) -> Result<Vec<StateVector>> {
        self.space.ensure_same(psi.space())?;
        psi.ensure_normalized()?;
        Ok(vec![psi.clone(); self.rngs.len()])
    }
}

impl Engine for NoisyEngine {
    type State = Vec<StateVector>;

    fn sites(&self) -> usize {
        self.space.sites()
    }

    fn has_gauge(&self) -> bool {
        false
    }

    fn begin_step(&mut self) {
        if self.reuse {
            self.step_start = self.rngs.clone();
        }
    }

    fn propagate(&mut self, state: &Vec<StateVector>, dt: f64) -> Result<Vec<StateVector>> {
        if state.len() != self.rngs.len() {
            return Err(Error::invalid("ensemble", "size does not match the trajectory count"));
        }
        if self.reuse {
            self.rngs = self.step_start.clone();
        }
        let (base, gamma, space, krylov) = (&self.base, self.gamma, &self.space, &self.krylov);
        self.rngs
            .par_iter_mut()
            .zip(state.par_iter())
            .map(|(rng, psi)| {
                let split = sample_step_terms(base, gamma, rng).split(space)?;
                trotter_step_with(&split, dt, psi, krylov)
            })
            .collect()
    }

    fn moments(&self, state: &Vec<StateVector>, _gauge: bool) -> Result<Moments> {
        let (e, v) = ensemble_moments(state, &self.hamiltonian)?;
        Ok(Moments {
            energy_density: e,
            var_density: v,
            gauge: None,
        })
    }

    fn expectation(&self, state: &Vec<StateVector>, op: &SparseOperator) -> Result<f64> {
        let sum = state.iter().map(|psi| expectation(op, psi)).sum::<Result<f64>>()?;
        Ok(sum / state.len() as f64)
    }

    fn energy_moment(&self, state: &Vec<StateVector>, n: u32) -> Result<f64> {
        let sum = state.iter().map(|psi| moment(&self.hamiltonian, psi, n)).sum::<Result<f64>>()?;
        Ok(sum / state.len() as f64)
    }

    fn member_moments(&self, state: &Vec<StateVector>) -> Result<Vec<(f64, f64)>> {
        let l = self.space.sites() as f64;
        state
            .iter()
            .map(|psi| {
                let (m1, m2) = first_two_moments(&self.hamiltonian, psi)?;
                Ok((m1 / l, (m2 - m1 * m1) / l))
            })
            .collect()
    }
}

/// Adaptive run whose step is chosen from ensemble-averaged slacks.
pub fn run_noisy_ada_trotter(
    base: &IsingParams,
    noise: &NoiseParams,
    psi0: &StateVector,
    tol: &ToleranceSet,
    cfg: &SearchConfig,
    budget: &Budget,
    opts: &RunOptions,
) -> Result<RunRecord<Vec<StateVector>>> {
    let mut engine = NoisyEngine::new(base, noise)?;
    let initial = engine.initial_ensemble(psi0)?;
    run_adaptive(&mut engine, initial, tol, cfg, budget, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{product_state, BasisLabel, Boundary};
    use crate::operators::build_ising;
    use num_complex::Complex64;

    #[test]
    fn zero_gamma_reproduces_clean_split() {
        let p = IsingParams::nearest_neighbor(1.0, -1.7, 0.5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noisy = sample_step_hamiltonians(&p, 0.0, &mut rng).unwrap();
        let clean = build_ising(&p).unwrap();
        assert_eq!(noisy.h_minus(), clean.h_minus());
        assert_eq!(noisy.h_plus(), clean.h_plus());
    }

    #[test]
    fn samples_stay_in_range() {
        let p = IsingParams::nearest_neighbor(1.0, -1.7, 0.5, 10);
        let base = ising_terms(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut count = 0;
        while count < 10_000 {
            let t = sample_step_terms(&base, 0.2, &mut rng);
            for &(_, _, c) in &t.bonds {
                assert!((0.8..=1.2).contains(&c));
            }
            for &h in &t.h_z {
                assert!((0.4..=0.6).contains(&h));
            }
            for &h in &t.h_x {
                assert!((-2.04..=-1.36).contains(&h));
            }
            count += t.bonds.len() + t.h_z.len() + t.h_x.len();
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = IsingParams::nearest_neighbor(1.0, 1.0, 0.3, 6);
        let a = sample_step_hamiltonians(&p, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = sample_step_hamiltonians(&p, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.h_minus(), b.h_minus());
        assert_eq!(a.h_plus(), b.h_plus());
    }

    #[test]
    fn ensemble_moment_formulas() {
        let space = SpaceDescriptor::spin_chain(2, Boundary::Open).unwrap();
        let h = SparseOperator::diagonal(space.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = StateVector::basis(space.clone(), 0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[1] = Complex64::new(r, 0.0);
        amps[3] = Complex64::new(0.0, r);
        let b = StateVector::new(space, amps).unwrap();
        // a: ⟨H⟩ = 1, var 0; b: ⟨H⟩ = 3, ⟨H²⟩ = 10, var 1. L = 2, s = 2
        let (e, v) = ensemble_moments(&[a.clone(), b], &h).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        assert!((v - 0.25).abs() < 1e-15);
        let (e1, v1) = ensemble_moments(&[a.clone(), a.clone(), a], &h).unwrap();
        assert_eq!((e1, v1), (0.5, 0.0));
        assert!(ensemble_moments(&[], &h).is_err());
    }

    #[test]
    fn reuse_gives_identical_candidates() {
        let p = IsingParams::nearest_neighbor(1.0, -1.7, 0.5, 4);
        let noise = NoiseParams {
            reuse_noise_per_step: true,
            ..NoiseParams::new(0.3, 2, 5)
        };
        let mut engine = NoisyEngine::new(&p, &noise).unwrap();
        let psi = product_state(&p.space().unwrap(), &BasisLabel::all_down(4)).unwrap();
        let ens = engine.initial_ensemble(&psi).unwrap();
        engine.begin_step();
        let x = engine.propagate(&ens, 0.2).unwrap();
        let y = engine.propagate(&ens, 0.2).unwrap();
        assert_eq!(x, y);
        let mut fresh = NoisyEngine::new(&p, &NoiseParams::new(0.3, 2, 5)).unwrap();
        fresh.begin_step();
        let u = fresh.propagate(&ens, 0.2).unwrap();
        let w = fresh.propagate(&ens, 0.2).unwrap();
        assert_ne!(u, w);
        assert_ne!(u[0], u[1]);
    }

    #[test]
    fn invalid_noise() {
        let p = IsingParams::nearest_neighbor(1.0, 1.0, 0.3, 4);
        assert!(NoisyEngine::new(&p, &NoiseParams::new(-0.1, 2, 0)).is_err());
        assert!(NoisyEngine::new(&p, &NoiseParams::new(0.1, 0, 0)).is_err());
    }
}
