use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::hilbert::{dot, norm_sqr, StateVector};
use crate::operators::SparseOperator;
use crate::{Error, Result};

/// Error estimates below this (relative to the vector norm) are roundoff.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Lanczos settings for `e^{−itA}ψ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovConfig {
    /// Largest Krylov subspace dimension `m`.
    pub max_dim: usize,
    /// Bound on the estimated error of the full propagation.
    pub tol: f64,
    /// Relative size of a residual treated as an invariant subspace.
    pub breakdown_eps: f64,
    /// Cap on the number of accepted and rejected substeps.
    pub max_substeps: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_dim: 30,
            tol: 1e-10,
            breakdown_eps: 1e-12,
            max_substeps: 100_000,
        }
    }
}

impl KrylovConfig {
    fn validate(&self) -> Result<()> {
        if self.max_dim < 2 {
            return Err(Error::invalid("max_dim", format!("must be ≥ 2, got {}", self.max_dim)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if !(self.breakdown_eps > 0.0) {
            return Err(Error::invalid("breakdown_eps", "must be positive"));
        }
        Ok(())
    }
}

struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector; zero on breakdown.
    residual: f64,
}

fn lanczos(a: &SparseOperator, start: &[Complex64], start_norm: f64, cfg: &KrylovConfig) -> Lanczos {
    let m = cfg.max_dim.min(start.len());
    let inv = 1.0 / start_norm;
    let mut basis = vec![start.iter().map(|x| x * inv).collect::<Vec<_>>()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut scale = 0f64;
    let mut w = vec![Complex64::new(0.0, 0.0); start.len()];
    for j in 0..m {
        a.apply_into(&basis[j], &mut w);
        let aj = dot(&basis[j], &w).re;
        alpha.push(aj);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * aj;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b;
            }
        }
        for v in &basis {
            let c = dot(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= vi * c;
            }
        }
        let b = norm_sqr(&w).sqrt();
        scale = scale.max(aj.abs()).max(b);
        if b <= cfg.breakdown_eps * scale || b == 0.0 {
            return Lanczos {
                basis,
                alpha,
                beta,
                residual: 0.0,
            };
        }
        if j + 1 == m {
            return Lanczos {
                basis,
                alpha,
                beta,
                residual: b,
            };
        }
        beta.push(b);
        let inv = 1.0 / b;
        basis.push(w.iter().map(|x| x * inv).collect());
    }
    unreachable!("loop returns on its last iteration")
}

/// `e^{−itA}ψ` via Lanczos projection with substepping.
pub fn krylov_expm_apply(a: &SparseOperator, t: f64, psi: &StateVector, cfg: &KrylovConfig) -> Result<StateVector> {
    a.space().ensure_same(psi.space())?;
    let amps = krylov_expm_apply_vec(a, t, psi.amplitudes(), cfg)?;
    StateVector::new(psi.space().clone(), amps)
}

pub fn krylov_expm_apply_vec(a: &SparseOperator, t: f64, x: &[Complex64], cfg: &KrylovConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    if !t.is_finite() {
        return Err(Error::invalid("t", format!("must be finite, got {t}")));
    }
    if x.len() != a.dimension() {
        return Err(Error::invalid("vector", "length does not match the operator"));
    }
    let mut v = x.to_vec();
    if t == 0.0 {
        return Ok(v);
    }
    let sign = t.signum();
    let total = t.abs();
    let mut remaining = total;
    let mut tau = total;
    let mut substeps = 0usize;
    while remaining > 0.0 {
        let beta0 = norm_sqr(&v).sqrt();
        if beta0 == 0.0 {
            return Ok(v);
        }
        let lz = lanczos(a, &v, beta0, cfg);
        let k = lz.alpha.len();
        let mut tri = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            tri[(i, i)] = lz.alpha[i];
            if i + 1 < k {
                tri[(i, i + 1)] = lz.beta[i];
                tri[(i + 1, i)] = lz.beta[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let q = &eig.eigenvectors;
        let coefficients = |tau: f64| -> Vec<Complex64> {
            let phases: Vec<Complex64> = (0..k)
                .map(|l| Complex64::from_polar(q[(0, l)], -sign * tau * eig.eigenvalues[l]))
                .collect();
            (0..k)
                .map(|j| (0..k).map(|l| phases[l] * q[(j, l)]).sum())
                .collect()
        };
        let mut y;
        let mut halved = false;
        loop {
            tau = tau.min(remaining);
            y = coefficients(tau);
            let err = lz.residual * y[k - 1].norm() * beta0;
            if err <= cfg.tol * tau / total || err <= ROUNDOFF * beta0 {
                break;
            }
            substeps += 1;
            halved = true;
            tau *= 0.5;
            if substeps > cfg.max_substeps || tau <= total * 1e-14 {
                return Err(Error::KrylovNoConvergence { residual: err });
            }
        }
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (coef, b) in y.iter().zip(&lz.basis) {
            let c = coef * beta0;
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += c * bi;
            }
        }
        remaining = if tau >= remaining { 0.0 } else { remaining - tau };
        substeps += 1;
        if !halved {
            tau *= 2.0;
        }
        if substeps > cfg.max_substeps && remaining > 0.0 {
            return Err(Error::KrylovNoConvergence { residual: f64::NAN });
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Boundary, SpaceDescriptor};
    use crate::operators::magnetization_x;

    #[test]
    fn zero_time_and_zero_vector() {
        let space = SpaceDescriptor::spin_chain(3, Boundary::Open).unwrap();
        let a = magnetization_x(&space);
        let psi = StateVector::basis(space.clone(), 3).unwrap();
        let cfg = KrylovConfig::default();
        assert_eq!(krylov_expm_apply(&a, 0.0, &psi, &cfg).unwrap(), psi);
        let zero = StateVector::zeros(space);
        assert_eq!(krylov_expm_apply(&a, 1.0, &zero, &cfg).unwrap(), zero);
    }

    #[test]
    fn x_field_rotation_matches_closed_form() {
        let space = SpaceDescriptor::spin_chain(4, Boundary::Open).unwrap();
        let a = magnetization_x(&space).scaled(4.0);
        let psi = StateVector::basis(space.clone(), 0).unwrap();
        let t = 2.3;
        let out = krylov_expm_apply(&a, t, &psi, &KrylovConfig::default()).unwrap();
        // each spin: cos t |↓⟩ − i sin t |↑⟩
        let (s, c) = t.sin_cos();
        let expected = Complex64::new(c.powi(4), 0.0);
        assert!((out.amplitudes()[0] - expected).norm() < 1e-10);
        let all_up = Complex64::new(s.powi(4), 0.0);
        assert!((out.amplitudes()[15] - all_up).norm() < 1e-10);
    }

    #[test]
    fn negative_time_inverts() {
        let space = SpaceDescriptor::spin_chain(5, Boundary::Open).unwrap();
        let a = magnetization_x(&space).add(&crate::operators::magnetization_y(&space)).unwrap();
        let psi = StateVector::basis(space, 7).unwrap();
        let cfg = KrylovConfig::default();
        let fwd = krylov_expm_apply(&a, 3.0, &psi, &cfg).unwrap();
        let back = krylov_expm_apply(&a, -3.0, &fwd, &cfg).unwrap();
        assert!(back.distance(&psi).unwrap() < 1e-9);
    }

    #[test]
    fn small_subspace_substeps() {
        let space = SpaceDescriptor::spin_chain(6, Boundary::Open).unwrap();
        let a = magnetization_x(&space).scaled(20.0).add(&crate::operators::magnetization_z(&space)).unwrap();
        let psi = StateVector::basis(space, 0).unwrap();
        let small = KrylovConfig {
            max_dim: 6,
            ..KrylovConfig::default()
        };
        let reference = krylov_expm_apply(&a, 5.0, &psi, &KrylovConfig::default()).unwrap();
        let out = krylov_expm_apply(&a, 5.0, &psi, &small).unwrap();
        assert!(out.distance(&reference).unwrap() < 1e-9);
    }

    #[test]
    fn substep_budget_exhaustion() {
        let space = SpaceDescriptor::spin_chain(6, Boundary::Open).unwrap();
        let a = magnetization_x(&space).scaled(100.0).add(&crate::operators::magnetization_z(&space)).unwrap();
        let psi = StateVector::basis(space, 0).unwrap();
        let tight = KrylovConfig {
            max_dim: 3,
            max_substeps: 5,
            ..KrylovConfig::default()
        };
        assert!(matches!(
            krylov_expm_apply(&a, 50.0, &psi, &tight),
            Err(Error::KrylovNoConvergence { .. })
        ));
    }

    #[test]
    fn invalid_config() {
        let space = SpaceDescriptor::spin_chain(2, Boundary::Open).unwrap();
        let a = magnetization_x(&space);
        let psi = StateVector::basis(space, 0).unwrap();
        let bad = KrylovConfig {
            max_dim: 1,
            ..KrylovConfig::default()
        };
        assert!(krylov_expm_apply(&a, 1.0, &psi, &bad).is_err());
    }
}
