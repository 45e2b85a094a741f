//! Time evolution: the symmetric Trotter step and exact propagators.

pub mod dense;
mod krylov;

pub use krylov::{krylov_expm_apply, krylov_expm_apply_vec, KrylovConfig};

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::hilbert::{apply_site_matrix, StateVector};
use crate::operators::SparseOperator;
use crate::{Error, Result};

/// The two parts of `H = H₋ + H₊` used by
/// `U_T(δt) = e^{−iδtH₋/2} e^{−iδtH₊} e^{−iδtH₋/2}`.
#[derive(Clone, Debug)]
pub struct TrotterSplit {
    h_minus: SparseOperator,
    h_plus: SparseOperator,
    total: OnceLock<SparseOperator>,
}

impl TrotterSplit {
    pub fn new(h_minus: SparseOperator, h_plus: SparseOperator) -> Result<Self> {
        h_minus.space().ensure_same(h_plus.space())?;
        Ok(Self {
            h_minus,
            h_plus,
            total: OnceLock::new(),
        })
    }

    pub fn h_minus(&self) -> &SparseOperator {
        &self.h_minus
    }

    pub fn h_plus(&self) -> &SparseOperator {
        &self.h_plus
    }

    /// `H₋ + H₊`, assembled on first use.
    pub fn total(&self) -> &SparseOperator {
        self.total
            .get_or_init(|| self.h_minus.add(&self.h_plus).expect("parts share a space"))
    }

    /// The split of `−H`, for stepping backwards in time.
    pub fn negated(&self) -> Self {
        Self {
            h_minus: self.h_minus.negated(),
            h_plus: self.h_plus.negated(),
            total: OnceLock::new(),
        }
    }
}

/// `e^{−iτA}` applied in place, using the exact fast path for diagonal and
/// x-field operators and Krylov otherwise.
pub fn apply_exponential(
    a: &SparseOperator,
    tau: f64,
    amps: &mut Vec<Complex64>,
    cfg: &KrylovConfig,
) -> Result<()> {
    if tau == 0.0 {
        return Ok(());
    }
    if let Some(diag) = a.diagonal_values() {
        for (amp, &e) in amps.iter_mut().zip(diag) {
            let (s, c) = (tau * e).sin_cos();
            *amp *= Complex64::new(c, -s);
        }
        return Ok(());
    }
    if let Some(fields) = a.x_fields() {
        for (site, &h) in fields.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let (s, c) = (tau * h).sin_cos();
            let m = [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ];
            apply_site_matrix(a.space(), amps, site, &m);
        }
        return Ok(());
    }
    *amps = krylov_expm_apply_vec(a, tau, amps, cfg)?;
    Ok(())
}

pub fn trotter_step(split: &TrotterSplit, dt: f64, psi: &StateVector) -> Result<StateVector> {
    trotter_step_with(split, dt, psi, &KrylovConfig::default())
}

pub fn trotter_step_with(
    split: &TrotterSplit,
    dt: f64,
    psi: &StateVector,
    cfg: &KrylovConfig,
) -> Result<StateVector> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("time step must be finite and ≥ 0, got {dt}")));
    }
    split.h_minus.space().ensure_same(psi.space())?;
    let mut amps = psi.amplitudes().to_vec();
    apply_exponential(&split.h_minus, dt / 2.0, &mut amps, cfg)?;
    apply_exponential(&split.h_plus, dt, &mut amps, cfg)?;
    apply_exponential(&split.h_minus, dt / 2.0, &mut amps, cfg)?;
    Ok(StateVector::from_parts(psi.space().clone(), amps))
}

/// `e^{−itH}ψ` for the full Hamiltonian, by Krylov projection.
pub fn exact_evolve(h: &SparseOperator, t: f64, psi: &StateVector, cfg: &KrylovConfig) -> Result<StateVector> {
    krylov_expm_apply(h, t, psi, cfg)
}

/// Exact states at each of the (ascending) `times`, reusing the previous
/// state as the starting point of the next interval.
pub fn exact_trajectory(
    h: &SparseOperator,
    psi: &StateVector,
    times: &[f64],
    cfg: &KrylovConfig,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(times.len());
    let mut current = psi.clone();
    let mut t_prev = 0.0;
    for &t in times {
        if t < t_prev {
            return Err(Error::invalid("times", "must be ascending and start at or after 0"));
        }
        current = krylov_expm_apply(h, t - t_prev, &current, cfg)?;
        t_prev = t;
        out.push(current.clone());
    }
    Ok(out)
}
