//! Dense matrix exponential, used as a reference for small systems.
//!
//! `exp` comes from nalgebra (scaling and squaring with Padé approximants),
//! so it shares no code with the Krylov propagator it is checked against.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::hilbert::StateVector;
use crate::{Error, Result};

pub const MAX_DENSE_DIMENSION: usize = 1024;

/// `e^{−itH}` for a dense Hermitian `H`.
pub fn expm(h: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    let dim = h.nrows();
    if dim > MAX_DENSE_DIMENSION {
        return Err(Error::DimensionCap {
            dimension: dim,
            cap: MAX_DENSE_DIMENSION,
        });
    }
    let a = h * Complex64::new(0.0, -t);
    Ok(a.exp())
}

pub fn expm_apply(h: &DMatrix<Complex64>, t: f64, psi: &StateVector) -> Result<StateVector> {
    if h.nrows() != psi.dimension() {
        return Err(Error::invalid("matrix", "dimension does not match the state"));
    }
    let u = expm(h, t)?;
    let v = DVector::from_column_slice(psi.amplitudes());
    let out = u * v;
    StateVector::new(psi.space().clone(), out.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_x_rotation() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let x = DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]);
        let t = 0.7;
        let u = expm(&x, t).unwrap();
        assert!((u[(0, 0)] - Complex64::new(t.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - Complex64::new(0.0, -t.sin())).norm() < 1e-14);
    }

    #[test]
    fn diagonal_phases() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-2.5, 0.0),
            Complex64::new(30.0, 0.0),
        ]));
        let u = expm(&h, 1.3).unwrap();
        for (k, e) in [1.0, -2.5, 30.0].into_iter().enumerate() {
            assert!((u[(k, k)] - Complex64::from_polar(1.0, -1.3 * e)).norm() < 1e-12);
        }
    }
}
