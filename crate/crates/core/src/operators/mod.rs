//! Sparse Hermitian operators, model builders and measurements.

mod ising;
mod local;
mod qlm;

pub use ising::{build_ising, ising_terms, Disorder, IsingParams, IsingTerms};
pub use local::{LocalOp, ProductTerm};
pub use qlm::{build_qlm, gauss_generators, QlmModel, QlmParams};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::hilbert::{SpaceDescriptor, StateVector};
use crate::{Error, Result};

/// Entries smaller than this are dropped during assembly.
pub const DROP_TOLERANCE: f64 = 1e-14;

const PARALLEL_ROWS: usize = 1 << 13;

/// Shape information used by propagators to pick an exact fast path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    Diagonal,
    /// `Σ_j h_j σ^x_j` over the matter sites.
    XField,
    Generic,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Diagonal(Vec<f64>),
    XField(Vec<f64>),
    Generic,
}

/// Hermitian operator in compressed sparse-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    space: SpaceDescriptor,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
    shape: Shape,
}

impl SparseOperator {
    /// Assembles an operator from `(row, col, value)` triplets. Coincident
    /// entries are summed; the result must be Hermitian.
    pub fn from_triplets(space: SpaceDescriptor, triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        let op = Self::assemble(space, triplets)?;
        op.check_hermitian()?;
        Ok(op.detect_diagonal())
    }

    pub fn from_terms(space: SpaceDescriptor, terms: &[ProductTerm]) -> Result<Self> {
        let dim = space.dimension();
        let mut triplets = Vec::new();
        for term in terms {
            term.validate(&space)?;
            for col in 0..dim {
                if let Some((row, amp)) = term.act(&space, col) {
                    triplets.push((row, col, amp));
                }
            }
        }
        Self::from_triplets(space, triplets)
    }

    pub fn from_dense(space: SpaceDescriptor, m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = space.dimension();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::invalid(
                "matrix",
                format!("{}x{} does not match dimension {dim}", m.nrows(), m.ncols()),
            ));
        }
        let mut triplets = Vec::new();
        for r in 0..dim {
            for c in 0..dim {
                triplets.push((r, c, m[(r, c)]));
            }
        }
        Self::from_triplets(space, triplets)
    }

    pub fn diagonal(space: SpaceDescriptor, values: Vec<f64>) -> Result<Self> {
        let dim = space.dimension();
        if values.len() != dim {
            return Err(Error::invalid(
                "diagonal",
                format!("length {} does not match dimension {dim}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("diagonal", format!("non-finite entry {v}")));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, &v) in values.iter().enumerate() {
            if v.abs() >= DROP_TOLERANCE {
                cols.push(i as u32);
                vals.push(Complex64::new(v, 0.0));
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            space,
            row_ptr,
            cols,
            vals,
            shape: Shape::Diagonal(values),
        })
    }

    /// `Σ_j fields[j] σ^x_j` over the matter sites.
    pub fn x_field(space: SpaceDescriptor, fields: Vec<f64>) -> Result<Self> {
        if fields.len() != space.sites() {
            return Err(Error::invalid(
                "fields",
                format!("expected {} site fields, got {}", space.sites(), fields.len()),
            ));
        }
        let dim = space.dimension();
        let strides: Vec<usize> = (0..space.sites()).map(|j| space.matter_stride(j)).collect();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in 0..dim {
            let mut entries: Vec<(u32, Complex64)> = fields
                .iter()
                .zip(&strides)
                .filter(|(h, _)| h.abs() >= DROP_TOLERANCE)
                .map(|(&h, &s)| {
                    let col = if (row / s) % 2 == 1 { row - s } else { row + s };
                    (col as u32, Complex64::new(h, 0.0))
                })
                .collect();
            entries.sort_unstable_by_key(|e| e.0);
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            space,
            row_ptr,
            cols,
            vals,
            shape: Shape::XField(fields),
        })
    }

    pub fn identity(space: SpaceDescriptor) -> Self {
        let dim = space.dimension();
        Self::diagonal(space, vec![1.0; dim]).expect("identity is well formed")
    }

    pub fn zero(space: SpaceDescriptor) -> Self {
        let dim = space.dimension();
        Self::diagonal(space, vec![0.0; dim]).expect("zero is well formed")
    }

    fn assemble(space: SpaceDescriptor, mut triplets: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        let dim = space.dimension();
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::invalid(
                "triplets",
                format!("entry ({r}, {c}) outside dimension {dim}"),
            ));
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::invalid("triplets", format!("non-finite entry at ({r}, {c})")));
            }
            if v.norm() >= DROP_TOLERANCE {
                cols.push(c as u32);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            space,
            row_ptr,
            cols,
            vals,
            shape: Shape::Generic,
        })
    }

    fn detect_diagonal(mut self) -> Self {
        if matches!(self.shape, Shape::Generic) && self.is_diagonal_pattern() {
            let values = self.diagonal_part();
            self.shape = Shape::Diagonal(values);
        }
        self
    }

    fn is_diagonal_pattern(&self) -> bool {
        (0..self.dimension()).all(|r| self.row(r).0.iter().all(|&c| c as usize == r))
    }

    fn diagonal_part(&self) -> Vec<f64> {
        (0..self.dimension()).map(|r| self.get(r, r).re).collect()
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        for r in 0..self.dimension() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let t = self.get(c as usize, r);
                if (t.conj() - v).norm() > 1e-12 * scale {
                    return Err(Error::NotHermitian(format!(
                        "entry ({r}, {c}) = {v} but ({c}, {r}) = {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn structure(&self) -> Structure {
        match self.shape {
            Shape::Diagonal(_) => Structure::Diagonal,
            Shape::XField(_) => Structure::XField,
            Shape::Generic => Structure::Generic,
        }
    }

    /// Diagonal entries when the operator is diagonal.
    pub fn diagonal_values(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::Diagonal(v) => Some(v),
            _ => None,
        }
    }

    /// Per-site transverse fields when the operator is an x-field.
    pub fn x_fields(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::XField(h) => Some(h),
            _ => None,
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[Complex64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dimension()).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            Shape::Diagonal(v) => Shape::Diagonal(v.iter().map(|x| x * factor).collect()),
            Shape::XField(h) => Shape::XField(h.iter().map(|x| x * factor).collect()),
            Shape::Generic => Shape::Generic,
        };
        if factor == 0.0 {
            return Self::zero(self.space.clone());
        }
        Self {
            space: self.space.clone(),
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| v * factor).collect(),
            shape,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `self + other`, keeping a fast-path structure when both share it.
    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.space.ensure_same(&other.space)?;
        match (&self.shape, &other.shape) {
            (Shape::Diagonal(a), Shape::Diagonal(b)) => {
                return Self::diagonal(self.space.clone(), a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (Shape::XField(a), Shape::XField(b)) => {
                return Self::x_field(self.space.clone(), a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            _ => {}
        }
        if other.nnz() == 0 {
            return Ok(self.clone());
        }
        if self.nnz() == 0 {
            return Ok(other.clone());
        }
        let triplets = self.triplets().chain(other.triplets()).collect();
        Ok(Self::assemble(self.space.clone(), triplets)?.detect_diagonal())
    }

    /// `y = A x` on raw amplitude slices.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dimension());
        debug_assert_eq!(y.len(), self.dimension());
        let row_dot = |r: usize| -> Complex64 {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(|(&c, v)| v * x[c as usize]).sum()
        };
        if self.dimension() >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row_dot(r));
        }
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.space.ensure_same(psi.space())?;
        Ok(StateVector::from_parts(self.space.clone(), self.apply_vec(psi.amplitudes())))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = self.dimension();
        let mut m = DMatrix::zeros(dim, dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Frobenius norm of the commutator `[self, other]`.
    pub fn commutator_norm(&self, other: &SparseOperator) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        let dim = self.dimension();
        let mut acc = vec![Complex64::new(0.0, 0.0); dim];
        let mut touched = Vec::new();
        let mut total = 0.0;
        for r in 0..dim {
            let mut add = |a: &SparseOperator, b: &SparseOperator, sign: f64| {
                let (ac, av) = a.row(r);
                for (&k, &x) in ac.iter().zip(av) {
                    let (bc, bv) = b.row(k as usize);
                    for (&c, &y) in bc.iter().zip(bv) {
                        let c = c as usize;
                        if acc[c] == Complex64::new(0.0, 0.0) {
                            touched.push(c);
                        }
                        acc[c] += sign * x * y;
                    }
                }
            };
            add(self, other, 1.0);
            add(other, self, -1.0);
            for &c in &touched {
                total += acc[c].norm_sqr();
                acc[c] = Complex64::new(0.0, 0.0);
            }
            touched.clear();
        }
        Ok(total.sqrt())
    }
}

/// `(⟨A⟩, ⟨A²⟩)` from a single application of `A`.
pub fn first_two_moments(a: &SparseOperator, psi: &StateVector) -> Result<(f64, f64)> {
    a.space().ensure_same(psi.space())?;
    psi.ensure_normalized()?;
    Ok(moments_unchecked(a, psi.amplitudes()))
}

pub(crate) fn moments_unchecked(a: &SparseOperator, x: &[Complex64]) -> (f64, f64) {
    if let Some(d) = a.diagonal_values() {
        return x.iter().zip(d).fold((0.0, 0.0), |(m1, m2), (amp, &e)| {
            let p = amp.norm_sqr();
            (m1 + p * e, m2 + p * e * e)
        });
    }
    let y = a.apply_vec(x);
    let m1 = crate::hilbert::dot(x, &y).re;
    let m2 = crate::hilbert::norm_sqr(&y);
    (m1, m2)
}

pub fn expectation(a: &SparseOperator, psi: &StateVector) -> Result<f64> {
    Ok(first_two_moments(a, psi)?.0)
}

/// `⟨A²⟩ − ⟨A⟩²`.
pub fn variance(a: &SparseOperator, psi: &StateVector) -> Result<f64> {
    let (m1, m2) = first_two_moments(a, psi)?;
    Ok(m2 - m1 * m1)
}

/// Raw moment `⟨A^n⟩`, using `⌈n/2⌉` applications.
pub fn moment(a: &SparseOperator, psi: &StateVector, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "moment order must be at least 1"));
    }
    a.space().ensure_same(psi.space())?;
    psi.ensure_normalized()?;
    let half = n / 2;
    let mut v = psi.amplitudes().to_vec();
    for _ in 0..half {
        v = a.apply_vec(&v);
    }
    if n % 2 == 0 {
        Ok(crate::hilbert::norm_sqr(&v))
    } else {
        let w = a.apply_vec(&v);
        Ok(crate::hilbert::dot(&v, &w).re)
    }
}

/// `⟨A^n⟩^{1/n}`, taking the real root with the sign of the moment.
pub fn moment_root(a: &SparseOperator, psi: &StateVector, n: u32) -> Result<f64> {
    let m = moment(a, psi, n)?;
    Ok(m.signum() * m.abs().powf(1.0 / n as f64))
}

/// `Σ_j σ^z_j / L` as a diagonal operator.
pub fn magnetization_z(space: &SpaceDescriptor) -> SparseOperator {
    let l = space.sites();
    let values = (0..space.dimension())
        .map(|i| (0..l).map(|j| if space.is_up(i, j) { 1.0 } else { -1.0 }).sum::<f64>() / l as f64)
        .collect();
    SparseOperator::diagonal(space.clone(), values).expect("well formed")
}

/// `Σ_j σ^x_j / L`.
pub fn magnetization_x(space: &SpaceDescriptor) -> SparseOperator {
    let l = space.sites();
    SparseOperator::x_field(space.clone(), vec![1.0 / l as f64; l]).expect("well formed")
}

/// `Σ_j σ^y_j / L`.
pub fn magnetization_y(space: &SpaceDescriptor) -> SparseOperator {
    let l = space.sites();
    let terms: Vec<ProductTerm> = (0..l)
        .flat_map(|j| {
            [
                ProductTerm::new(Complex64::new(0.0, -1.0 / l as f64), vec![LocalOp::SigmaPlus(j)]),
                ProductTerm::new(Complex64::new(0.0, 1.0 / l as f64), vec![LocalOp::SigmaMinus(j)]),
            ]
        })
        .collect();
    SparseOperator::from_terms(space.clone(), &terms).expect("well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{product_state, BasisLabel, Boundary};

    fn chain(l: usize) -> SpaceDescriptor {
        SpaceDescriptor::spin_chain(l, Boundary::Periodic).unwrap()
    }

    #[test]
    fn identity_and_diagonal_apply() {
        let space = chain(3);
        let psi = StateVector::basis(space.clone(), 5).unwrap();
        assert_eq!(SparseOperator::identity(space.clone()).apply(&psi).unwrap(), psi);
        let d = SparseOperator::diagonal(space.clone(), (0..8).map(|i| i as f64).collect()).unwrap();
        let out = d.apply(&psi).unwrap();
        assert_eq!(out.amplitudes()[5], Complex64::new(5.0, 0.0));
        assert_eq!(d.structure(), Structure::Diagonal);
    }

    #[test]
    fn rejects_non_hermitian() {
        let space = chain(2);
        let t = vec![(0, 1, Complex64::new(1.0, 0.0))];
        assert!(matches!(SparseOperator::from_triplets(space, t), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn duplicates_are_summed() {
        let space = chain(2);
        let one = Complex64::new(0.5, 0.0);
        let op = SparseOperator::from_triplets(space, vec![(1, 1, one), (1, 1, one), (2, 2, Complex64::new(1e-16, 0.0))])
            .unwrap();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(1, 1), Complex64::new(1.0, 0.0));
        assert_eq!(op.structure(), Structure::Diagonal);
    }

    #[test]
    fn magnetization_of_down_state() {
        let space = chain(6);
        let psi = product_state(&space, &BasisLabel::all_down(6)).unwrap();
        let total_z = magnetization_z(&space).scaled(6.0);
        assert!((expectation(&total_z, &psi).unwrap() + 6.0).abs() < 1e-14);
        assert!(variance(&total_z, &psi).unwrap().abs() < 1e-14);
        assert!(expectation(&magnetization_x(&space), &psi).unwrap().abs() < 1e-14);
        assert!(expectation(&magnetization_y(&space), &psi).unwrap().abs() < 1e-14);
    }

    #[test]
    fn magnetization_y_sign() {
        let space = chain(3);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = crate::hilbert::product_spinor(&space, Complex64::new(h, 0.0), Complex64::new(0.0, h), &[]).unwrap();
        assert!((expectation(&magnetization_y(&space), &psi).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_normalized_state_is_rejected() {
        let space = chain(2);
        let mut psi = StateVector::basis(space.clone(), 0).unwrap();
        psi.amplitudes_mut()[0] = Complex64::new(2.0, 0.0);
        assert!(matches!(
            expectation(&SparseOperator::identity(space), &psi),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn moments_match_dense() {
        let space = chain(3);
        let xs = magnetization_x(&space).scaled(3.0);
        let op = xs.add(&magnetization_z(&space)).unwrap();
        let psi = StateVector::basis(space.clone(), 2).unwrap().global_y_rotation(0.3);
        let m = op.to_dense();
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut w = v.clone();
        for n in 1..=5u32 {
            w = &m * w;
            let dense = v.dotc(&w).re;
            assert!((moment(&op, &psi, n).unwrap() - dense).abs() < 1e-10, "n = {n}");
        }
        let (m1, m2) = first_two_moments(&op, &psi).unwrap();
        assert!((moment(&op, &psi, 2).unwrap() - m2).abs() < 1e-12);
        assert!((variance(&op, &psi).unwrap() + m1 * m1 - m2).abs() < 1e-12);
    }

    #[test]
    fn commutator_of_commuting_parts() {
        let space = chain(4);
        let z = magnetization_z(&space);
        let x = magnetization_x(&space);
        assert_eq!(z.commutator_norm(&z).unwrap(), 0.0);
        let dz = z.to_dense();
        let dx = x.to_dense();
        let dense = (&dz * &dx - &dx * &dz).norm();
        assert!((z.commutator_norm(&x).unwrap() - dense).abs() < 1e-12);
    }

    #[test]
    fn add_keeps_fast_paths() {
        let space = chain(3);
        let x = magnetization_x(&space);
        assert_eq!(x.add(&x).unwrap().structure(), Structure::XField);
        let z = magnetization_z(&space);
        assert_eq!(z.add(&z).unwrap().structure(), Structure::Diagonal);
        let sum = z.add(&x).unwrap();
        assert_eq!(sum.structure(), Structure::Generic);
        assert!((sum.to_dense() - z.to_dense() - x.to_dense()).norm() < 1e-14);
    }
}
