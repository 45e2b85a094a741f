//! Exact diagonalization and long-time analysis of small systems.
//!
//! With eigenpairs `H|α⟩ = E_α|α⟩` and overlaps `c_α = ⟨α|ψ⟩` this module
//! evaluates diagonal-ensemble averages `Σ|c_α|² O_αα`, microcanonical
//! curves `O(𝓔)` over energy windows, their finite-difference derivatives and
//! the resulting prediction for the long-time bias of an adaptive run.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::hilbert::{dot, product_state, BasisLabel, SpaceDescriptor, StateVector};
use crate::operators::{build_ising, first_two_moments, IsingParams, SparseOperator};
use crate::{Error, Result};

/// Largest dimension accepted by [`dense_diagonalize`].
pub const MAX_ED_DIMENSION: usize = 4096;

/// Default microcanonical half-width per site, in energy units.
pub const DEFAULT_WINDOW_PER_SITE: f64 = 0.05;

/// Fewest eigenstates a microcanonical window is widened to hold.
pub const DEFAULT_MIN_STATES: usize = 20;

#[derive(Clone, Debug)]
enum Vectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Eigenvalues in ascending order with eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    space: SpaceDescriptor,
    eigenvalues: Vec<f64>,
    vectors: Vectors,
}

/// Full diagonalization. Real symmetric operators take a real solver.
pub fn dense_diagonalize(a: &SparseOperator) -> Result<EigenDecomposition> {
    let n = a.dimension();
    if n > MAX_ED_DIMENSION {
        return Err(Error::DimensionCap {
            dimension: n,
            cap: MAX_ED_DIMENSION,
        });
    }
    let real = a.triplets().all(|(_, _, v)| v.im == 0.0);
    let (values, vectors) = if real {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (r, c, v) in a.triplets() {
            m[(r, c)] = v.re;
        }
        let eig = SymmetricEigen::new(m);
        (eig.eigenvalues.as_slice().to_vec(), Vectors::Real(eig.eigenvectors))
    } else {
        let eig = SymmetricEigen::new(a.to_dense());
        (eig.eigenvalues.as_slice().to_vec(), Vectors::Complex(eig.eigenvectors))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let vectors = match vectors {
        Vectors::Real(v) => Vectors::Real(v.select_columns(&order)),
        Vectors::Complex(v) => Vectors::Complex(v.select_columns(&order)),
    };
    Ok(EigenDecomposition {
        space: a.space().clone(),
        eigenvalues,
        vectors,
    })
}

impl EigenDecomposition {
    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn column(&self, alpha: usize) -> Vec<Complex64> {
        match &self.vectors {
            Vectors::Real(v) => v.column(alpha).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Vectors::Complex(v) => v.column(alpha).iter().copied().collect(),
        }
    }

    pub fn eigenvector(&self, alpha: usize) -> Result<StateVector> {
        if alpha >= self.dimension() {
            return Err(Error::invalid("alpha", format!("{alpha} out of range")));
        }
        Ok(StateVector::from_parts(self.space.clone(), self.column(alpha)))
    }

    /// `c_α = ⟨α|ψ⟩`.
    pub fn overlaps(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        self.space.ensure_same(psi.space())?;
        let x = psi.amplitudes();
        Ok(match &self.vectors {
            Vectors::Real(v) => (0..self.dimension())
                .into_par_iter()
                .map(|a| v.column(a).iter().zip(x).map(|(&q, z)| z * q).sum())
                .collect(),
            Vectors::Complex(v) => (0..self.dimension())
                .into_par_iter()
                .map(|a| v.column(a).iter().zip(x).map(|(q, z)| q.conj() * z).sum())
                .collect(),
        })
    }

    /// `Σ_α c_α |α⟩`.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> Result<StateVector> {
        if coefficients.len() != self.dimension() {
            return Err(Error::invalid("coefficients", "length does not match the dimension"));
        }
        let n = self.dimension();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (a, &c) in coefficients.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            match &self.vectors {
                Vectors::Real(v) => out.iter_mut().zip(v.column(a).iter()).for_each(|(o, &q)| *o += c * q),
                Vectors::Complex(v) => out.iter_mut().zip(v.column(a).iter()).for_each(|(o, &q)| *o += c * q),
            }
        }
        Ok(StateVector::from_parts(self.space.clone(), out))
    }

    /// Eigenstate expectation values `O_αα`.
    pub fn diagonal_elements(&self, o: &SparseOperator) -> Result<Vec<f64>> {
        self.space.ensure_same(o.space())?;
        Ok((0..self.dimension())
            .into_par_iter()
            .map(|a| {
                let v = self.column(a);
                dot(&v, &o.apply_vec(&v)).re
            })
            .collect())
    }

    /// Index ranges of (numerically) degenerate eigenvalues.
    fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let e = &self.eigenvalues;
        let scale = e.iter().fold(1f64, |m, x| m.max(x.abs()));
        let tol = 1e-10 * scale;
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..=e.len() {
            if i == e.len() || e[i] - e[i - 1] > tol {
                blocks.push(start..i);
                start = i;
            }
        }
        blocks
    }
}

/// Infinite-time average of `⟨O⟩_t` under `e^{−iHt}`. Degenerate
/// eigenspaces are handled by projecting `ψ` onto each of them.
pub fn diagonal_ensemble(ed: &EigenDecomposition, psi: &StateVector, o: &SparseOperator) -> Result<f64> {
    ed.space.ensure_same(o.space())?;
    let c = ed.overlaps(psi)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut total = 0.0;
    for block in ed.degenerate_blocks() {
        if block.len() == 1 {
            let a = block.start;
            if c[a].norm_sqr() == 0.0 {
                continue;
            }
            let v = ed.column(a);
            total += c[a].norm_sqr() * dot(&v, &o.apply_vec(&v)).re;
        } else {
            let mut coef = vec![zero; ed.dimension()];
            for a in block {
                coef[a] = c[a];
            }
            let projected = ed.synthesize(&coef)?;
            let x = projected.amplitudes();
            total += dot(x, &o.apply_vec(x)).re;
        }
    }
    Ok(total)
}

/// Mean of `O_αα` over eigenstates with `|E_α − energy| ≤ half_width`.
pub fn microcanonical(ed: &EigenDecomposition, o: &SparseOperator, energy: f64, half_width: f64) -> Result<f64> {
    let values = ed.diagonal_elements(o)?;
    let e = ed.eigenvalues();
    let lo = e.partition_point(|&x| x < energy - half_width);
    let hi = e.partition_point(|&x| x <= energy + half_width);
    if hi <= lo {
        return Err(Error::EmptyWindow(format!("no eigenvalue in [{}, {}]", energy - half_width, energy + half_width)));
    }
    Ok(values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
}

/// First three derivatives of a microcanonical curve in energy density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivatives {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

/// `O(𝓔)` as a window average of eigenstate expectation values.
///
/// A window holds the eigenstates within `half_width` (total energy) of its
/// center; if that is fewer than `min_states`, the `min_states` eigenvalues
/// nearest to the center are used instead.
#[derive(Clone, Debug)]
pub struct MicrocanonicalCurve {
    energies: Vec<f64>,
    values: Vec<f64>,
    sites: usize,
    half_width: f64,
    min_states: usize,
}

impl MicrocanonicalCurve {
    pub fn new(ed: &EigenDecomposition, o: &SparseOperator) -> Result<Self> {
        let values = ed.diagonal_elements(o)?;
        Self::from_samples(ed.eigenvalues().to_vec(), values, ed.space().sites())
    }

    /// Curve over arbitrary `(E_α, O_αα)` samples, e.g. from a synthetic model.
    pub fn from_samples(energies: Vec<f64>, values: Vec<f64>, sites: usize) -> Result<Self> {
        if energies.is_empty() || energies.len() != values.len() {
            return Err(Error::invalid("samples", "need equally many energies and values, at least one"));
        }
        if sites == 0 {
            return Err(Error::invalid("sites", "must be positive"));
        }
        let mut order: Vec<usize> = (0..energies.len()).collect();
        order.sort_by(|&i, &j| energies[i].total_cmp(&energies[j]));
        Ok(Self {
            energies: order.iter().map(|&i| energies[i]).collect(),
            values: order.iter().map(|&i| values[i]).collect(),
            sites,
            half_width: DEFAULT_WINDOW_PER_SITE * sites as f64,
            min_states: DEFAULT_MIN_STATES,
        })
    }

    pub fn with_window(mut self, half_width: f64, min_states: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("half_width", format!("must be positive, got {half_width}")));
        }
        self.half_width = half_width;
        self.min_states = min_states.max(1);
        Ok(self)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Energy-density interval covered by the spectrum.
    pub fn density_range(&self) -> (f64, f64) {
        let l = self.sites as f64;
        (self.energies[0] / l, self.energies[self.energies.len() - 1] / l)
    }

    fn check_inside(&self, density: f64) -> Result<()> {
        let (lo, hi) = self.density_range();
        if density.is_finite() && density >= lo && density <= hi {
            Ok(())
        } else {
            Err(Error::StencilOutsideSpectrum { density })
        }
    }

    /// `O(𝓔)` at energy density `density`.
    pub fn value(&self, density: f64) -> Result<f64> {
        self.check_inside(density)?;
        let e = density * self.sites as f64;
        let n = self.energies.len();
        let mut lo = self.energies.partition_point(|&x| x < e - self.half_width);
        let mut hi = self.energies.partition_point(|&x| x <= e + self.half_width);
        let want = self.min_states.min(n);
        while hi - lo < want {
            let grow_left = lo > 0 && (hi == n || e - self.energies[lo - 1] <= self.energies[hi] - e);
            if grow_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        Ok(self.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
    }

    /// Central differences with the default spacing `2ΔE/L`.
    pub fn derivatives(&self, density: f64) -> Result<Derivatives> {
        self.derivatives_with_spacing(density, 2.0 * self.half_width / self.sites as f64)
    }

    /// Central differences with density spacing `h`. `third` is NaN when its
    /// wider stencil leaves the spectrum.
    pub fn derivatives_with_spacing(&self, density: f64, h: f64) -> Result<Derivatives> {
        if !(h > 0.0) {
            return Err(Error::invalid("spacing", format!("must be positive, got {h}")));
        }
        let f0 = self.value(density)?;
        let fp = self.value(density + h)?;
        let fm = self.value(density - h)?;
        let third = match (self.value(density + 2.0 * h), self.value(density - 2.0 * h)) {
            (Ok(fpp), Ok(fmm)) => (fpp - 2.0 * fp + 2.0 * fm - fmm) / (2.0 * h * h * h),
            _ => f64::NAN,
        };
        Ok(Derivatives {
            first: (fp - fm) / (2.0 * h),
            second: (fp - 2.0 * f0 + fm) / (h * h),
            third,
        })
    }
}

/// Predicted long-time bias `O_ada − O_diag` of an adaptive run that drifted
/// by `d_e` in energy density and `d_var` in variance density, starting from
/// variance density `var_density`:
///
/// `d_e O′ + (d_e²/2 + d_var/2L) O″ + (δ𝓔² + d_var) d_e O‴ / 2L`.
pub fn error_expansion_prediction(
    curve: &MicrocanonicalCurve,
    density: f64,
    d_e: f64,
    d_var: f64,
    var_density: f64,
) -> Result<f64> {
    if !d_e.is_finite() || !d_var.is_finite() || !var_density.is_finite() {
        return Err(Error::invalid("tolerances", "the expansion needs finite deviations"));
    }
    if d_e == 0.0 && d_var == 0.0 {
        return Ok(0.0);
    }
    let l = curve.sites as f64;
    let d = curve.derivatives(density)?;
    let mut out = d_e * d.first + (0.5 * d_e * d_e + d_var / (2.0 * l)) * d.second;
    if d_e != 0.0 {
        if d.third.is_nan() {
            return Err(Error::StencilOutsideSpectrum { density });
        }
        out += (var_density + d_var) * d_e * d.third / (2.0 * l);
    }
    Ok(out)
}

/// Time interval `[t_start, t_end]` for long-time averages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragingWindow {
    pub t_start: f64,
    pub t_end: f64,
}

impl AveragingWindow {
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid("window", format!("need t_start < t_end, got [{t_start}, {t_end}]")));
        }
        Ok(Self { t_start, t_end })
    }

    /// `[0.6 T, T]`.
    pub fn trailing(t_final: f64) -> Result<Self> {
        Self::new(0.6 * t_final, t_final)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    pub fn sample_count(&self, times: &[f64]) -> usize {
        times.iter().filter(|&&t| self.contains(t)).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    /// Every recorded sample counts once.
    #[default]
    Unweighted,
    /// Each sample is weighted by the step that produced it, `t_i − t_{i−1}`.
    StepWeighted,
}

/// Mean and (population) standard deviation of `values` at the `times`
/// inside `window`.
pub fn long_time_average(
    times: &[f64],
    values: &[f64],
    window: &AveragingWindow,
    weighting: Weighting,
) -> Result<(f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::invalid("trace", "times and values differ in length"));
    }
    let mut w_sum = 0.0;
    let mut picked = Vec::new();
    for i in 0..times.len() {
        if !window.contains(times[i]) {
            continue;
        }
        let w = match weighting {
            Weighting::Unweighted => 1.0,
            Weighting::StepWeighted if i > 0 => times[i] - times[i - 1],
            Weighting::StepWeighted => 0.0,
        };
        picked.push((w, values[i]));
        w_sum += w;
    }
    if picked.len() < 2 || !(w_sum > 0.0) {
        return Err(Error::EmptyWindow(format!(
            "{} usable samples in [{}, {}]",
            picked.len(),
            window.t_start,
            window.t_end
        )));
    }
    let mean = picked.iter().map(|(w, v)| w * v).sum::<f64>() / w_sum;
    let var = picked.iter().map(|(w, v)| w * (v - mean).powi(2)).sum::<f64>() / w_sum;
    Ok((mean, var.sqrt()))
}

/// `(E_α, |⟨α|ψ⟩|²)` for every eigenstate, in ascending energy.
pub fn energy_distribution(ed: &EigenDecomposition, psi: &StateVector) -> Result<Vec<(f64, f64)>> {
    let c = ed.overlaps(psi)?;
    Ok(ed.eigenvalues.iter().zip(&c).map(|(&e, c)| (e, c.norm_sqr())).collect())
}

/// `ψ ∝ Σ_α Σ_k exp(−(E_α − E_k)²/2w²) |α⟩` over the given centers `E_k`.
pub fn filtered_state(ed: &EigenDecomposition, centers: &[f64], width: f64) -> Result<StateVector> {
    if centers.is_empty() {
        return Err(Error::invalid("centers", "need at least one center"));
    }
    if !(width > 0.0) {
        return Err(Error::invalid("width", format!("must be positive, got {width}")));
    }
    let weights: Vec<f64> = ed
        .eigenvalues
        .iter()
        .map(|&e| centers.iter().map(|&c| (-(e - c).powi(2) / (2.0 * width * width)).exp()).sum())
        .collect();
    if weights.iter().all(|&w| w < 1e-300) {
        return Err(Error::VanishingWeights);
    }
    let coef: Vec<Complex64> = weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    ed.synthesize(&coef)?.normalize()
}

/// Product-state families for [`variance_bound_scan`].
#[derive(Clone, Debug, PartialEq)]
pub enum StateFamily {
    /// `e^{−iθ Σσ^y}|↓…↓⟩` for each angle.
    Uniform(Vec<f64>),
    /// `Π_j e^{−iθ_j σ^y_j}|↓…↓⟩` with `θ_j` uniform in `[0, π]`, one state
    /// per seed.
    Random(Vec<u64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceBoundRow {
    pub sites: usize,
    /// The angle or the seed that labels the state.
    pub label: f64,
    pub var_density: f64,
}

/// `δE²/L` of each family member for each chain length. The model is `base`
/// with `sites` replaced.
pub fn variance_bound_scan(base: &IsingParams, family: &StateFamily, sizes: &[usize]) -> Result<Vec<VarianceBoundRow>> {
    let mut rows = Vec::new();
    for &sites in sizes {
        let p = IsingParams { sites, ..base.clone() };
        let space = p.space()?;
        let h = build_ising(&p)?.total().clone();
        let down = product_state(&space, &BasisLabel::all_down(sites))?;
        let states: Vec<(f64, StateVector)> = match family {
            StateFamily::Uniform(thetas) => thetas.iter().map(|&t| (t, down.global_y_rotation(t))).collect(),
            StateFamily::Random(seeds) => seeds
                .iter()
                .map(|&seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let thetas: Vec<f64> = (0..sites).map(|_| rng.random::<f64>() * std::f64::consts::PI).collect();
                    Ok((seed as f64, down.local_y_rotation(&thetas)?))
                })
                .collect::<Result<_>>()?,
        };
        for (label, psi) in states {
            let (m1, m2) = first_two_moments(&h, &psi)?;
            rows.push(VarianceBoundRow {
                sites,
                label,
                var_density: (m2 - m1 * m1) / sites as f64,
            });
        }
    }
    Ok(rows)
}
