use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseOperator;
use crate::hilbert::{Boundary, SpaceDescriptor};
use crate::propagate::TrotterSplit;
use crate::{Error, Result};

/// Quenched bond disorder: each coupling is drawn from `[J − δJ, J + δJ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disorder {
    pub half_width: f64,
    pub seed: u64,
}

/// `H = Σ J_ij σ^z_i σ^z_j + h_z Σ σ^z_j + h_x Σ σ^x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingParams {
    pub j_z: f64,
    pub h_x: f64,
    pub h_z: f64,
    pub sites: usize,
    pub boundary: Boundary,
    /// Power-law exponent of `J_z / r^α`; `None` is nearest neighbour.
    pub alpha: Option<f64>,
    pub disorder: Option<Disorder>,
}

impl IsingParams {
    pub fn nearest_neighbor(j_z: f64, h_x: f64, h_z: f64, sites: usize) -> Self {
        Self {
            j_z,
            h_x,
            h_z,
            sites,
            boundary: Boundary::Periodic,
            alpha: None,
            disorder: None,
        }
    }

    pub fn space(&self) -> Result<SpaceDescriptor> {
        SpaceDescriptor::spin_chain(self.sites, self.boundary)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("j_z", self.j_z), ("h_x", self.h_x), ("h_z", self.h_z)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite, got {v}")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || a.is_nan() {
                return Err(Error::invalid("alpha", format!("must be positive, got {a}")));
            }
        }
        if let Some(d) = self.disorder {
            if !(d.half_width >= 0.0) || !d.half_width.is_finite() {
                return Err(Error::invalid("disorder", format!("half width must be ≥ 0, got {}", d.half_width)));
            }
        }
        Ok(())
    }
}

/// Site-resolved Ising couplings, the form both the clean and the noisy
/// builders reduce to.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingTerms {
    /// `(i, j, J_ij)` for each `σ^z_i σ^z_j` term.
    pub bonds: Vec<(usize, usize, f64)>,
    pub h_z: Vec<f64>,
    pub h_x: Vec<f64>,
}

impl IsingTerms {
    pub fn diagonal_energies(&self, space: &SpaceDescriptor) -> Vec<f64> {
        (0..space.dimension())
            .map(|idx| {
                let s = |j: usize| if space.is_up(idx, j) { 1.0 } else { -1.0 };
                let zz: f64 = self.bonds.iter().map(|&(i, j, c)| c * s(i) * s(j)).sum();
                let z: f64 = self.h_z.iter().enumerate().map(|(j, h)| h * s(j)).sum();
                zz + z
            })
            .collect()
    }

    /// `H₋` is the z-diagonal part, `H₊` the transverse field.
    pub fn split(&self, space: &SpaceDescriptor) -> Result<TrotterSplit> {
        let h_minus = SparseOperator::diagonal(space.clone(), self.diagonal_energies(space))?;
        let h_plus = SparseOperator::x_field(space.clone(), self.h_x.clone())?;
        TrotterSplit::new(h_minus, h_plus)
    }
}

/// Distance on the chain; the shorter way round for periodic boundaries.
pub(crate) fn distance(i: usize, j: usize, sites: usize, boundary: Boundary) -> usize {
    let d = i.abs_diff(j);
    match boundary {
        Boundary::Periodic => d.min(sites - d),
        Boundary::Open => d,
    }
}

pub fn ising_terms(p: &IsingParams) -> Result<IsingTerms> {
    p.validate()?;
    let l = p.sites;
    let mut pairs: Vec<(usize, usize, f64)> = match p.alpha {
        None => {
            let last = if p.boundary == Boundary::Periodic { l } else { l - 1 };
            (0..last).map(|j| (j, (j + 1) % l, 1.0)).collect()
        }
        Some(alpha) => {
            let mut v = Vec::new();
            for i in 0..l {
                for j in i + 1..l {
                    let r = distance(i, j, l, p.boundary) as f64;
                    v.push((i, j, r.powf(-alpha)));
                }
            }
            v
        }
    };
    let mut rng = p.disorder.map(|d| (ChaCha8Rng::seed_from_u64(d.seed), d.half_width));
    for pair in &mut pairs {
        let base = match &mut rng {
            Some((rng, width)) => p.j_z + *width * (2.0 * rng.random::<f64>() - 1.0),
            None => p.j_z,
        };
        pair.2 *= base;
    }
    Ok(IsingTerms {
        bonds: pairs,
        h_z: vec![p.h_z; l],
        h_x: vec![p.h_x; l],
    })
}

pub fn build_ising(p: &IsingParams) -> Result<TrotterSplit> {
    let space = p.space()?;
    ising_terms(p)?.split(&space)
}
