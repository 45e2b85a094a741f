//! Product-space bases and state vectors.
//!
//! Amplitude indices use a little-endian mixed radix. Site 0 is the least
//! significant digit. For a spin-1/2 chain site `j` is bit `j`, with bit value
//! 1 meaning spin up (`σ^z = +1`). For the link model every matter site `j`
//! contributes a radix-2 digit followed by a radix-(2S+1) digit for the link
//! `(j, j+1)`, so one "cell" has radix `2(2S+1)`.

use std::fmt;

use num_complex::Complex64;

use crate::{Error, Result};

/// Largest number of amplitudes a space may have unless a cap is given.
pub const DEFAULT_MAX_DIMENSION: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    SpinHalfChain,
    /// Spin-1/2 matter on every site and a spin-S link between neighbours.
    /// `two_s` stores 2S so half-integer spins stay exact.
    LinkModel { two_s: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceDescriptor {
    kind: SpaceKind,
    sites: usize,
    boundary: Boundary,
    dimension: usize,
}

impl SpaceDescriptor {
    pub fn spin_chain(sites: usize, boundary: Boundary) -> Result<Self> {
        Self::new(SpaceKind::SpinHalfChain, sites, boundary, DEFAULT_MAX_DIMENSION)
    }

    /// Link model on a ring of `sites` matter sites with `sites` links.
    pub fn link_model(sites: usize, two_s: u32) -> Result<Self> {
        Self::new(
            SpaceKind::LinkModel { two_s },
            sites,
            Boundary::Periodic,
            DEFAULT_MAX_DIMENSION,
        )
    }

    pub fn new(kind: SpaceKind, sites: usize, boundary: Boundary, max_dimension: usize) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidSpace(format!("need at least 2 sites, got {sites}")));
        }
        let cell = match kind {
            SpaceKind::SpinHalfChain => 2usize,
            SpaceKind::LinkModel { two_s } => {
                if two_s == 0 {
                    return Err(Error::InvalidSpace("link spin must be positive".into()));
                }
                if boundary != Boundary::Periodic {
                    return Err(Error::InvalidSpace(
                        "the link model is only defined with periodic boundaries".into(),
                    ));
                }
                2 * (two_s as usize + 1)
            }
        };
        let mut dimension = 1usize;
        for _ in 0..sites {
            dimension = dimension
                .checked_mul(cell)
                .filter(|&d| d <= max_dimension)
                .ok_or(Error::DimensionCap {
                    dimension: usize::MAX,
                    cap: max_dimension,
                })?;
        }
        Ok(Self {
            kind,
            sites,
            boundary,
            dimension,
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Number of spin-1/2 (matter) sites, the `L` used for densities.
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn link_count(&self) -> usize {
        match self.kind {
            SpaceKind::SpinHalfChain => 0,
            SpaceKind::LinkModel { .. } => self.sites,
        }
    }

    /// 2S for the link spin, `None` for plain spin chains.
    pub fn link_two_s(&self) -> Option<u32> {
        match self.kind {
            SpaceKind::SpinHalfChain => None,
            SpaceKind::LinkModel { two_s } => Some(two_s),
        }
    }

    fn cell_radix(&self) -> usize {
        match self.kind {
            SpaceKind::SpinHalfChain => 2,
            SpaceKind::LinkModel { two_s } => 2 * (two_s as usize + 1),
        }
    }

    /// Index stride of the matter digit on `site`.
    pub fn matter_stride(&self, site: usize) -> usize {
        self.cell_radix().pow(site as u32)
    }

    /// Index stride of the digit for link `(link, link+1)`.
    pub fn link_stride(&self, link: usize) -> usize {
        self.matter_stride(link) * 2
    }

    #[inline]
    pub fn is_up(&self, index: usize, site: usize) -> bool {
        (index / self.matter_stride(site)) % 2 == 1
    }

    /// Link digit `n = m + S`, in `0..=2S`.
    #[inline]
    pub fn link_digit(&self, index: usize, link: usize) -> usize {
        let radix = self.link_two_s().map_or(1, |t| t as usize + 1);
        (index / self.link_stride(link)) % radix
    }

    pub fn encode(&self, label: &BasisLabel) -> Result<usize> {
        if label.matter.len() != self.sites {
            return Err(Error::InvalidLabel(format!(
                "expected {} matter sites, got {}",
                self.sites,
                label.matter.len()
            )));
        }
        if label.link_two_m.len() != self.link_count() {
            return Err(Error::InvalidLabel(format!(
                "expected {} links, got {}",
                self.link_count(),
                label.link_two_m.len()
            )));
        }
        let mut index = 0usize;
        for (j, &up) in label.matter.iter().enumerate() {
            if up {
                index += self.matter_stride(j);
            }
        }
        if let Some(two_s) = self.link_two_s() {
            let two_s = two_s as i32;
            for (l, &two_m) in label.link_two_m.iter().enumerate() {
                if two_m.abs() > two_s || (two_m + two_s) % 2 != 0 {
                    return Err(Error::InvalidLabel(format!(
                        "link {l}: m = {} is not a level of spin {}",
                        two_m as f64 / 2.0,
                        two_s as f64 / 2.0
                    )));
                }
                index += ((two_m + two_s) / 2) as usize * self.link_stride(l);
            }
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<BasisLabel> {
        if index >= self.dimension {
            return Err(Error::InvalidLabel(format!(
                "index {index} out of range for dimension {}",
                self.dimension
            )));
        }
        let matter = (0..self.sites).map(|j| self.is_up(index, j)).collect();
        let link_two_m = match self.link_two_s() {
            None => Vec::new(),
            Some(two_s) => (0..self.sites)
                .map(|l| 2 * self.link_digit(index, l) as i32 - two_s as i32)
                .collect(),
        };
        Ok(BasisLabel { matter, link_two_m })
    }

    pub(crate) fn ensure_same(&self, other: &SpaceDescriptor) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SpaceKind::SpinHalfChain => write!(f, "spin-1/2 chain L={} {:?}", self.sites, self.boundary),
            SpaceKind::LinkModel { two_s } => {
                write!(f, "link model L={} 2S={} {:?}", self.sites, two_s, self.boundary)
            }
        }
    }
}

/// Occupations of one basis state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisLabel {
    /// `true` is spin up on that matter site.
    pub matter: Vec<bool>,
    /// Twice the `s^z` value of each link (empty for spin chains).
    pub link_two_m: Vec<i32>,
}

impl BasisLabel {
    pub fn spins(matter: Vec<bool>) -> Self {
        Self {
            matter,
            link_two_m: Vec::new(),
        }
    }

    pub fn with_links(matter: Vec<bool>, link_two_m: Vec<i32>) -> Self {
        Self { matter, link_two_m }
    }

    /// All spins down.
    pub fn all_down(sites: usize) -> Self {
        Self::spins(vec![false; sites])
    }
}

/// Complex amplitudes over the basis of a [`SpaceDescriptor`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: SpaceDescriptor,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(space: SpaceDescriptor, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.dimension() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!("length {} does not match dimension {}", amps.len(), space.dimension()),
            });
        }
        Ok(Self { space, amps })
    }

    pub(crate) fn from_parts(space: SpaceDescriptor, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), space.dimension());
        Self { space, amps }
    }

    pub fn zeros(space: SpaceDescriptor) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); space.dimension()];
        Self { space, amps }
    }

    /// Computational basis vector `e_index`.
    pub fn basis(space: SpaceDescriptor, index: usize) -> Result<Self> {
        if index >= space.dimension() {
            return Err(Error::InvalidLabel(format!("index {index} out of range")));
        }
        let mut state = Self::zeros(space);
        state.amps[index] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.space.ensure_same(&other.space)?;
        Ok(dot(&self.amps, &other.amps))
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    pub fn normalize(&self) -> Result<StateVector> {
        let mut out = self.clone();
        out.normalize_in_place()?;
        Ok(out)
    }

    pub fn normalize_in_place(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.space.ensure_same(&other.space)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn ensure_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-6 {
            Err(Error::NotNormalized { norm: n })
        } else {
            Ok(())
        }
    }

    /// Applies `exp(-iθσ^y)` on every matter site.
    pub fn global_y_rotation(&self, theta: f64) -> StateVector {
        let (s, c) = theta.sin_cos();
        let mut out = self.clone();
        // exp(-iθσ^y) = [[c, -s], [s, c]] in the (↑, ↓) basis
        let m = [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ];
        for site in 0..self.space.sites() {
            apply_site_matrix(&self.space, &mut out.amps, site, &m);
        }
        out
    }

    /// Applies `exp(-iθ_jσ^y_j)` with a separate angle per matter site.
    pub fn local_y_rotation(&self, thetas: &[f64]) -> Result<StateVector> {
        if thetas.len() != self.space.sites() {
            return Err(Error::invalid("thetas", format!("need {} angles, got {}", self.space.sites(), thetas.len())));
        }
        let mut out = self.clone();
        for (site, &theta) in thetas.iter().enumerate() {
            let (s, c) = theta.sin_cos();
            let m = [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ];
            apply_site_matrix(&self.space, &mut out.amps, site, &m);
        }
        Ok(out)
    }
}

/// Product state with the same single-site spinor `up|↑⟩ + down|↓⟩` on every
/// matter site and all links at `link_two_m` (ignored for spin chains).
pub fn product_spinor(
    space: &SpaceDescriptor,
    up: Complex64,
    down: Complex64,
    link_two_m: &[i32],
) -> Result<StateVector> {
    let label = BasisLabel::with_links(vec![false; space.sites()], link_two_m.to_vec());
    let mut state = product_state(space, &label)?;
    let norm = (up.norm_sqr() + down.norm_sqr()).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    // columns: ↓ maps to the given spinor, ↑ is irrelevant (never populated)
    let m = [[Complex64::new(0.0, 0.0), up / norm], [Complex64::new(0.0, 0.0), down / norm]];
    for site in 0..space.sites() {
        apply_site_matrix(space, &mut state.amps, site, &m);
    }
    Ok(state)
}

pub fn product_state(space: &SpaceDescriptor, label: &BasisLabel) -> Result<StateVector> {
    let index = space.encode(label)?;
    StateVector::basis(space.clone(), index)
}

pub fn global_y_rotation(psi: &StateVector, theta: f64) -> StateVector {
    psi.global_y_rotation(theta)
}

pub fn inner(phi: &StateVector, psi: &StateVector) -> Result<Complex64> {
    phi.inner(psi)
}

pub fn norm(psi: &StateVector) -> f64 {
    psi.norm()
}

pub fn normalize(psi: &StateVector) -> Result<StateVector> {
    psi.normalize()
}

/// Applies a 2×2 matrix, written in the (↑, ↓) basis, to one matter site.
pub(crate) fn apply_site_matrix(
    space: &SpaceDescriptor,
    amps: &mut [Complex64],
    site: usize,
    m: &[[Complex64; 2]; 2],
) {
    let stride = space.matter_stride(site);
    for block in (0..amps.len()).step_by(2 * stride) {
        for i_down in block..block + stride {
            let i_up = i_down + stride;
            let (a_up, a_down) = (amps[i_up], amps[i_down]);
            amps[i_up] = m[0][0] * a_up + m[0][1] * a_down;
            amps[i_down] = m[1][0] * a_up + m[1][1] * a_down;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}
