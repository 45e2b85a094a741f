use super::{LocalOp, ProductTerm, SparseOperator};
use crate::hilbert::SpaceDescriptor;
use crate::propagate::TrotterSplit;
use crate::{Error, Result};

/// Spin-S U(1) quantum link model on a ring, with an optional
/// gauge-breaking perturbation of strength `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct QlmParams {
    pub j: f64,
    pub mu: f64,
    pub k: f64,
    /// Twice the link spin.
    pub two_s: u32,
    pub lambda: f64,
    pub sites: usize,
}

impl QlmParams {
    pub fn space(&self) -> Result<SpaceDescriptor> {
        SpaceDescriptor::link_model(self.sites, self.two_s)
    }

    fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }
}

#[derive(Clone, Debug)]
pub struct QlmModel {
    pub split: TrotterSplit,
    /// One Gauss generator per matter site.
    pub generators: Vec<SparseOperator>,
}

/// Staggering sign of matter site `j`. Site 0 carries `−1`, so the
/// alternating state `|↑↓↑↓…⟩` with empty links is the Gauss-law vacuum.
fn stagger(j: usize) -> f64 {
    if j % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

fn kinetic_terms(p: &QlmParams) -> Vec<ProductTerm> {
    let l = p.sites;
    let s = p.spin();
    let c = p.j / (2.0 * (s * (s + 1.0)).sqrt());
    (0..l)
        .flat_map(|j| {
            let n = (j + 1) % l;
            [
                ProductTerm::real(c, vec![LocalOp::SigmaPlus(j), LocalOp::LinkPlus(j), LocalOp::SigmaMinus(n)]),
                ProductTerm::real(c, vec![LocalOp::SigmaMinus(j), LocalOp::LinkMinus(j), LocalOp::SigmaPlus(n)]),
            ]
        })
        .collect()
}

fn free_terms(p: &QlmParams) -> Vec<ProductTerm> {
    (0..p.sites)
        .flat_map(|j| {
            [
                ProductTerm::real(p.mu * stagger(j), vec![LocalOp::SigmaZ(j)]),
                ProductTerm::real(p.k, vec![LocalOp::LinkZ(j), LocalOp::LinkZ(j)]),
            ]
        })
        .collect()
}

fn perturbation_terms(p: &QlmParams, scale: f64) -> Vec<ProductTerm> {
    let l = p.sites;
    let s = p.spin();
    let link = scale / (s * (s + 1.0)).sqrt();
    (0..l)
        .flat_map(|j| {
            let n = (j + 1) % l;
            [
                ProductTerm::real(link, vec![LocalOp::LinkPlus(j)]),
                ProductTerm::real(link, vec![LocalOp::LinkMinus(j)]),
                ProductTerm::real(scale, vec![LocalOp::SigmaPlus(j), LocalOp::SigmaMinus(n)]),
                ProductTerm::real(scale, vec![LocalOp::SigmaMinus(j), LocalOp::SigmaPlus(n)]),
            ]
        })
        .collect()
}

/// `G_j = (σ^z_j ± 1)/2 + s^z_{j−1,j} − s^z_{j,j+1}`, diagonal in the basis.
pub fn gauss_generators(space: &SpaceDescriptor) -> Result<Vec<SparseOperator>> {
    let two_s = space
        .link_two_s()
        .ok_or_else(|| Error::InvalidSpace("Gauss generators need link degrees of freedom".into()))?;
    let l = space.sites();
    let half = two_s as f64 / 2.0;
    (0..l)
        .map(|j| {
            let left = (j + l - 1) % l;
            let values = (0..space.dimension())
                .map(|idx| {
                    let sz = if space.is_up(idx, j) { 1.0 } else { -1.0 };
                    let m_left = space.link_digit(idx, left) as f64 - half;
                    let m_right = space.link_digit(idx, j) as f64 - half;
                    (sz + stagger(j)) / 2.0 + m_left - m_right
                })
                .collect();
            SparseOperator::diagonal(space.clone(), values)
        })
        .collect()
}

/// `H₊ = H_kin + λV`, `H₋ = H_free − λV`.
pub fn build_qlm(p: &QlmParams) -> Result<QlmModel> {
    if p.sites % 2 != 0 {
        return Err(Error::invalid("sites", format!("staggered mass needs an even L, got {}", p.sites)));
    }
    for (name, v) in [("j", p.j), ("mu", p.mu), ("k", p.k), ("lambda", p.lambda)] {
        if !v.is_finite() {
            return Err(Error::invalid(name, format!("must be finite, got {v}")));
        }
    }
    let space = p.space()?;
    let mut plus = kinetic_terms(p);
    let mut minus = free_terms(p);
    if p.lambda != 0.0 {
        plus.extend(perturbation_terms(p, p.lambda));
        minus.extend(perturbation_terms(p, -p.lambda));
    }
    let h_plus = SparseOperator::from_terms(space.clone(), &plus)?;
    let h_minus = SparseOperator::from_terms(space.clone(), &minus)?;
    Ok(QlmModel {
        split: TrotterSplit::new(h_minus, h_plus)?,
        generators: gauss_generators(&space)?,
    })
}

impl QlmModel {
    /// The alternating matter state `|↑↓↑↓…⟩` with every link at `m = 0`
    /// (`m = 1/2` for half-integer S).
    pub fn vacuum_label(p: &QlmParams) -> crate::hilbert::BasisLabel {
        let matter = (0..p.sites).map(|j| j % 2 == 0).collect();
        let links = (0..p.sites)
            .map(|_| if p.two_s % 2 == 0 { 0 } else { 1 })
            .collect();
        crate::hilbert::BasisLabel::with_links(matter, links)
    }
}
