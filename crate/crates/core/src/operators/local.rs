use num_complex::Complex64;

use crate::hilbert::SpaceDescriptor;
use crate::{Error, Result};

/// Single-site operator on a matter site or a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalOp {
    SigmaZ(usize),
    SigmaX(usize),
    SigmaPlus(usize),
    SigmaMinus(usize),
    /// `s^z` on link `(l, l+1)`.
    LinkZ(usize),
    LinkPlus(usize),
    LinkMinus(usize),
}

/// `coefficient · factors[0] · factors[1] · …`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductTerm {
    pub coefficient: Complex64,
    pub factors: Vec<LocalOp>,
}

impl ProductTerm {
    pub fn new(coefficient: Complex64, factors: Vec<LocalOp>) -> Self {
        Self { coefficient, factors }
    }

    pub fn real(coefficient: f64, factors: Vec<LocalOp>) -> Self {
        Self::new(Complex64::new(coefficient, 0.0), factors)
    }

    pub(crate) fn validate(&self, space: &SpaceDescriptor) -> Result<()> {
        for op in &self.factors {
            let (idx, limit, what) = match *op {
                LocalOp::SigmaZ(j) | LocalOp::SigmaX(j) | LocalOp::SigmaPlus(j) | LocalOp::SigmaMinus(j) => {
                    (j, space.sites(), "site")
                }
                LocalOp::LinkZ(l) | LocalOp::LinkPlus(l) | LocalOp::LinkMinus(l) => (l, space.link_count(), "link"),
            };
            if idx >= limit {
                return Err(Error::invalid(
                    "term",
                    format!("{what} {idx} out of range ({limit} available) in {op:?}"),
                ));
            }
        }
        Ok(())
    }

    /// Image of basis state `col`: `Some((row, amplitude))` or `None` if the
    /// term annihilates it.
    pub(crate) fn act(&self, space: &SpaceDescriptor, col: usize) -> Option<(usize, Complex64)> {
        let mut idx = col;
        let mut amp = self.coefficient;
        for op in self.factors.iter().rev() {
            let (next, factor) = act_local(space, *op, idx)?;
            idx = next;
            amp *= factor;
        }
        (amp.norm() > 0.0).then_some((idx, amp))
    }
}

fn act_local(space: &SpaceDescriptor, op: LocalOp, idx: usize) -> Option<(usize, f64)> {
    match op {
        LocalOp::SigmaZ(j) => Some((idx, if space.is_up(idx, j) { 1.0 } else { -1.0 })),
        LocalOp::SigmaX(j) => {
            let s = space.matter_stride(j);
            Some((if space.is_up(idx, j) { idx - s } else { idx + s }, 1.0))
        }
        LocalOp::SigmaPlus(j) => (!space.is_up(idx, j)).then(|| (idx + space.matter_stride(j), 1.0)),
        LocalOp::SigmaMinus(j) => space.is_up(idx, j).then(|| (idx - space.matter_stride(j), 1.0)),
        LocalOp::LinkZ(l) => {
            let two_s = space.link_two_s()? as f64;
            let n = space.link_digit(idx, l) as f64;
            Some((idx, n - two_s / 2.0))
        }
        LocalOp::LinkPlus(l) | LocalOp::LinkMinus(l) => {
            let two_s = space.link_two_s()? as usize;
            let n = space.link_digit(idx, l);
            let s = two_s as f64 / 2.0;
            let m = n as f64 - s;
            let stride = space.link_stride(l);
            if matches!(op, LocalOp::LinkPlus(_)) {
                (n < two_s).then(|| (idx + stride, (s * (s + 1.0) - m * (m + 1.0)).sqrt()))
            } else {
                (n > 0).then(|| (idx - stride, (s * (s + 1.0) - m * (m - 1.0)).sqrt()))
            }
        }
    }
}
