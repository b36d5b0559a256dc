//! Multiplier classes for the uncertainty channel.

use crate::error::{Error, Result};
use crate::linalg::{eye, zeros};
use crate::lmi::block::{BlockTag, LmiBlock, LmiProblem, Sense};
use crate::lmi::expr::AffineExpr;
use crate::lmi::index::{invert_index_block, IndexExpr};
use crate::lmi::lfr::UncertaintyStructure;
use crate::model::system::IndexBlock;

#[derive(Clone, Debug, PartialEq)]
pub enum MultiplierKind {
    /// diag(-a I, a I), a >= 0; valid for any Delta with norm at most 1.
    ScalarNormBounded,
    /// diag(-D, D), D >= 0 symmetric; valid for Delta = delta I, |delta| <= 1.
    RepeatedScalar,
    /// A fixed numeric multiplier supplied by the user.
    FullBlockFixed(IndexBlock),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierClass {
    pub kinds: Vec<MultiplierKind>,
    /// Whether a convex description of the inverse multipliers is available.
    pub inverse_parameterized: bool,
}

impl MultiplierClass {
    pub fn scalar(num_labels: usize) -> Self {
        MultiplierClass { kinds: vec![MultiplierKind::ScalarNormBounded; num_labels], inverse_parameterized: true }
    }

    /// Default class for the given per-label structures.
    pub fn for_structures(structures: &[UncertaintyStructure]) -> Self {
        let kinds = structures
            .iter()
            .map(|s| match s {
                UncertaintyStructure::RepeatedScalar => MultiplierKind::RepeatedScalar,
                UncertaintyStructure::FullBlock => MultiplierKind::ScalarNormBounded,
            })
            .collect();
        MultiplierClass { kinds, inverse_parameterized: true }
    }

    pub fn kind(&self, label: usize) -> Result<&MultiplierKind> {
        self.kinds
            .get(label.wrapping_sub(1))
            .ok_or_else(|| Error::Invalid(format!("no multiplier kind for label {label}")))
    }

    /// Creates the multiplier (or, with `inverse`, its inverse) for one label
    /// on channels w_u (dimension `nw`) and z_u (dimension `nz`), together with
    /// its sign constraint.
    pub fn instantiate(&self, prob: &mut LmiProblem, label: usize, nw: usize, nz: usize, inverse: bool, margin: f64) -> Result<IndexExpr> {
        if nw == 0 && nz == 0 {
            return Ok(IndexExpr { q: AffineExpr::zeros(0, 0), s: AffineExpr::zeros(0, 0), r: AffineExpr::zeros(0, 0) });
        }
        if inverse && !self.inverse_parameterized {
            return Err(Error::Invalid("multiplier class without convex inverse description".into()));
        }
        match self.kind(label)? {
            MultiplierKind::ScalarNormBounded => scalar_multiplier(prob, label, nw, nz, inverse, margin),
            MultiplierKind::RepeatedScalar => {
                if nw != nz {
                    return Err(Error::Dimension(format!(
                        "repeated-scalar multiplier at label {label} needs square Delta, channel is {nw}x{nz}"
                    )));
                }
                if nw == 1 {
                    return scalar_multiplier(prob, label, 1, 1, inverse, margin);
                }
                let name = if inverse { format!("E[{label}]") } else { format!("D[{label}]") };
                let id = prob.vars.symmetric(&name, nw);
                let d = prob.vars.expr(id);
                prob.push(LmiBlock::new(format!("{name} >= 0"), d.clone(), Sense::PositiveSemidefinite, BlockTag::Label(label), margin)?);
                Ok(IndexExpr { q: -&d, s: AffineExpr::zeros(nw, nz), r: d })
            }
            MultiplierKind::FullBlockFixed(p) => {
                if p.inputs() != nw || p.outputs() != nz {
                    return Err(Error::Dimension(format!("fixed multiplier at label {label} does not match channel {nw}x{nz}")));
                }
                if inverse {
                    let (inv, _) = invert_index_block(p, label)?;
                    Ok(IndexExpr::constant(&inv))
                } else {
                    Ok(IndexExpr::constant(p))
                }
            }
        }
    }
}

fn scalar_multiplier(prob: &mut LmiProblem, label: usize, nw: usize, nz: usize, inverse: bool, margin: f64) -> Result<IndexExpr> {
    let name = if inverse { format!("b[{label}]") } else { format!("a[{label}]") };
    let id = prob.vars.scalar(&name);
    let a = prob.vars.expr(id);
    prob.push(LmiBlock::new(format!("{name} >= 0"), a.clone(), Sense::PositiveSemidefinite, BlockTag::Label(label), margin)?);
    Ok(IndexExpr { q: a.scalar_times(&(-eye(nw))), s: AffineExpr::constant(zeros(nw, nz)), r: a.scalar_times(&eye(nz)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    /// Quadratic form [Delta; I]' P [Delta; I] for a numeric multiplier.
    fn separation(p: &Mat, delta: &Mat) -> Mat {
        let nz = delta.ncols();
        let stacked = crate::linalg::vstack(&[delta, &eye(nz)]).unwrap();
        stacked.transpose() * p * stacked
    }

    #[test]
    fn instances_satisfy_separation() {
        for (kind, k) in [(MultiplierKind::ScalarNormBounded, 1), (MultiplierKind::RepeatedScalar, 2)] {
            let class = MultiplierClass { kinds: vec![kind], inverse_parameterized: true };
            let mut prob = LmiProblem::new("test");
            let ix = class.instantiate(&mut prob, 1, k, k, false, 1e-7).unwrap();
            let mut x = vec![0.0; prob.vars.len()];
            // D = [[2, 0.5], [0.5, 1]] for k = 2, a = 0.7 for k = 1.
            if k == 1 {
                x[0] = 0.7;
            } else {
                x.copy_from_slice(&[2.0, 0.5, 1.0]);
            }
            let full = AffineExpr::sym_blocks(&[k, k], &[(0, 0, &ix.q), (0, 1, &ix.s), (1, 1, &ix.r)]).eval(&x);
            for delta in [-1.0, -0.3, 0.0, 0.8, 1.0] {
                let d = eye(k) * delta;
                assert!(crate::linalg::min_eig(&separation(&full, &d)) >= -1e-12);
            }
        }
    }

    #[test]
    fn empty_channel_is_empty() {
        let mut prob = LmiProblem::new("test");
        let ix = MultiplierClass::scalar(1).instantiate(&mut prob, 1, 0, 0, false, 1e-7).unwrap();
        assert_eq!(ix.inputs(), 0);
        assert!(prob.vars.is_empty() && prob.blocks.is_empty());
    }

    #[test]
    fn inverse_requires_flag() {
        let mut prob = LmiProblem::new("test");
        let class = MultiplierClass { kinds: vec![MultiplierKind::ScalarNormBounded], inverse_parameterized: false };
        assert!(class.instantiate(&mut prob, 1, 1, 1, true, 1e-7).is_err());
    }
}
