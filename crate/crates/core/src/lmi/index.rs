//! Index factorizations, inverses, augmentation, and index expressions with
//! decision variables (performance level, multipliers).

use crate::error::{Error, Result};
use crate::linalg::{block_diag, condition_number, eye, max_abs, symmetrize, zeros, Mat};
use crate::lmi::expr::AffineExpr;
use crate::model::system::{IndexBlock, PerformanceIndex};

/// Per label (U, R~) with R = U' R~^{-1} U.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexDecomposition {
    pub blocks: Vec<(Mat, Mat)>,
}

const PSD_TOL: f64 = 1e-9;

/// Factor a single PSD matrix R = U' R~^{-1} U with R~ = I and
/// U = Lambda_+^{1/2} V_+'; zero eigenvalues are dropped.
pub fn decompose_r_block(r: &Mat, label: usize) -> Result<(Mat, Mat)> {
    let d = r.nrows();
    if d == 0 {
        return Ok((zeros(0, 0), zeros(0, 0)));
    }
    let eig = symmetrize(r).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < -PSD_TOL {
        return Err(Error::IndefiniteR { label, min_eig: lmin });
    }
    let tol = PSD_TOL * lmax.max(1.0);
    let mut idx: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k] > tol).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut u = zeros(idx.len(), d);
    for (row, &k) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if pivot < 0.0 {
            v = -v;
        }
        let s = eig.eigenvalues[k].sqrt();
        for j in 0..d {
            u[(row, j)] = s * v[j];
        }
    }
    Ok((u, eye(idx.len())))
}

#[allow(non_snake_case)]
pub fn decompose_R(p: &PerformanceIndex) -> Result<IndexDecomposition> {
    let blocks = p
        .blocks()
        .iter()
        .enumerate()
        .map(|(k, b)| decompose_r_block(b.r(), k + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndexDecomposition { blocks })
}

/// Blocks (Q~, S~, R~) of P^{-1} per label, partitioned like P.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseIndex {
    pub blocks: Vec<IndexBlock>,
    pub condition_numbers: Vec<f64>,
}

/// Above the condition number gamma^2 of an l2 index at the top of the
/// bisection bracket.
const SINGULAR_COND: f64 = 1e14;

pub fn invert_index_block(b: &IndexBlock, label: usize) -> Result<(IndexBlock, f64)> {
    let p = b.matrix();
    let cond = condition_number(&p);
    if !(cond < SINGULAR_COND) {
        return Err(Error::SingularIndex(label));
    }
    let inv = p.clone().try_inverse().ok_or(Error::SingularIndex(label))?;
    Ok((IndexBlock::from_matrix(&symmetrize(&inv), b.inputs())?, cond))
}

pub fn invert_index(p: &PerformanceIndex) -> Result<InverseIndex> {
    let mut blocks = Vec::new();
    let mut conds = Vec::new();
    for (k, b) in p.blocks().iter().enumerate() {
        let (inv, cond) = invert_index_block(b, k + 1)?;
        log::debug!("index label {}: condition number {cond:.3e}", k + 1);
        blocks.push(inv);
        conds.push(cond);
    }
    Ok(InverseIndex { blocks, condition_numbers: conds })
}

/// Augmented index over stacked channels (w_u, w_p) and (z_u, z_p):
/// Q = diag(Q_delta, Q), S = diag(S_delta, S), R = diag(R_delta, R).
pub fn augment_index_block(perf: &IndexBlock, mult: &IndexBlock) -> Result<IndexBlock> {
    IndexBlock::new(
        block_diag(&[mult.q(), perf.q()]),
        block_diag(&[mult.s(), perf.s()]),
        block_diag(&[mult.r(), perf.r()]),
    )
}

pub fn augment_index(p: &PerformanceIndex, mult: &PerformanceIndex) -> Result<PerformanceIndex> {
    if p.num_labels() != mult.num_labels() {
        return Err(Error::Dimension(format!(
            "index has {} labels, multiplier {}",
            p.num_labels(),
            mult.num_labels()
        )));
    }
    let blocks = p
        .blocks()
        .iter()
        .zip(mult.blocks())
        .map(|(b, m)| augment_index_block(b, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerformanceIndex::new(blocks))
}

/// (Q, S, R) blocks that may contain decision variables. The same type holds
/// inverse blocks (Q~, S~, R~) for the dual conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexExpr {
    pub q: AffineExpr,
    pub s: AffineExpr,
    pub r: AffineExpr,
}

impl IndexExpr {
    pub fn constant(b: &IndexBlock) -> Self {
        IndexExpr { q: b.q().into(), s: b.s().into(), r: b.r().into() }
    }

    /// Q = -t I, S = 0, R = I with `t` a 1x1 expression (t = gamma^2).
    pub fn l2_level(t: &AffineExpr, inputs: usize, outputs: usize) -> Self {
        let q = t.scalar_times(&(-eye(inputs)));
        IndexExpr { q, s: AffineExpr::zeros(inputs, outputs), r: AffineExpr::identity(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.q.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.r.nrows()
    }

    pub fn augment(mult: &IndexExpr, perf: &IndexExpr) -> Self {
        IndexExpr {
            q: AffineExpr::block_diag(&[&mult.q, &perf.q]),
            s: AffineExpr::block_diag(&[&mult.s, &perf.s]),
            r: AffineExpr::block_diag(&[&mult.r, &perf.r]),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.q.is_constant() && self.s.is_constant() && self.r.is_constant()
    }

    /// Largest absolute constant entry.
    pub fn data_norm(&self) -> f64 {
        [&self.q, &self.s, &self.r].iter().map(|e| e.constant_part().norm()).fold(0.0, f64::max)
    }

    /// Constant R, required by the Schur and slack primal forms.
    pub fn constant_r(&self) -> Option<&Mat> {
        self.r.is_constant().then(|| self.r.constant_part())
    }
}

/// Checks the dual side condition Q~ <= 0 on a constant block.
pub fn check_dual_side(q_tilde: &Mat, label: usize) -> Result<()> {
    if q_tilde.nrows() == 0 {
        return Ok(());
    }
    let lmax = crate::linalg::max_eig(q_tilde);
    if lmax > 1e-9 * max_abs(q_tilde).max(1.0) {
        return Err(Error::DualSideCondition(label));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn decomposition_examples() {
        let (u, rt) = decompose_r_block(&eye(2), 1).unwrap();
        assert!((u.transpose() * &u - eye(2)).amax() < 1e-12);
        assert_eq!(rt, eye(2));
        let (u, rt) = decompose_r_block(&m(2, 2, &[4.0, 0.0, 0.0, 0.0]), 1).unwrap();
        assert_eq!(u.shape(), (1, 2));
        assert!((u[(0, 0)] - 2.0).abs() < 1e-12 && u[(0, 1)].abs() < 1e-12);
        assert_eq!(rt, eye(1));
        let err = decompose_r_block(&m(1, 1, &[-1.0]), 3).unwrap_err();
        assert!(err.to_string().contains("label 3"));
    }

    #[test]
    fn inverse_examples() {
        let b = IndexBlock::new(m(1, 1, &[-1.0]), m(1, 1, &[2.0]), m(1, 1, &[1.0])).unwrap();
        let (inv, _) = invert_index_block(&b, 1).unwrap();
        assert!((inv.matrix() - m(2, 2, &[-0.2, 0.4, 0.4, 0.2])).amax() < 1e-12);
        assert!((inv.matrix() * b.matrix() - eye(2)).amax() < 1e-12);
        let l2 = IndexBlock::new(eye(2) * -4.0, zeros(2, 1), eye(1)).unwrap();
        let (inv, _) = invert_index_block(&l2, 1).unwrap();
        assert!((inv.q() + eye(2) * 0.25).amax() < 1e-15);
        let sing = IndexBlock::new(zeros(1, 1), zeros(1, 1), eye(1)).unwrap();
        assert!(invert_index_block(&sing, 1).is_err());
    }

    #[test]
    fn augmentation_of_scalar_channels() {
        let a = 0.7;
        let gamma: f64 = 3.0;
        let mult = IndexBlock::new(m(1, 1, &[-a]), zeros(1, 1), m(1, 1, &[a])).unwrap();
        let perf = IndexBlock::new(m(1, 1, &[-gamma * gamma]), zeros(1, 1), eye(1)).unwrap();
        let aug = augment_index_block(&perf, &mult).unwrap();
        assert_eq!(aug.q(), &m(2, 2, &[-a, 0.0, 0.0, -9.0]));
        assert_eq!(aug.r(), &m(2, 2, &[a, 0.0, 0.0, 1.0]));
        let empty = IndexBlock::new(zeros(0, 0), zeros(0, 0), zeros(0, 0)).unwrap();
        assert_eq!(augment_index_block(&perf, &empty).unwrap(), perf);
    }

    #[test]
    fn level_expression() {
        let mut vs = crate::lmi::expr::VariableSet::new();
        let t = { let id = vs.scalar("t"); vs.expr(id) };
        let ix = IndexExpr::l2_level(&t, 2, 1);
        assert_eq!(ix.q.eval(&[5.0]), eye(2) * -5.0);
    }
}
