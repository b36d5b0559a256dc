//! Matrix variables and matrix-valued affine expressions in their entries.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{zeros, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Symmetric,
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixVariable {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
    offset: usize,
}

impl MatrixVariable {
    /// Number of scalar decision variables.
    pub fn packed_len(&self) -> usize {
        match self.kind {
            VarKind::Symmetric => self.rows * (self.rows + 1) / 2,
            VarKind::General => self.rows * self.cols,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// (row, col) of each packed scalar. Symmetric variables pack their lower
    /// triangle row by row, general ones their entries row by row.
    fn positions(&self) -> Vec<(usize, usize)> {
        match self.kind {
            VarKind::Symmetric => (0..self.rows).flat_map(|i| (0..=i).map(move |j| (i, j))).collect(),
            VarKind::General => (0..self.rows).flat_map(|i| (0..self.cols).map(move |j| (i, j))).collect(),
        }
    }
}

/// Ordered collection of matrix variables packed into one scalar vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VariableSet {
    vars: Vec<MatrixVariable>,
    total: usize,
}

impl VariableSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, rows: usize, cols: usize, kind: VarKind) -> VarId {
        let v = MatrixVariable { name: name.to_string(), rows, cols, kind, offset: self.total };
        self.total += v.packed_len();
        self.vars.push(v);
        VarId(self.vars.len() - 1)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> VarId {
        self.push(name, n, n, VarKind::Symmetric)
    }

    pub fn general(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.push(name, rows, cols, VarKind::General)
    }

    pub fn scalar(&mut self, name: &str) -> VarId {
        self.symmetric(name, 1)
    }

    pub fn get(&self, id: VarId) -> &MatrixVariable {
        &self.vars[id.0]
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn vars(&self) -> &[MatrixVariable] {
        &self.vars
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    /// Total number of scalar decision variables.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// The variable as an expression of its packed scalars.
    pub fn expr(&self, id: VarId) -> AffineExpr {
        let v = &self.vars[id.0];
        let mut e = AffineExpr::zeros(v.rows, v.cols);
        for (k, (i, j)) in v.positions().into_iter().enumerate() {
            let mut c = zeros(v.rows, v.cols);
            c[(i, j)] = 1.0;
            if v.kind == VarKind::Symmetric {
                c[(j, i)] = 1.0;
            }
            e.terms.insert(v.offset + k, c);
        }
        e
    }

    /// Reads the matrix value of `id` from a packed vector.
    pub fn unpack(&self, id: VarId, x: &[f64]) -> Mat {
        let v = &self.vars[id.0];
        let mut m = zeros(v.rows, v.cols);
        for (k, (i, j)) in v.positions().into_iter().enumerate() {
            m[(i, j)] = x[v.offset + k];
            if v.kind == VarKind::Symmetric {
                m[(j, i)] = x[v.offset + k];
            }
        }
        m
    }

    /// Writes a matrix value into the packed vector.
    pub fn pack(&self, id: VarId, value: &Mat, x: &mut [f64]) -> Result<()> {
        let v = &self.vars[id.0];
        if value.shape() != (v.rows, v.cols) {
            return Err(Error::Dimension(format!(
                "value for {} is {}x{}, expected {}x{}",
                v.name,
                value.nrows(),
                value.ncols(),
                v.rows,
                v.cols
            )));
        }
        for (k, (i, j)) in v.positions().into_iter().enumerate() {
            x[v.offset + k] = value[(i, j)];
        }
        Ok(())
    }

    /// Human-readable name of a packed scalar.
    pub fn scalar_name(&self, k: usize) -> String {
        for v in &self.vars {
            if k >= v.offset && k < v.offset + v.packed_len() {
                let (i, j) = v.positions()[k - v.offset];
                return if v.rows == 1 && v.cols == 1 { v.name.clone() } else { format!("{}({},{})", v.name, i, j) };
            }
        }
        format!("x{k}")
    }
}

/// `constant + sum_k x_k * terms[k]` for packed scalar variables `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineExpr {
    rows: usize,
    cols: usize,
    constant: Mat,
    terms: BTreeMap<usize, Mat>,
}

impl AffineExpr {
    pub fn constant(m: Mat) -> Self {
        AffineExpr { rows: m.nrows(), cols: m.ncols(), constant: m, terms: BTreeMap::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Mat::identity(n, n))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_part(&self) -> &Mat {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, Mat> {
        &self.terms
    }

    pub fn coefficient(&self, k: usize) -> Option<&Mat> {
        self.terms.get(&k)
    }

    fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        let constant = f(&self.constant);
        let (rows, cols) = constant.shape();
        AffineExpr { rows, cols, constant, terms: self.terms.iter().map(|(&k, c)| (k, f(c))).collect() }
    }

    /// `m * self`.
    pub fn lmul(&self, m: &Mat) -> Self {
        assert_eq!(m.ncols(), self.rows, "lmul dimension mismatch");
        self.map(|c| m * c)
    }

    /// `self * m`.
    pub fn rmul(&self, m: &Mat) -> Self {
        assert_eq!(self.cols, m.nrows(), "rmul dimension mismatch");
        self.map(|c| c * m)
    }

    pub fn t(&self) -> Self {
        self.map(|c| c.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c * s)
    }

    /// Product of two expressions; rejected unless one side is constant.
    pub fn mul(&self, other: &AffineExpr) -> Result<Self> {
        if self.is_constant() {
            Ok(other.lmul(&self.constant))
        } else if other.is_constant() {
            Ok(self.rmul(&other.constant))
        } else {
            Err(Error::NonAffine)
        }
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut m = self.constant.clone();
        for (&k, c) in &self.terms {
            m += c * x[k];
        }
        m
    }

    /// Places blocks on a grid. `rows`/`cols` give block sizes; missing
    /// entries are zero.
    pub fn grid(rows: &[usize], cols: &[usize], entries: &[(usize, usize, &AffineExpr)]) -> Self {
        let rtot = rows.iter().sum();
        let ctot = cols.iter().sum();
        let roff: Vec<usize> = rows.iter().scan(0, |s, &r| { let o = *s; *s += r; Some(o) }).collect();
        let coff: Vec<usize> = cols.iter().scan(0, |s, &c| { let o = *s; *s += c; Some(o) }).collect();
        let mut out = AffineExpr::zeros(rtot, ctot);
        for &(bi, bj, e) in entries {
            assert_eq!(e.shape(), (rows[bi], cols[bj]), "grid block ({bi},{bj}) has wrong shape");
            out.constant.view_mut((roff[bi], coff[bj]), e.shape()).copy_from(&e.constant);
            for (&k, c) in &e.terms {
                let t = out.terms.entry(k).or_insert_with(|| zeros(rtot, ctot));
                t.view_mut((roff[bi], coff[bj]), e.shape()).copy_from(c);
            }
        }
        out
    }

    /// Symmetric block matrix from its upper-triangular blocks (i <= j);
    /// lower blocks are the transposes.
    pub fn sym_blocks(sizes: &[usize], upper: &[(usize, usize, &AffineExpr)]) -> Self {
        let lower: Vec<AffineExpr> = upper.iter().filter(|(i, j, _)| i != j).map(|(_, _, e)| e.t()).collect();
        let mut entries: Vec<(usize, usize, &AffineExpr)> = upper.to_vec();
        let mut li = 0;
        for &(i, j, _) in upper {
            if i != j {
                entries.push((j, i, &lower[li]));
                li += 1;
            }
        }
        Self::grid(sizes, sizes, &entries)
    }

    pub fn hstack(parts: &[&AffineExpr]) -> Self {
        let rows = parts[0].rows;
        let cols: Vec<usize> = parts.iter().map(|p| p.cols).collect();
        let entries: Vec<(usize, usize, &AffineExpr)> = parts.iter().enumerate().map(|(j, p)| (0, j, *p)).collect();
        Self::grid(&[rows], &cols, &entries)
    }

    pub fn vstack(parts: &[&AffineExpr]) -> Self {
        let cols = parts[0].cols;
        let rows: Vec<usize> = parts.iter().map(|p| p.rows).collect();
        let entries: Vec<(usize, usize, &AffineExpr)> = parts.iter().enumerate().map(|(i, p)| (i, 0, *p)).collect();
        Self::grid(&rows, &[cols], &entries)
    }

    pub fn block_diag(parts: &[&AffineExpr]) -> Self {
        let rows: Vec<usize> = parts.iter().map(|p| p.rows).collect();
        let cols: Vec<usize> = parts.iter().map(|p| p.cols).collect();
        let entries: Vec<(usize, usize, &AffineExpr)> = parts.iter().enumerate().map(|(i, p)| (i, i, *p)).collect();
        Self::grid(&rows, &cols, &entries)
    }

    /// `M' E M` for constant M.
    pub fn congruence(&self, m: &Mat) -> Self {
        self.rmul(m).lmul(&m.transpose())
    }

    /// `s * m` for a 1x1 expression `s`.
    pub fn scalar_times(&self, m: &Mat) -> Self {
        assert_eq!(self.shape(), (1, 1), "scalar_times needs a 1x1 expression");
        AffineExpr {
            rows: m.nrows(),
            cols: m.ncols(),
            constant: m * self.constant[(0, 0)],
            terms: self.terms.iter().map(|(&k, c)| (k, m * c[(0, 0)])).collect(),
        }
    }

    /// Largest absolute coefficient, used for scale estimates.
    pub fn max_abs(&self) -> f64 {
        std::iter::once(&self.constant).chain(self.terms.values()).map(crate::linalg::max_abs).fold(0.0, f64::max)
    }
}

impl Add for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        assert_eq!(self.shape(), rhs.shape(), "add dimension mismatch");
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (&k, c) in &rhs.terms {
            match out.terms.get_mut(&k) {
                Some(t) => *t += c,
                None => {
                    out.terms.insert(k, c.clone());
                }
            }
        }
        out
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: AffineExpr) -> AffineExpr {
        &self + &rhs
    }
}

impl Neg for &AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scale(-1.0)
    }
}

impl Sub for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        self + &(-rhs)
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        &self - &rhs
    }
}

impl Mul<f64> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, s: f64) -> AffineExpr {
        self.scale(s)
    }
}

impl From<Mat> for AffineExpr {
    fn from(m: Mat) -> Self {
        AffineExpr::constant(m)
    }
}

impl From<&Mat> for AffineExpr {
    fn from(m: &Mat) -> Self {
        AffineExpr::constant(m.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_variable_roundtrip() {
        let mut vs = VariableSet::new();
        let x = vs.symmetric("X", 3);
        let g = vs.general("G", 2, 3);
        assert_eq!(vs.len(), 6 + 6);
        let xv = Mat::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let gv = Mat::from_row_slice(2, 3, &[1.0, -1.0, 2.0, 0.5, 0.0, 7.0]);
        let mut p = vec![0.0; vs.len()];
        vs.pack(x, &xv, &mut p).unwrap();
        vs.pack(g, &gv, &mut p).unwrap();
        assert_eq!(vs.unpack(x, &p), xv);
        assert_eq!(vs.unpack(g, &p), gv);
        assert_eq!(vs.expr(x).eval(&p), xv);
        assert_eq!(vs.expr(g).eval(&p), gv);
        assert_eq!(vs.scalar_name(1), "X(1,0)");
    }

    #[test]
    fn products_of_variables_are_rejected() {
        let mut vs = VariableSet::new();
        let a = { let id = vs.scalar("a"); vs.expr(id) };
        let b = { let id = vs.scalar("b"); vs.expr(id) };
        assert!(matches!(a.mul(&b), Err(Error::NonAffine)));
        let c = AffineExpr::constant(Mat::from_element(1, 1, 3.0));
        assert_eq!(a.mul(&c).unwrap().eval(&[2.0, 0.0])[(0, 0)], 6.0);
    }

    #[test]
    fn symmetric_blocks() {
        let mut vs = VariableSet::new();
        let x = { let id = vs.symmetric("X", 2); vs.expr(id) };
        let g = { let id = vs.general("G", 2, 1); vs.expr(id) };
        let one = AffineExpr::identity(1);
        let e = AffineExpr::sym_blocks(&[2, 1], &[(0, 0, &x), (0, 1, &g), (1, 1, &one)]);
        let v: Vec<f64> = (1..=5).map(|k| k as f64).collect();
        let m = e.eval(&v);
        assert_eq!(m.shape(), (3, 3));
        assert_eq!(m, m.transpose());
        assert_eq!(m[(2, 0)], 4.0);
        assert_eq!(m[(2, 1)], 5.0);
    }
}
