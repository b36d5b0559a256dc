//! LMI blocks and problems.

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_eig, symmetrize, Mat};
use crate::lmi::expr::{AffineExpr, VarId, VariableSet};
use crate::model::graph::{Edge, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    PositiveDefinite,
    NegativeDefinite,
    PositiveSemidefinite,
    NegativeSemidefinite,
}

impl Sense {
    /// +1 for positive senses, -1 for negative ones.
    pub fn sign(self) -> f64 {
        match self {
            Sense::PositiveDefinite | Sense::PositiveSemidefinite => 1.0,
            Sense::NegativeDefinite | Sense::NegativeSemidefinite => -1.0,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Sense::PositiveDefinite | Sense::NegativeDefinite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockTag {
    Edge(Edge),
    Node(NodeId),
    Label(usize),
    Global,
}

impl std::fmt::Display for BlockTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockTag::Edge(e) => write!(f, "edge {e}"),
            BlockTag::Node(n) => write!(f, "node {n}"),
            BlockTag::Label(l) => write!(f, "label {l}"),
            BlockTag::Global => write!(f, "global"),
        }
    }
}

/// One matrix inequality `expr (sense) 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    pub name: String,
    pub expr: AffineExpr,
    pub sense: Sense,
    pub tag: BlockTag,
    /// Strictness margin eps_s; strict blocks are solved with this margin
    /// and certified at half of it.
    pub margin: f64,
}

impl LmiBlock {
    pub fn new(name: impl Into<String>, expr: AffineExpr, sense: Sense, tag: BlockTag, margin: f64) -> Result<Self> {
        let name = name.into();
        let (r, c) = expr.shape();
        if r != c {
            return Err(Error::Dimension(format!("block {name} is {r}x{c}")));
        }
        let scale = expr.max_abs().max(1.0);
        let asym = |m: &Mat| max_abs(&(m - m.transpose()));
        if asym(expr.constant_part()) > 1e-9 * scale || expr.terms().values().any(|c| asym(c) > 1e-9 * scale) {
            return Err(Error::NotSymmetric(format!("block {name}")));
        }
        Ok(LmiBlock { name, expr, sense, tag, margin })
    }

    pub fn dim(&self) -> usize {
        self.expr.nrows()
    }

    /// `sign * F(x)`, which must be positive (semi)definite.
    pub fn signed_value(&self, x: &[f64]) -> Mat {
        symmetrize(&self.expr.eval(x)) * self.sense.sign()
    }

    /// Smallest eigenvalue of [`Self::signed_value`].
    pub fn signed_min_eig(&self, x: &[f64]) -> f64 {
        min_eig(&self.signed_value(x))
    }

    /// Certification threshold on the signed eigenvalue.
    pub fn threshold(&self) -> f64 {
        if self.sense.is_strict() {
            0.5 * self.margin
        } else {
            -0.5 * self.margin
        }
    }

    pub fn passes(&self, x: &[f64]) -> bool {
        self.signed_min_eig(x) >= self.threshold()
    }
}

/// Variables, blocks and an optional linear objective (minimized).
#[derive(Clone, Debug, Default)]
pub struct LmiProblem {
    pub vars: VariableSet,
    pub blocks: Vec<LmiBlock>,
    pub objective: Option<Vec<(usize, f64)>>,
    /// Label recorded in certificates, e.g. "primal" or "dual-slack".
    pub form: String,
}

impl LmiProblem {
    pub fn new(form: &str) -> Self {
        LmiProblem { form: form.to_string(), ..Default::default() }
    }

    pub fn push(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    /// Minimize the scalar variable `id`.
    pub fn minimize(&mut self, id: VarId) {
        let off = self.vars.get(id).offset();
        self.objective = Some(vec![(off, 1.0)]);
    }

    pub fn objective_value(&self, x: &[f64]) -> Option<f64> {
        self.objective.as_ref().map(|o| o.iter().map(|&(k, c)| c * x[k]).sum())
    }

    /// True iff every block passes its certification threshold at `x`.
    pub fn certify(&self, x: &[f64]) -> bool {
        x.len() == self.vars.len() && self.blocks.iter().all(|b| b.passes(x))
    }

    /// Structured dump of variables and blocks for debugging.
    pub fn dump(&self) -> serde_json::Value {
        let vars: Vec<_> = self
            .vars
            .vars()
            .iter()
            .map(|v| json!({"name": v.name, "rows": v.rows, "cols": v.cols, "kind": v.kind, "offset": v.offset()}))
            .collect();
        let blocks: Vec<_> = self
            .blocks
            .iter()
            .map(|b| {
                let coeffs: serde_json::Map<String, serde_json::Value> = b
                    .expr
                    .terms()
                    .iter()
                    .map(|(&k, c)| (self.vars.scalar_name(k), json!(crate::linalg::to_rows(c))))
                    .collect();
                json!({
                    "name": b.name,
                    "tag": b.tag.to_string(),
                    "sense": b.sense,
                    "margin": b.margin,
                    "constant": crate::linalg::to_rows(b.expr.constant_part()),
                    "coefficients": coeffs,
                })
            })
            .collect();
        json!({"form": self.form, "variables": vars, "blocks": blocks, "objective": self.objective})
    }
}

/// eps_s = 1e-7 (1 + data_norm).
pub fn strictness_margin(data_norm: f64) -> f64 {
    1e-7 * (1.0 + data_norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_senses() {
        let mut vs = VariableSet::new();
        let x = { let id = vs.scalar("x"); vs.expr(id) };
        let b = LmiBlock::new("x<0", x.clone(), Sense::NegativeDefinite, BlockTag::Global, 1e-7).unwrap();
        assert!(b.passes(&[-1.0]));
        assert!(!b.passes(&[0.0]));
        let s = LmiBlock::new("x>=0", x, Sense::PositiveSemidefinite, BlockTag::Global, 1e-7).unwrap();
        assert!(s.passes(&[0.0]));
        assert!(!s.passes(&[-1e-6]));
    }

    #[test]
    fn rejects_asymmetric_and_rectangular() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(LmiBlock::new("b", m.into(), Sense::PositiveDefinite, BlockTag::Global, 0.0).is_err());
        let r = Mat::zeros(2, 3);
        assert!(LmiBlock::new("b", r.into(), Sense::PositiveDefinite, BlockTag::Global, 0.0).is_err());
    }
}
