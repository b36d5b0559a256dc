//! Lifting a base plant over one block of l attempts (one success followed
//! by l - 1 losses).

use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{hstack, kron_eye, mat_pow, vstack, zeros, Mat};
use crate::lmi::lfr::{LfrSystem, OpenLoopFamily, OpenLoopSystem, UncertaintyStructure};
use crate::model::graph::ConstrainingGraph;
use crate::model::system::{IndexBlock, PerformanceIndex, StateSpace};

/// Uncertain actuation channel of a base plant. Per attempt:
/// `x+ += B_wu w_u`, `z += D_z_wu w_u`,
/// `z_u = radius (C_zu x + D_zu_w w + D_zu_u u + D_zu_wu w_u)`, `w_u = Delta z_u`
/// with `|Delta| <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Uncertainty {
    pub b_wu: Mat,
    pub d_z_wu: Mat,
    pub c_zu: Mat,
    pub d_zu_w: Mat,
    pub d_zu_u: Mat,
    pub d_zu_wu: Mat,
    pub radius: f64,
    pub structure: UncertaintyStructure,
}

impl Uncertainty {
    fn inputs(&self) -> usize {
        self.b_wu.ncols()
    }

    fn outputs(&self) -> usize {
        self.c_zu.nrows()
    }
}

/// x+ = A x + B w + B_u u, z = C x + D w + D_u u, plus an optional
/// uncertain channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BasePlant {
    pub a: Mat,
    pub b: Mat,
    pub b_u: Mat,
    pub c: Mat,
    pub d: Mat,
    pub d_u: Mat,
    pub uncertainty: Option<Uncertainty>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PlantFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "Bu")]
    b_u: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "Du")]
    d_u: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uncertainty: Option<UncertaintyFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct UncertaintyFile {
    #[serde(rename = "Bwu")]
    b_wu: Vec<Vec<f64>>,
    #[serde(rename = "Dzwu")]
    d_z_wu: Vec<Vec<f64>>,
    #[serde(rename = "Czu", default)]
    c_zu: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Dzuw", default)]
    d_zu_w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Dzuu", default)]
    d_zu_u: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Dzuwu", default)]
    d_zu_wu: Option<Vec<Vec<f64>>>,
    #[serde(default = "unit")]
    radius: f64,
    #[serde(default)]
    structure: UncertaintyStructure,
}

fn unit() -> f64 {
    1.0
}

fn m(rows: &[Vec<f64>], cols: usize) -> Result<Mat> {
    crate::linalg::from_rows(rows, Some(cols))
}

fn opt(rows: &Option<Vec<Vec<f64>>>, r: usize, c: usize) -> Result<Mat> {
    match rows {
        Some(v) if !v.is_empty() => {
            let x = m(v, c)?;
            if x.nrows() != r {
                return dim_err(format!("expected {r} rows, got {}", x.nrows()));
            }
            Ok(x)
        }
        _ => Ok(zeros(r, c)),
    }
}

impl BasePlant {
    pub fn new(a: Mat, b: Mat, b_u: Mat, c: Mat, d: Mat, d_u: Mat) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b_u.nrows() != n || c.ncols() != n {
            return dim_err("base plant state dimensions disagree");
        }
        if d.shape() != (c.nrows(), b.ncols()) || d_u.shape() != (c.nrows(), b_u.ncols()) {
            return dim_err("base plant feedthrough dimensions disagree");
        }
        Ok(BasePlant { a, b, b_u, c, d, d_u, uncertainty: None })
    }

    pub fn with_uncertainty(mut self, u: Uncertainty) -> Result<Self> {
        let (n, dw, du, dz) = (self.states(), self.b.ncols(), self.b_u.ncols(), self.c.nrows());
        let (nw, nz) = (u.inputs(), u.outputs());
        let shapes = [
            (u.b_wu.shape(), (n, nw)),
            (u.d_z_wu.shape(), (dz, nw)),
            (u.c_zu.shape(), (nz, n)),
            (u.d_zu_w.shape(), (nz, dw)),
            (u.d_zu_u.shape(), (nz, du)),
            (u.d_zu_wu.shape(), (nz, nw)),
        ];
        if let Some((got, want)) = shapes.iter().find(|(g, w)| g != w) {
            return dim_err(format!("uncertainty block has shape {got:?}, expected {want:?}"));
        }
        if !(u.radius >= 0.0) {
            return Err(Error::Invalid(format!("uncertainty radius must be nonnegative, got {}", u.radius)));
        }
        self.uncertainty = Some(u);
        Ok(self)
    }

    /// Two-state plant with multiplicative actuator uncertainty
    /// u_actual = (1 + radius * delta) u, used in the examples.
    pub fn example(radius: Option<f64>) -> Self {
        let r = |v: &[f64], rows: usize| Mat::from_row_slice(rows, v.len() / rows, v);
        let p = BasePlant::new(
            r(&[0.0, 1.0, 1.0, 1.0], 2),
            r(&[1.0, 1.0], 2),
            r(&[0.0, 1.0], 2),
            r(&[1.0, 1.0], 1),
            r(&[1.0], 1),
            r(&[1.0], 1),
        )
        .expect("consistent example");
        match radius {
            None => p,
            Some(rad) => {
                let u = Uncertainty {
                    b_wu: p.b_u.clone(),
                    d_z_wu: p.d_u.clone(),
                    c_zu: zeros(1, 2),
                    d_zu_w: zeros(1, 1),
                    d_zu_u: r(&[1.0], 1),
                    d_zu_wu: zeros(1, 1),
                    radius: rad,
                    structure: UncertaintyStructure::RepeatedScalar,
                };
                p.with_uncertainty(u).expect("consistent example")
            }
        }
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Plant with the uncertainty closed at a fixed delta.
    pub fn at_delta(&self, delta: f64) -> Result<BasePlant> {
        if self.uncertainty.is_none() {
            return Ok(self.clone());
        }
        let closed = self.step_lfr()?.close_scalar(delta)?;
        // Closed inputs are [w, u]; split them back.
        let dw = self.b.ncols();
        let b = closed.b();
        let d = closed.d();
        BasePlant::new(
            closed.a().clone(),
            b.columns(0, dw).into_owned(),
            b.columns(dw, b.ncols() - dw).into_owned(),
            closed.c().clone(),
            d.columns(0, dw).into_owned(),
            d.columns(dw, d.ncols() - dw).into_owned(),
        )
    }

    /// One attempt as an LFR with performance input [w, u] and output z.
    fn step_lfr(&self) -> Result<LfrSystem> {
        let o = lift_lfr(self, 1, Strategy::Zero)?;
        let l = &o.lfr;
        LfrSystem::new(
            l.a.clone(),
            l.b_wu.clone(),
            hstack(&[&l.b_wp, &o.b_u])?,
            l.c_zu.clone(),
            l.c_zp.clone(),
            l.d_zu_wu.clone(),
            hstack(&[&l.d_zu_wp, &o.d_zu_u])?,
            l.d_zp_wu.clone(),
            hstack(&[&l.d_zp_wp, &o.d_zp_u])?,
        )
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let f: PlantFile = serde_json::from_value(v.clone())?;
        let a = crate::linalg::from_rows(&f.a, None)?;
        let n = a.nrows();
        let b = m(&f.b, f.b.first().map_or(0, |r| r.len()))?;
        let b_u = m(&f.b_u, f.b_u.first().map_or(0, |r| r.len()))?;
        let c = m(&f.c, n)?;
        let d = m(&f.d, b.ncols())?;
        let d_u = m(&f.d_u, b_u.ncols())?;
        let p = BasePlant::new(a, b, b_u, c, d, d_u)?;
        match f.uncertainty {
            None => Ok(p),
            Some(u) => {
                let b_wu = m(&u.b_wu, u.b_wu.first().map_or(0, |r| r.len()))?;
                let nw = b_wu.ncols();
                let d_z_wu = m(&u.d_z_wu, nw)?;
                let nz = [&u.c_zu, &u.d_zu_w, &u.d_zu_u, &u.d_zu_wu]
                    .iter()
                    .find_map(|x| x.as_ref().filter(|v| !v.is_empty()).map(|v| v.len()))
                    .unwrap_or(nw);
                let unc = Uncertainty {
                    c_zu: opt(&u.c_zu, nz, n)?,
                    d_zu_w: opt(&u.d_zu_w, nz, p.b.ncols())?,
                    d_zu_u: opt(&u.d_zu_u, nz, p.b_u.ncols())?,
                    d_zu_wu: opt(&u.d_zu_wu, nz, nw)?,
                    b_wu,
                    d_z_wu,
                    radius: u.radius,
                    structure: u.structure,
                };
                p.with_uncertainty(unc)
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let t = crate::linalg::to_rows;
        let f = PlantFile {
            a: t(&self.a),
            b: t(&self.b),
            b_u: t(&self.b_u),
            c: t(&self.c),
            d: t(&self.d),
            d_u: t(&self.d_u),
            uncertainty: self.uncertainty.as_ref().map(|u| UncertaintyFile {
                b_wu: t(&u.b_wu),
                d_z_wu: t(&u.d_z_wu),
                c_zu: Some(t(&u.c_zu)),
                d_zu_w: Some(t(&u.d_zu_w)),
                d_zu_u: Some(t(&u.d_zu_u)),
                d_zu_wu: Some(t(&u.d_zu_wu)),
                radius: u.radius,
                structure: u.structure,
            }),
        };
        serde_json::to_value(f).expect("plant serializes")
    }
}

/// Nominal lifted plant for one label.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPlant {
    pub a: Mat,
    pub b_w: Mat,
    pub b_u: Mat,
    pub c: Mat,
    pub d_w: Mat,
    pub d_u: Mat,
}

impl LiftedPlant {
    /// (A, B_w, C, D_w), the performance channel only.
    pub fn performance(&self) -> StateSpace {
        StateSpace::new(self.a.clone(), self.b_w.clone(), self.c.clone(), self.d_w.clone()).expect("lifted dimensions agree")
    }

    /// Closed with u = K x.
    pub fn close(&self, k: &Mat) -> Result<StateSpace> {
        StateSpace::new(&self.a + &self.b_u * k, self.b_w.clone(), &self.c + &self.d_u * k, self.d_w.clone())
    }
}

/// Per-step data as one system with inputs [w; w_u; u] and outputs [z; z_u].
struct StepData {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
    dw: usize,
    nw: usize,
    du: usize,
    dz: usize,
    nz: usize,
}

fn step_data(p: &BasePlant) -> Result<StepData> {
    let (n, dw, du, dz) = (p.states(), p.b.ncols(), p.b_u.ncols(), p.c.nrows());
    let (b_wu, d_z_wu, c_zu, d_zu_w, d_zu_wu, d_zu_u) = match &p.uncertainty {
        Some(u) => (u.b_wu.clone(), u.d_z_wu.clone(), &u.c_zu * u.radius, &u.d_zu_w * u.radius, &u.d_zu_wu * u.radius, &u.d_zu_u * u.radius),
        None => (zeros(n, 0), zeros(dz, 0), zeros(0, n), zeros(0, dw), zeros(0, 0), zeros(0, du)),
    };
    let (nw, nz) = (b_wu.ncols(), c_zu.nrows());
    Ok(StepData {
        a: p.a.clone(),
        b: hstack(&[&p.b, &b_wu, &p.b_u])?,
        c: vstack(&[&p.c, &c_zu])?,
        d: vstack(&[&hstack(&[&p.d, &d_z_wu, &p.d_u])?, &hstack(&[&d_zu_w, &d_zu_wu, &d_zu_u])?])?,
        dw,
        nw,
        du,
        dz,
        nz,
    })
}

/// Toeplitz lift over l steps: x(l) = A^l x0 + sum_j A^{l-1-j} B v_j,
/// y_r = C A^r x0 + sum_{j<r} C A^{r-1-j} B v_j + D v_r.
struct Toeplitz {
    a: Mat,
    /// Column block j: input of step j.
    b: Vec<Mat>,
    /// Row block r: output of step r.
    c: Vec<Mat>,
    /// d[r][j]
    d: Vec<Vec<Mat>>,
}

fn toeplitz(s: &StepData, l: usize) -> Toeplitz {
    let pw: Vec<Mat> = (0..=l).map(|k| mat_pow(&s.a, k)).collect();
    let (ny, nv) = (s.d.nrows(), s.d.ncols());
    Toeplitz {
        a: pw[l].clone(),
        b: (0..l).map(|j| &pw[l - 1 - j] * &s.b).collect(),
        c: (0..l).map(|r| &s.c * &pw[r]).collect(),
        d: (0..l)
            .map(|r| {
                (0..l)
                    .map(|j| match r.cmp(&j) {
                        std::cmp::Ordering::Equal => s.d.clone(),
                        std::cmp::Ordering::Greater => &s.c * &pw[r - 1 - j] * &s.b,
                        std::cmp::Ordering::Less => zeros(ny, nv),
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Input column selection: (offset, width) inside a step input.
fn take_cols(m: &Mat, off: usize, w: usize) -> Mat {
    m.columns(off, w).into_owned()
}

fn take_rows(m: &Mat, off: usize, h: usize) -> Mat {
    m.rows(off, h).into_owned()
}

/// u columns of a lifted row block `row(j)` under the strategy.
fn u_columns(s: &StepData, l: usize, strategy: Strategy, row: impl Fn(usize) -> Mat) -> Mat {
    let off = s.dw + s.nw;
    match strategy {
        Strategy::Zero => take_cols(&row(0), off, s.du),
        Strategy::Hold => (0..l).map(|j| take_cols(&row(j), off, s.du)).fold(zeros(row(0).nrows(), s.du), |acc, m| acc + m),
    }
}

/// (B, D) parts of one input kind across all steps, restricted to output rows `rows`.
fn lifted_parts(t: &Toeplitz, l: usize, off: usize, width: usize, rows: (usize, usize)) -> (Mat, Mat) {
    let b = hstack(&(0..l).map(|j| take_cols(&t.b[j], off, width)).collect::<Vec<_>>().iter().collect::<Vec<_>>()).expect("rows agree");
    let d_rows: Vec<Mat> = (0..l)
        .map(|r| {
            let blocks: Vec<Mat> = (0..l).map(|j| take_cols(&take_rows(&t.d[r][j], rows.0, rows.1), off, width)).collect();
            hstack(&blocks.iter().collect::<Vec<_>>()).expect("rows agree")
        })
        .collect();
    (b, vstack(&d_rows.iter().collect::<Vec<_>>()).expect("cols agree"))
}

fn stack_rows(t: &Toeplitz, l: usize, off: usize, h: usize) -> Mat {
    let rows: Vec<Mat> = (0..l).map(|r| take_rows(&t.c[r], off, h)).collect();
    vstack(&rows.iter().collect::<Vec<_>>()).expect("cols agree")
}

fn check_label(l: usize) -> Result<()> {
    if l < 1 {
        return Err(Error::Invalid("label must be at least 1".into()));
    }
    Ok(())
}

/// Nominal lift (uncertainty at delta = 0) under the given strategy.
pub fn lift(p: &BasePlant, l: usize, strategy: Strategy) -> Result<LiftedPlant> {
    check_label(l)?;
    let nominal = BasePlant { uncertainty: None, ..p.clone() };
    let s = step_data(&nominal)?;
    let t = toeplitz(&s, l);
    let (b_w, d_w) = lifted_parts(&t, l, 0, s.dw, (0, s.dz));
    let b_u = u_columns(&s, l, strategy, |j| t.b[j].clone());
    let d_u_rows: Vec<Mat> = (0..l).map(|r| u_columns(&s, l, strategy, |j| take_rows(&t.d[r][j], 0, s.dz))).collect();
    Ok(LiftedPlant {
        a: t.a.clone(),
        b_w,
        b_u,
        c: stack_rows(&t, l, 0, s.dz),
        d_w,
        d_u: vstack(&d_u_rows.iter().collect::<Vec<_>>())?,
    })
}

pub fn lift_zero(p: &BasePlant, l: usize) -> Result<LiftedPlant> {
    lift(p, l, Strategy::Zero)
}

pub fn lift_hold(p: &BasePlant, l: usize) -> Result<LiftedPlant> {
    lift(p, l, Strategy::Hold)
}

/// Lifted open loop as an LFR in the stacked per-step uncertainty channels.
/// Steps whose uncertainty output is identically zero are dropped together
/// with the matching uncertainty input, since their w_u vanishes.
pub fn lift_lfr(p: &BasePlant, l: usize, strategy: Strategy) -> Result<OpenLoopSystem> {
    check_label(l)?;
    let s = step_data(p)?;
    let t = toeplitz(&s, l);
    let (b_wp, d_zp_wp) = lifted_parts(&t, l, 0, s.dw, (0, s.dz));
    let (b_wu, d_zp_wu) = lifted_parts(&t, l, s.dw, s.nw, (0, s.dz));
    let (_, d_zu_wp) = lifted_parts(&t, l, 0, s.dw, (s.dz, s.nz));
    let (_, d_zu_wu) = lifted_parts(&t, l, s.dw, s.nw, (s.dz, s.nz));
    let c_zp = stack_rows(&t, l, 0, s.dz);
    let c_zu = stack_rows(&t, l, s.dz, s.nz);
    let b_u = u_columns(&s, l, strategy, |j| t.b[j].clone());
    let du_rows = |off: usize, h: usize| -> Result<Mat> {
        let rows: Vec<Mat> = (0..l).map(|r| u_columns(&s, l, strategy, |j| take_rows(&t.d[r][j], off, h))).collect();
        vstack(&rows.iter().collect::<Vec<_>>())
    };
    let d_zp_u = du_rows(0, s.dz)?;
    let d_zu_u = du_rows(s.dz, s.nz)?;

    // Steps with an identically zero uncertainty output.
    let keep: Vec<usize> = (0..l)
        .filter(|&r| {
            [&c_zu, &d_zu_wp, &d_zu_wu, &d_zu_u]
                .iter()
                .any(|m| m.rows(r * s.nz, s.nz).iter().any(|&v| v != 0.0))
        })
        .collect();
    let pick_rows = |m: &Mat| -> Mat {
        let parts: Vec<Mat> = keep.iter().map(|&r| take_rows(m, r * s.nz, s.nz)).collect();
        if parts.is_empty() {
            zeros(0, m.ncols())
        } else {
            vstack(&parts.iter().collect::<Vec<_>>()).expect("cols agree")
        }
    };
    let pick_cols = |m: &Mat| -> Mat {
        let parts: Vec<Mat> = keep.iter().map(|&j| take_cols(m, j * s.nw, s.nw)).collect();
        if parts.is_empty() {
            zeros(m.nrows(), 0)
        } else {
            hstack(&parts.iter().collect::<Vec<_>>()).expect("rows agree")
        }
    };
    let lfr = LfrSystem::new(
        t.a.clone(),
        pick_cols(&b_wu),
        b_wp,
        pick_rows(&c_zu),
        c_zp,
        pick_cols(&pick_rows(&d_zu_wu)),
        pick_rows(&d_zu_wp),
        pick_cols(&d_zp_wu),
        d_zp_wp,
    )?;
    OpenLoopSystem::new(lfr, b_u, pick_rows(&d_zu_u), d_zp_u)
}

/// Lifted open-loop family for every label of `g`.
pub fn lift_family(p: &BasePlant, g: &ConstrainingGraph, strategy: Strategy) -> Result<OpenLoopFamily> {
    let systems = (1..=g.num_labels()).map(|l| lift_lfr(p, l, strategy)).collect::<Result<Vec<_>>>()?;
    let structure = p.uncertainty.as_ref().map(|u| u.structure).unwrap_or_default();
    OpenLoopFamily::new(systems, vec![structure; g.num_labels()])
}

/// Per label l: (I_l kron Q, I_l kron S, I_l kron R).
pub fn lift_index(base: &IndexBlock, g: &ConstrainingGraph) -> Result<PerformanceIndex> {
    let blocks = (1..=g.num_labels())
        .map(|l| IndexBlock::new(kron_eye(l, base.q()), kron_eye(l, base.s()), kron_eye(l, base.r())))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerformanceIndex::new(blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eye;

    fn mat(r: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, v.len() / r, v)
    }

    #[test]
    fn example_lift_two() {
        let p = BasePlant::example(None);
        let lp = lift_zero(&p, 2).unwrap();
        assert_eq!(lp.a, mat(2, &[1.0, 1.0, 1.0, 2.0]));
        assert_eq!(lp.b_w, mat(2, &[1.0, 1.0, 2.0, 1.0]));
        assert_eq!(lp.b_u, mat(2, &[1.0, 1.0]));
        assert_eq!(lp.c, mat(2, &[1.0, 1.0, 1.0, 2.0]));
        assert_eq!(lp.d_w, mat(2, &[1.0, 0.0, 2.0, 1.0]));
        assert_eq!(lp.d_u, mat(2, &[1.0, 1.0]));
        let one = lift_zero(&p, 1).unwrap();
        assert_eq!((one.a, one.b_w, one.d_u), (p.a.clone(), p.b.clone(), p.d_u.clone()));
    }

    #[test]
    fn hold_examples() {
        let p = BasePlant::example(None);
        assert_eq!(lift_hold(&p, 2).unwrap().b_u, mat(2, &[1.0, 2.0]));
        assert_eq!(lift_hold(&p, 1).unwrap(), lift_zero(&p, 1).unwrap());
        let s = BasePlant::new(mat(1, &[0.5]), mat(1, &[1.0]), mat(1, &[1.0]), mat(1, &[1.0]), mat(1, &[0.0]), mat(1, &[0.0])).unwrap();
        assert!((lift_hold(&s, 3).unwrap().b_u[(0, 0)] - 1.75).abs() < 1e-15);
    }

    #[test]
    fn uncertain_lift_prunes_lossy_steps() {
        let p = BasePlant::example(Some(0.5));
        let o = lift_lfr(&p, 2, Strategy::Zero).unwrap();
        assert_eq!((o.lfr.unc_inputs(), o.lfr.unc_outputs()), (1, 1));
        assert_eq!(o.lfr.b_wu, mat(2, &[1.0, 1.0]));
        assert_eq!(o.lfr.d_zp_wu, mat(2, &[1.0, 1.0]));
        assert_eq!(o.d_zu_u, mat(1, &[0.5]));
        let h = lift_lfr(&p, 3, Strategy::Hold).unwrap();
        assert_eq!(h.lfr.unc_inputs(), 3);
        // delta = 1 doubles the actuation.
        let closed = o.lfr.close_scalar(1.0).unwrap();
        let nominal = lift_zero(&p, 2).unwrap();
        let b_total = closed.b().columns(0, 2).into_owned();
        assert_eq!(b_total, nominal.b_w);
    }

    #[test]
    fn at_delta_scales_actuation() {
        let p = BasePlant::example(Some(0.5)).at_delta(0.4).unwrap();
        assert!((p.b_u[(1, 0)] - 1.2).abs() < 1e-15);
        assert!((p.d_u[(0, 0)] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn index_kronecker() {
        let g = ConstrainingGraph::self_loops(2);
        let base = IndexBlock::new(mat(2, &[1.0, 2.0, 2.0, 1.0]), zeros(2, 1), eye(1)).unwrap();
        let p = lift_index(&base, &g).unwrap();
        assert_eq!(p.get(1).unwrap(), &base);
        assert_eq!(p.get(2).unwrap().q(), &crate::linalg::block_diag(&[base.q(), base.q()]));
    }

    #[test]
    fn json_round_trip() {
        let p = BasePlant::example(Some(0.3));
        assert_eq!(BasePlant::from_json(&p.to_json()).unwrap(), p);
    }
}
