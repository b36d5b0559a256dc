//! Property tests against independent oracles: frequency sweeps, stepped
//! simulation of the base plant, brute-force window checks and adjacency
//! matrix powers.

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix};
use proptest::prelude::*;

use csls::certify::{analyze_nominal, analyze_robust, AnalysisOptions, Criterion, Search};
use csls::linalg::{spectral_norm, Mat};
use csls::lmi::assemble::assemble_performance;
use csls::lmi::{Form, LfrFamily, MultiplierClass, Sharing};
use csls::model::{enumerate_walks, l2_index, ConstrainingGraph, StateSpace, SystemFamily};
use csls::sdp::{BisectOptions, NativeSolver};
use csls::sim::{empirical_l2_lb, simulate_base_word, SimOptions};
use csls::whrt::{accepts_labels, compile_graph, lift, pack_signal, unpack_signal, word_labels, BasePlant, Strategy as Outage, WhrtConstraint};

fn mat(rows: usize, cols: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(rows, cols, &v[..rows * cols])
}

/// Peak of the largest singular value of C (zI - A)^{-1} B + D on a
/// frequency grid, refined around the best grid point.
fn hinf_sweep(s: &StateSpace) -> f64 {
    let n = s.states();
    let cx = |m: &Mat| m.map(|v| Complex::new(v, 0.0));
    let (a, b, c, d) = (cx(s.a()), cx(s.b()), cx(s.c()), cx(s.d()));
    let gain = |w: f64| {
        let z = Complex::new(w.cos(), w.sin());
        let m = DMatrix::<Complex<f64>>::identity(n, n) * z - &a;
        let h = &c * m.try_inverse().expect("no poles on the unit circle") * &b + &d;
        h.singular_values().max()
    };
    let grid = 4000;
    let step = std::f64::consts::PI / grid as f64;
    let (mut best_w, mut best) = (0.0, gain(0.0));
    for k in 1..=grid {
        let w = k as f64 * step;
        let g = gain(w);
        if g > best {
            (best_w, best) = (w, g);
        }
    }
    let (mut lo, mut hi) = ((best_w - step).max(0.0), (best_w + step).min(std::f64::consts::PI));
    for _ in 0..60 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if gain(m1) < gain(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(gain(0.5 * (lo + hi)))
}

/// Random contractive system (spectral norm of A in [0.2, 0.9)) with n <= 3
/// states and at most two inputs/outputs.
fn stable_system() -> impl Strategy<Value = StateSpace> {
    (1usize..=3, 1usize..=2, 1usize..=2, prop::collection::vec(-1.0f64..1.0, 9 + 6 + 6 + 4), 0.2f64..0.9, any::<bool>()).prop_map(|(n, m, p, v, rho, feed)| {
        let a = mat(n, n, &v[0..9]);
        let r = spectral_norm(&a);
        let a = if r > 1e-9 { a * (rho / r) } else { a };
        let b = mat(n, m, &v[9..15]);
        let c = mat(p, n, &v[15..21]);
        let d = if feed { mat(p, m, &v[21..25]) * 0.5 } else { Mat::zeros(p, m) };
        StateSpace::new(a, b, c, d).unwrap()
    })
}

fn random_plant() -> impl Strategy<Value = BasePlant> {
    (1usize..=3, 1usize..=2, 1usize..=2, 1usize..=2, prop::collection::vec(-1.0f64..1.0, 9 + 6 + 6 + 6 + 4 + 4)).prop_map(|(n, dw, du, dz, v)| {
        BasePlant::new(
            mat(n, n, &v[0..9]),
            mat(n, dw, &v[9..15]),
            mat(n, du, &v[15..21]),
            mat(dz, n, &v[21..27]),
            mat(dz, dw, &v[27..31]),
            mat(dz, du, &v[31..35]),
        )
        .unwrap()
    })
}

fn self_loop(s: &StateSpace) -> (ConstrainingGraph, SystemFamily) {
    (ConstrainingGraph::self_loops(1), SystemFamily::new(vec![s.clone()]).unwrap())
}

fn tight() -> BisectOptions {
    BisectOptions { rel_tol: 1e-5, ..Default::default() }
}

#[test]
fn scalar_l2_matches_frequency_sweep() {
    let s = StateSpace::scalar(0.5, 1.0, 1.0, 0.0);
    let oracle = hinf_sweep(&s);
    assert!((oracle - 2.0).abs() < 1e-9);
    let (g, f) = self_loop(&s);
    let r = analyze_nominal(&g, &f, Criterion::L2, &AnalysisOptions::default(), &NativeSolver::default()).unwrap();
    assert!((r.gamma.unwrap() - oracle).abs() < 1e-3, "{:?}", r.gamma);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    /// Every form reaches the same bisection limit, which is the H-infinity
    /// norm for a single self-loop.
    #[test]
    fn forms_agree_on_stable_systems(s in stable_system()) {
        let (g, f) = self_loop(&s);
        let solver = NativeSolver::default();
        let oracle = hinf_sweep(&s);
        let mut limits = Vec::new();
        for form in Form::ALL {
            let opts = AnalysisOptions { form, search: Search::Bisect, bisect: tight(), ..Default::default() };
            let r = analyze_nominal(&g, &f, Criterion::L2, &opts, &solver).unwrap();
            prop_assert!(r.residuals().pass);
            limits.push(r.gamma.unwrap());
        }
        let lo = limits.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = limits.iter().cloned().fold(0.0, f64::max);
        prop_assert!((hi - lo) / hi <= 1e-3, "{limits:?}");
        prop_assert!((hi - oracle).abs() / oracle <= 1e-3, "{limits:?} vs {oracle}");
    }

    /// A robust problem without uncertainty channel is the nominal one.
    #[test]
    fn empty_uncertainty_reduces_to_nominal(s in stable_system()) {
        let (g, f) = self_loop(&s);
        let solver = NativeSolver::default();
        let opts = AnalysisOptions::default();
        let nominal = analyze_nominal(&g, &f, Criterion::L2, &opts, &solver).unwrap().gamma.unwrap();
        let lfr = LfrFamily::from_nominal(&f);
        let robust = analyze_robust(&g, &lfr, &MultiplierClass::scalar(1), Criterion::L2, &opts, &solver).unwrap().gamma.unwrap();
        prop_assert!((robust - nominal).abs() <= 1e-6 * nominal.max(1.0), "{robust} vs {nominal}");
    }

    /// Certified levels dominate sampled lower bounds.
    #[test]
    fn certificates_dominate_simulation(s in stable_system()) {
        let (g, f) = self_loop(&s);
        let r = analyze_nominal(&g, &f, Criterion::L2, &AnalysisOptions::default(), &NativeSolver::default()).unwrap();
        let gamma = r.gamma.unwrap();
        let lb = empirical_l2_lb(&g, &f, &SimOptions { horizon: 80, trials: 2, ..Default::default() }).unwrap();
        prop_assert!(lb.value <= gamma + 1e-6 * gamma.max(1.0), "{} > {gamma}", lb.value);
    }

    /// Assembled blocks are affine in the decision vector.
    #[test]
    fn blocks_are_affine(s in stable_system(), seed in prop::collection::vec(-2.0f64..2.0, 64), alpha in -1.5f64..2.5) {
        let (g, f) = self_loop(&s);
        let p = l2_index(3.0, &f).unwrap();
        for form in Form::ALL {
            let prob = assemble_performance(&g, &f, &p, form, Sharing::NONE).unwrap();
            let n = prob.vars.len();
            let x: Vec<f64> = (0..n).map(|k| seed[k % 64]).collect();
            let y: Vec<f64> = (0..n).map(|k| seed[(k * 7 + 3) % 64] - 0.5).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            for b in &prob.blocks {
                let lhs = b.expr.eval(&mix);
                let rhs = b.expr.eval(&x) * alpha + b.expr.eval(&y) * (1.0 - alpha);
                prop_assert!((lhs - rhs).amax() <= 1e-9 * (1.0 + b.expr.max_abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    /// Lifted steps reproduce the base plant stepped through the expanded
    /// outcome word.
    #[test]
    fn lifting_is_exact(p in random_plant(), labels in prop::collection::vec(1usize..=5, 1..4), v in prop::collection::vec(-1.0f64..1.0, 64), hold in any::<bool>()) {
        let strategy = if hold { Outage::Hold } else { Outage::Zero };
        let (n, dw, du) = (p.states(), p.b.ncols(), p.b_u.ncols());
        let word = csls::whrt::expand_labels(&labels);
        let mut it = v.iter().cycle().copied();
        let x0: Vec<f64> = (0..n).map(|_| it.next().unwrap()).collect();
        let w: Vec<Vec<f64>> = (0..word.len()).map(|_| (0..dw).map(|_| it.next().unwrap()).collect()).collect();
        let u: Vec<Vec<f64>> = (0..labels.len()).map(|_| (0..du).map(|_| it.next().unwrap()).collect()).collect();
        let (xs, zs) = simulate_base_word(&p, &word, strategy, &x0, &w, &u).unwrap();

        let mut x = nalgebra::DVector::from_column_slice(&x0);
        let (mut k, mut t) = (0usize, 0usize);
        for &l in &labels {
            let lp = lift(&p, l, strategy).unwrap();
            let ws = nalgebra::DVector::from_column_slice(&w[t..t + l].concat());
            let uk = nalgebra::DVector::from_column_slice(&u[k]);
            let z = &lp.c * &x + &lp.d_w * &ws + &lp.d_u * &uk;
            x = &lp.a * &x + &lp.b_w * &ws + &lp.b_u * &uk;
            let base_z = zs[t..t + l].concat();
            let scale = 1.0 + z.amax() + x.amax();
            for (a, b) in z.iter().zip(&base_z) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
            for (a, b) in x.iter().zip(&xs[t + l]) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
            t += l;
            k += 1;
        }
    }

    /// Packing base samples into lifted blocks preserves the l2 norm.
    #[test]
    fn packing_is_an_isometry(labels in prop::collection::vec(1usize..=4, 1..8), dim in 1usize..=3, v in prop::collection::vec(-3.0f64..3.0, 96)) {
        let total: usize = labels.iter().sum();
        let base: Vec<Vec<f64>> = (0..total).map(|t| (0..dim).map(|i| v[(t * dim + i) % 96]).collect()).collect();
        let packed = pack_signal(&base, &labels).unwrap();
        let e = |s: &[Vec<f64>]| s.iter().flatten().map(|x| x * x).sum::<f64>();
        prop_assert!((e(&base) - e(&packed)).abs() <= 1e-12 * (1.0 + e(&base)));
        prop_assert_eq!(unpack_signal(&packed, &labels, dim).unwrap(), base);
    }

    /// Walk enumeration counts equal row sums of adjacency powers.
    #[test]
    fn walk_counts_match_adjacency(min_hits in 1usize..=4, extra in 0usize..=2, len in 1usize..=6) {
        let c = WhrtConstraint::new(min_hits, min_hits + extra, Outage::Zero).unwrap();
        let g = compile_graph(&c).unwrap();
        let adj = g.adjacency_counts();
        let k = adj.len();
        let mut pow = vec![vec![0u64; k]; k];
        for (i, row) in pow.iter_mut().enumerate() {
            row[i] = 1;
        }
        for _ in 0..len {
            pow = (0..k).map(|i| (0..k).map(|j| (0..k).map(|m| pow[i][m] * adj[m][j]).sum()).collect()).collect();
        }
        for (i, &node) in g.nodes().iter().enumerate() {
            let walks = enumerate_walks(&g, node, len, 1_000_000).unwrap();
            prop_assert_eq!(walks.len() as u64, pow[i].iter().sum::<u64>());
            let distinct: BTreeSet<&[usize]> = walks.iter().map(|w| w.edges()).collect();
            prop_assert_eq!(distinct.len(), walks.len());
        }
    }
}

/// Label sequences of the compiled graph are exactly the block
/// decompositions of words admitted by the sliding-window check.
#[test]
fn whrt_language_equivalence() {
    for window in 1..=6usize {
        for min_hits in 1..=window {
            let c = WhrtConstraint::new(min_hits, window, Outage::Zero).unwrap();
            let g = compile_graph(&c).unwrap();
            for len in 1..=12usize {
                for bits in 0u32..(1 << len) {
                    let word: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
                    if !word[0] {
                        continue;
                    }
                    let mut padded = vec![true; window];
                    padded.extend(&word);
                    padded.extend(vec![true; window]);
                    let mut labels = word_labels(&word).unwrap();
                    labels.push(1);
                    let in_graph = labels.iter().all(|&l| l <= g.num_labels()) && accepts_labels(&g, &labels);
                    assert_eq!(c.admits(&padded), in_graph, "{c}: {word:?}");
                }
            }
        }
    }
}

#[test]
fn two_of_three_graph() {
    let g = compile_graph(&WhrtConstraint::parse("whrt:2/3:zero").unwrap()).unwrap();
    let triples: Vec<(u32, u32, usize)> = g.edges().iter().map(|e| (e.tail, e.head, e.label)).collect();
    assert_eq!(triples, vec![(1, 1, 1), (1, 2, 2), (2, 1, 1)]);
}
