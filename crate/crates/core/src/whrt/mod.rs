//! Weakly-hard real-time constraints: "at least k successful attempts in
//! every window of n". Compiles a constraint into a constraining graph whose
//! labels are loss-run lengths plus one, and lifts a base plant over such
//! blocks.

mod lift;

pub use lift::{lift, lift_family, lift_hold, lift_index, lift_lfr, lift_zero, BasePlant, LiftedPlant, Uncertainty};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::file::Model;
use crate::model::graph::{ConstrainingGraph, Edge, NodeId};
use crate::model::system::IndexBlock;

/// What the actuator applies after a lost attempt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Apply zero.
    #[default]
    Zero,
    /// Hold the last successfully received input.
    Hold,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Zero => "zero",
            Strategy::Hold => "hold",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Strategy::Zero),
            "hold" => Ok(Strategy::Hold),
            _ => Err(Error::Invalid(format!("unknown strategy '{s}' (expected zero or hold)"))),
        }
    }
}

/// At least `min_hits` successes in every window of `window` attempts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhrtConstraint {
    pub window: usize,
    pub min_hits: usize,
    pub strategy: Strategy,
}

impl WhrtConstraint {
    pub fn new(min_hits: usize, window: usize, strategy: Strategy) -> Result<Self> {
        if window == 0 {
            return Err(Error::Invalid("window length must be at least 1".into()));
        }
        if min_hits == 0 {
            return Err(Error::Invalid("k = 0 admits unbounded loss runs".into()));
        }
        if min_hits > window {
            return Err(Error::Invalid(format!("k = {min_hits} exceeds window n = {window}")));
        }
        Ok(WhrtConstraint { window, min_hits, strategy })
    }

    /// Parses "whrt:<k>/<n>:<zero|hold>"; the strategy part is optional.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("malformed constraint '{s}' (expected whrt:<k>/<n>:<zero|hold>)"));
        let rest = s.trim().strip_prefix("whrt:").ok_or_else(bad)?;
        let mut parts = rest.split(':');
        let kn = parts.next().ok_or_else(bad)?;
        let strategy = match parts.next() {
            Some(p) => p.parse()?,
            None => Strategy::Zero,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        let (k, n) = kn.split_once('/').ok_or_else(bad)?;
        let k = k.trim().parse().map_err(|_| bad())?;
        let n = n.trim().parse().map_err(|_| bad())?;
        WhrtConstraint::new(k, n, strategy)
    }

    /// Longest admissible run of consecutive losses.
    pub fn max_losses(&self) -> usize {
        self.window - self.min_hits
    }

    /// Whether every length-`window` factor of `word` (true = success) has
    /// at least `min_hits` successes.
    pub fn admits(&self, word: &[bool]) -> bool {
        word.windows(self.window).all(|w| w.iter().filter(|&&b| b).count() >= self.min_hits)
    }
}

impl fmt::Display for WhrtConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "whrt:{}/{}:{}", self.min_hits, self.window, self.strategy)
    }
}

/// Outcome word of a label sequence: label l expands to one success
/// followed by l - 1 losses.
pub fn expand_labels(labels: &[usize]) -> Vec<bool> {
    let mut w = Vec::new();
    for &l in labels {
        w.push(true);
        w.extend(std::iter::repeat_n(false, l.saturating_sub(1)));
    }
    w
}

/// Splits a word that starts with a success into block labels.
pub fn word_labels(word: &[bool]) -> Option<Vec<usize>> {
    if word.first() != Some(&true) {
        return None;
    }
    let mut labels = Vec::new();
    for &b in word {
        if b {
            labels.push(1);
        } else {
            *labels.last_mut()? += 1;
        }
    }
    Some(labels)
}

/// Automaton over the last n-1 outcomes (bit i = outcome i steps ago, 1 =
/// success).
struct WindowAutomaton {
    c: WhrtConstraint,
    mask: u64,
}

impl WindowAutomaton {
    fn new(c: WhrtConstraint) -> Result<Self> {
        if c.window > 40 {
            return Err(Error::Invalid("window lengths above 40 are not supported".into()));
        }
        Ok(WindowAutomaton { c, mask: (1u64 << (c.window - 1)) - 1 })
    }

    fn all_ones(&self) -> u64 {
        self.mask
    }

    fn step(&self, s: u64, success: bool) -> Option<u64> {
        let window = (s << 1) | success as u64;
        let ones = (window & ((self.mask << 1) | 1)).count_ones() as usize;
        (ones >= self.c.min_hits).then_some(window & self.mask)
    }

    /// Block transition: one success then `r` losses, ending where a
    /// success is possible again.
    fn block(&self, s: u64, r: usize) -> Option<u64> {
        let mut t = self.step(s, true)?;
        for _ in 0..r {
            t = self.step(t, false)?;
        }
        self.step(t, true).map(|_| t)
    }
}

/// Builds the constraining graph of a constraint: block transitions of the
/// window automaton from the all-success state, minimized by partition
/// refinement and numbered in breadth-first order.
pub fn compile_graph(c: &WhrtConstraint) -> Result<ConstrainingGraph> {
    let c = WhrtConstraint::new(c.min_hits, c.window, c.strategy)?;
    let aut = WindowAutomaton::new(c)?;
    let max_r = c.max_losses();

    // Reachable block states.
    let start = aut.all_ones();
    let mut states = vec![start];
    let mut index: BTreeMap<u64, usize> = BTreeMap::from([(start, 0)]);
    let mut trans: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut k = 0;
    while k < states.len() {
        let s = states[k];
        let mut out = Vec::new();
        for r in 0..=max_r {
            if let Some(t) = aut.block(s, r) {
                let ti = *index.entry(t).or_insert_with(|| {
                    states.push(t);
                    states.len() - 1
                });
                out.push((r + 1, ti));
            }
        }
        trans.push(out);
        k += 1;
    }

    // Moore-style refinement: all states start in one class.
    let mut class = vec![0usize; states.len()];
    loop {
        let sigs: Vec<(usize, Vec<(usize, usize)>)> = (0..states.len())
            .map(|s| (class[s], trans[s].iter().map(|&(l, t)| (l, class[t])).collect()))
            .collect();
        let distinct: BTreeSet<_> = sigs.iter().cloned().collect();
        let ids: BTreeMap<_, usize> = distinct.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
        let next: Vec<usize> = sigs.iter().map(|s| ids[s]).collect();
        let stable = ids.len() == class.iter().collect::<BTreeSet<_>>().len();
        class = next;
        if stable {
            break;
        }
    }

    // Quotient edges, then BFS numbering from the all-success class.
    let mut qedges: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
    for (s, out) in trans.iter().enumerate() {
        for &(l, t) in out {
            qedges.entry(class[s]).or_default().insert((l, class[t]));
        }
    }
    let mut number: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut queue = VecDeque::from([class[0]]);
    number.insert(class[0], 1);
    while let Some(q) = queue.pop_front() {
        for &(_, t) in qedges.get(&q).into_iter().flatten() {
            if !number.contains_key(&t) {
                number.insert(t, number.len() as NodeId + 1);
                queue.push_back(t);
            }
        }
    }
    let mut edges: Vec<Edge> = qedges
        .iter()
        .flat_map(|(&q, out)| out.iter().map(move |&(l, t)| (q, l, t)))
        .map(|(q, l, t)| Edge::new(number[&q], number[&t], l))
        .collect();
    edges.sort_by_key(|e| (e.tail, e.label, e.head));
    let num_labels = edges.iter().map(|e| e.label).max().unwrap_or(1);
    ConstrainingGraph::checked(1..=number.len() as NodeId, edges, num_labels)
}

/// Model file content for a constraint and a base plant: the compiled graph,
/// the lifted open loop under the constraint's strategy and, when a base
/// index is given, the lifted index.
pub fn compile_model(c: &WhrtConstraint, plant: &BasePlant, index: Option<&IndexBlock>) -> Result<Model> {
    let graph = compile_graph(c)?;
    let open = lift_family(plant, &graph, c.strategy)?;
    let index = index.map(|b| lift_index(b, &graph)).transpose()?;
    let mut meta = serde_json::json!({ "constraint": c.to_string() });
    if let Some(u) = &plant.uncertainty {
        meta["radius"] = serde_json::json!(u.radius);
    }
    Ok(Model { graph, plant: open, index, whrt: Some(meta) })
}

/// Whether some walk of `g` carries exactly this label sequence.
pub fn accepts_labels(g: &ConstrainingGraph, labels: &[usize]) -> bool {
    let mut current: BTreeSet<NodeId> = g.nodes().iter().copied().collect();
    for &l in labels {
        current = current
            .iter()
            .flat_map(|&n| g.out_edges(n).iter().map(|&k| g.edge(k)))
            .filter(|e| e.label == l)
            .map(|e| e.head)
            .collect();
        if current.is_empty() {
            return false;
        }
    }
    true
}

/// Groups base samples into per-step blocks of `label` samples each.
pub fn pack_signal(base: &[Vec<f64>], labels: &[usize]) -> Result<Vec<Vec<f64>>> {
    let total: usize = labels.iter().sum();
    if base.len() != total {
        return Err(Error::Dimension(format!("signal has {} samples, walk spans {total}", base.len())));
    }
    let mut out = Vec::with_capacity(labels.len());
    let mut k = 0;
    for &l in labels {
        out.push(base[k..k + l].concat());
        k += l;
    }
    Ok(out)
}

/// Inverse of [`pack_signal`] for samples of dimension `dim`.
pub fn unpack_signal(blocks: &[Vec<f64>], labels: &[usize], dim: usize) -> Result<Vec<Vec<f64>>> {
    if blocks.len() != labels.len() {
        return Err(Error::Dimension(format!("{} blocks for {} walk steps", blocks.len(), labels.len())));
    }
    let mut out = Vec::new();
    for (b, &l) in blocks.iter().zip(labels) {
        if b.len() != l * dim {
            return Err(Error::Dimension(format!("block of length {} for label {l} and dimension {dim}", b.len())));
        }
        out.extend(b.chunks(dim.max(1)).map(|c| c.to_vec()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::graph::validate_graph;

    fn triples(g: &ConstrainingGraph) -> Vec<(NodeId, NodeId, usize)> {
        g.edges().iter().map(|e| (e.tail, e.head, e.label)).collect()
    }

    #[test]
    fn two_of_three() {
        let g = compile_graph(&WhrtConstraint::new(2, 3, Strategy::Zero).unwrap()).unwrap();
        assert_eq!(g.nodes(), &[1, 2]);
        assert_eq!(triples(&g), vec![(1, 1, 1), (1, 2, 2), (2, 1, 1)]);
        assert_eq!(g.num_labels(), 2);
    }

    #[test]
    fn trivial_constraints() {
        for (k, n) in [(1, 1), (3, 3)] {
            let g = compile_graph(&WhrtConstraint::new(k, n, Strategy::Zero).unwrap()).unwrap();
            assert_eq!(triples(&g), vec![(1, 1, 1)]);
        }
        assert!(WhrtConstraint::new(0, 3, Strategy::Zero).is_err());
        assert!(WhrtConstraint::new(4, 3, Strategy::Zero).is_err());
    }

    #[test]
    fn parse_round_trip() {
        let c = WhrtConstraint::parse("whrt:2/3:hold").unwrap();
        assert_eq!((c.min_hits, c.window, c.strategy), (2, 3, Strategy::Hold));
        assert_eq!(c.to_string(), "whrt:2/3:hold");
        assert_eq!(WhrtConstraint::parse("whrt:1/3").unwrap().strategy, Strategy::Zero);
        assert!(WhrtConstraint::parse("whrt:2-3:zero").is_err());
        assert!(WhrtConstraint::parse("whrt:0/3:zero").is_err());
    }

    #[test]
    fn one_of_three_against_brute_force() {
        let c = WhrtConstraint::new(1, 3, Strategy::Zero).unwrap();
        let g = compile_graph(&c).unwrap();
        assert_eq!(g.num_labels(), 3);
        assert!(validate_graph(&g).is_empty());
        for len in 1..=12 {
            for bits in 0u32..(1 << len) {
                let word: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
                if !word[0] || !word[len - 1] {
                    continue;
                }
                let mut padded = vec![true; 3];
                padded.extend(&word);
                padded.extend([true; 3]);
                let mut labels = word_labels(&word).unwrap();
                labels.push(1);
                assert_eq!(c.admits(&padded), accepts_labels(&g, &labels), "{word:?}");
            }
        }
    }

    #[test]
    fn packing() {
        let base = vec![vec![1.0], vec![2.0], vec![3.0]];
        let packed = pack_signal(&base, &[1, 2]).unwrap();
        assert_eq!(packed, vec![vec![1.0], vec![2.0, 3.0]]);
        assert_eq!(unpack_signal(&packed, &[1, 2], 1).unwrap(), base);
        assert!(pack_signal(&base, &[1, 1]).is_err());
    }
}
