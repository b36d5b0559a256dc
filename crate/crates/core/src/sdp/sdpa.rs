//! SDPA sparse file exchange.
//!
//! The program is written in the SDPA primal form
//! `minimize c'x  s.t.  sum_k x_k F_k - F_0 >= 0`, so the constant matrix is
//! stored negated. Entries are `matno block i j value` with 1-based
//! upper-triangular indices.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ConicProgram, SdpSolver, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Writes the program in ".dat-s" layout.
pub fn write_sdpa(p: &ConicProgram, out: &mut impl Write) -> Result<()> {
    if p.cones.is_empty() {
        return Err(Error::Invalid("empty constraint list".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{}", p.num_vars);
    let _ = writeln!(s, "{}", p.cones.len());
    let sizes: Vec<String> = p.cones.iter().map(|c| c.dim().to_string()).collect();
    let _ = writeln!(s, "{}", sizes.join(" "));
    let obj: Vec<String> = p.objective.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "{}", obj.join(" "));
    let mut entry = |matno: usize, blk: usize, m: &crate::linalg::Mat, sign: f64| {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = sign * m[(i, j)];
                if v != 0.0 {
                    let _ = writeln!(s, "{matno} {blk} {} {} {v}", i + 1, j + 1);
                }
            }
        }
    };
    for (b, c) in p.cones.iter().enumerate() {
        entry(0, b + 1, &c.f0, -1.0);
    }
    // Grouped by matrix number, as most readers expect.
    let mut by_var: Vec<Vec<(usize, &crate::linalg::Mat)>> = vec![Vec::new(); p.num_vars];
    for (b, c) in p.cones.iter().enumerate() {
        for (k, f) in &c.coeffs {
            by_var[*k].push((b + 1, f));
        }
    }
    for (k, list) in by_var.iter().enumerate() {
        for (b, f) in list {
            entry(k + 1, *b, f, 1.0);
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn emit_sdpa(p: &ConicProgram, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_sdpa(p, &mut f)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace() || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{t}' in solution file"))))
        .collect()
}

/// Reads a solver output file. SDPA layout ("phase.value", "xVec" followed
/// by a braced vector) and CSDP layout (first line is the x vector) are both
/// accepted. The status is refined by re-evaluating `p` at the point.
pub fn read_sdpa_solution(path: &Path, p: &ConicProgram) -> Result<SolveResult> {
    let text = std::fs::read_to_string(path)?;
    parse_solution(&text, p)
}

fn parse_solution(text: &str, p: &ConicProgram) -> Result<SolveResult> {
    let (status, x) = if text.contains("xVec") {
        let phase = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("phase.value").map(|r| r.trim_start_matches([' ', '=']).trim().to_string()))
            .unwrap_or_default();
        let status = if phase == "pdOPT" || phase == "pFEAS" || phase == "pdFEAS" {
            SolveStatus::Optimal
        } else if phase.contains("INF") {
            SolveStatus::Infeasible
        } else {
            SolveStatus::NumericalFailure
        };
        let after = &text[text.find("xVec").unwrap()..];
        let open = after.find('{').ok_or_else(|| Error::Format("xVec without '{'".into()))?;
        let close = after[open..].find('}').ok_or_else(|| Error::Format("xVec without '}'".into()))?;
        (status, parse_floats(&after[open + 1..open + close])?)
    } else {
        let first = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| Error::Format("empty solution file".into()))?;
        (SolveStatus::Optimal, parse_floats(first)?)
    };
    if status != SolveStatus::Optimal {
        return Ok(SolveResult::failed(status, 0));
    }
    if x.len() != p.num_vars {
        return Err(Error::Format(format!("solution has {} entries, program has {} variables", x.len(), p.num_vars)));
    }
    Ok(SolveResult {
        status,
        residual: p.max_residual(&x),
        objective: Some(p.objective.iter().zip(&x).map(|(c, v)| c * v).sum()),
        x: Some(x),
        iterations: 0,
    })
}

/// External solver invoked as `<command> <input.dat-s> <output>`.
#[derive(Clone, Debug)]
pub struct SdpaSolver {
    pub command: String,
}

static COUNTER: AtomicUsize = AtomicUsize::new(0);

impl SdpaSolver {
    pub fn new(command: &str) -> Self {
        SdpaSolver { command: command.to_string() }
    }

    fn scratch(&self) -> PathBuf {
        let k = COUNTER.fetch_add(1, Ordering::Relaxed);
        std::env::temp_dir().join(format!("csls-sdpa-{}-{k}", std::process::id()))
    }
}

impl SdpSolver for SdpaSolver {
    fn name(&self) -> String {
        format!("sdpa:{}", self.command)
    }

    fn solve(&self, p: &ConicProgram) -> Result<SolveResult> {
        let base = self.scratch();
        let input = base.with_extension("dat-s");
        let output = base.with_extension("out");
        emit_sdpa(p, &input)?;
        let mut parts = self.command.split_whitespace();
        let prog = parts.next().ok_or_else(|| Error::Solver("empty solver command".into()))?;
        let run = Command::new(prog).args(parts).arg(&input).arg(&output).output();
        let result = match run {
            Err(e) => Err(Error::Solver(format!("cannot run '{}': {e}", self.command))),
            Ok(o) => {
                if !o.stderr.is_empty() {
                    log::debug!("{}: {}", self.command, String::from_utf8_lossy(&o.stderr));
                }
                match std::fs::read_to_string(&output) {
                    Ok(text) => parse_solution(&text, p),
                    Err(_) if !o.status.success() => Ok(SolveResult::failed(SolveStatus::NumericalFailure, 0)),
                    Err(e) => Err(e.into()),
                }
            }
        };
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::sdp::ConeConstraint;

    fn one_var(f0: f64) -> ConicProgram {
        ConicProgram {
            num_vars: 1,
            objective: vec![1.0],
            cones: vec![ConeConstraint { name: "x".into(), f0: Mat::from_element(1, 1, f0), coeffs: vec![(0, Mat::from_element(1, 1, 1.0))] }],
        }
    }

    #[test]
    fn one_variable_file() {
        let mut buf = Vec::new();
        write_sdpa(&one_var(0.0), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "1\n1\n1\n1\n1 1 1 1 1\n");
        let mut buf = Vec::new();
        write_sdpa(&one_var(-1.0), &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("0 1 1 1 1\n"));
    }

    #[test]
    fn reads_both_layouts() {
        let p = one_var(-1.0);
        let sdpa = "phase.value = pdOPT\nobjValPrimal = 1.0\nxVec = \n{1.000000001}\nxMat = \n";
        let r = parse_solution(sdpa, &p).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x.unwrap()[0] - 1.0).abs() < 1e-8);
        let csdp = "1.5 \n1 1 1 1 0.5\n";
        assert_eq!(parse_solution(csdp, &p).unwrap().x.unwrap(), vec![1.5]);
        let inf = "phase.value = pINF_dFEAS\nxVec = \n{0}\n";
        assert_eq!(parse_solution(inf, &p).unwrap().status, SolveStatus::Infeasible);
        assert!(parse_solution("phase.value = pdOPT\nxVec = {1, 2}", &p).is_err());
    }
}
