//! Empirical constants behind the `≳` growth bounds.
//!
//! The bounds on `Γ`, `Ψ`, the `Γ` denominator and the per-stage entropy hold
//! up to constants that are not given explicitly. A calibration run measures
//! them once on the reference parameters; the committed fixture pins the
//! thresholds used by tests, half the measured minimum for lower bounds and
//! twice the measured maximum for the denominator.

use std::fmt;
use std::str::FromStr;

use crate::construction::driver::{run, DriverConfig};
use crate::construction::lemma::{gamma_psi_of_block, lemma_gammas, raw_breakpoints};
use crate::error::{Error, Result};

pub const REFERENCE_L: f64 = 0.25;
pub const REFERENCE_C: f64 = 10.0;
pub const REFERENCE_K_MAX: usize = 4;
/// Per-stage `(L, δ)` of the reference construction.
pub const REFERENCE_STAGES: [(f64, f64); 2] = [(0.25, 0.1), (0.25, 0.05)];

/// The committed calibration fixture.
pub const FIXTURE: &str = include_str!("../fixtures/calibration.txt");

/// `Γ`, `Ψ` and the denominator on the block ending at `N_k`, divided by
/// their predicted scales `L⁴√N_k`, `L³` and `L⁻³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRow {
    pub k: usize,
    pub n: usize,
    pub gamma_ratio: f64,
    pub psi_ratio: f64,
    pub denominator_ratio: f64,
}

/// `ε̂_{M}(σ)/(L⁴√M)` at the checkpoint of one construction stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRow {
    pub stage: usize,
    pub checkpoint: usize,
    pub l: f64,
    pub entropy_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub blocks: Vec<BlockRow>,
    pub stages: Vec<StageRow>,
}

impl Calibration {
    /// Runs the reference lemma sequences and the reference construction.
    pub fn measure() -> Result<Self> {
        let l = REFERENCE_L;
        let mut blocks = Vec::new();
        for k in 1..=REFERENCE_K_MAX {
            let spec = raw_breakpoints(l, REFERENCE_C, k)?;
            let g = lemma_gammas(&spec)?;
            let n = spec.len();
            let r = gamma_psi_of_block(&g)?;
            blocks.push(BlockRow {
                k,
                n,
                gamma_ratio: r.gamma / (l.powi(4) * (n as f64).sqrt()),
                psi_ratio: r.psi / l.powi(3),
                denominator_ratio: r.denominator * l.powi(3),
            });
        }
        let (ls, deltas) = REFERENCE_STAGES.iter().copied().unzip();
        let state = run(&DriverConfig::new(ls, deltas))?;
        let stages = state
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| StageRow {
                stage: r.stage,
                checkpoint: r.checkpoint,
                l: r.l,
                entropy_ratio: state.entropy[i][i] / (r.l.powi(4) * (r.checkpoint as f64).sqrt()),
            })
            .collect();
        Ok(Self { blocks, stages })
    }

    /// The committed fixture.
    pub fn committed() -> Result<Self> {
        FIXTURE.parse()
    }

    pub fn thresholds(&self) -> Thresholds {
        let min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        let max = self.blocks.iter().map(|b| b.denominator_ratio).fold(0.0, f64::max);
        Thresholds {
            gamma: 0.5 * min(&mut self.blocks.iter().map(|b| b.gamma_ratio)),
            psi: 0.5 * min(&mut self.blocks.iter().map(|b| b.psi_ratio)),
            denominator: 2.0 * max,
            entropy: 0.5 * min(&mut self.stages.iter().map(|s| s.entropy_ratio)),
        }
    }
}

/// Pinned constants: `Γ ≥ gamma·L⁴√N`, `Ψ ≥ psi·L³`, denominator
/// `≤ denominator·L⁻³`, `ε̂_M/√M ≥ entropy·L⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub gamma: f64,
    pub psi: f64,
    pub denominator: f64,
    pub entropy: f64,
}

impl fmt::Display for Calibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# block k n gamma_ratio psi_ratio denominator_ratio")?;
        for b in &self.blocks {
            writeln!(
                f,
                "block {} {} {:.17e} {:.17e} {:.17e}",
                b.k, b.n, b.gamma_ratio, b.psi_ratio, b.denominator_ratio
            )?;
        }
        writeln!(f, "# stage index checkpoint L entropy_ratio")?;
        for s in &self.stages {
            writeln!(f, "stage {} {} {:.17e} {:.17e}", s.stage, s.checkpoint, s.l, s.entropy_ratio)?;
        }
        Ok(())
    }
}

impl FromStr for Calibration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |line: &str| Error::Parse(format!("bad calibration line: {line}"));
        let mut out = Calibration { blocks: Vec::new(), stages: Vec::new() };
        for line in s.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| fields.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(line));
            let int = |i: usize| fields.get(i).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad(line));
            match (fields[0], fields.len()) {
                ("block", 6) => out.blocks.push(BlockRow {
                    k: int(1)?,
                    n: int(2)?,
                    gamma_ratio: num(3)?,
                    psi_ratio: num(4)?,
                    denominator_ratio: num(5)?,
                }),
                ("stage", 5) => out.stages.push(StageRow {
                    stage: int(1)?,
                    checkpoint: int(2)?,
                    l: num(3)?,
                    entropy_ratio: num(4)?,
                }),
                _ => return Err(bad(line)),
            }
        }
        if out.blocks.is_empty() || out.stages.is_empty() {
            return Err(Error::Parse("calibration needs block and stage rows".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trips_and_thresholds_are_positive() {
        let c = Calibration::committed().unwrap();
        assert_eq!(c.blocks.len(), REFERENCE_K_MAX);
        assert_eq!(c.stages.len(), REFERENCE_STAGES.len());
        let again: Calibration = c.to_string().parse().unwrap();
        assert_eq!(again, c);
        let t = c.thresholds();
        assert!(t.gamma > 0.0 && t.psi > 0.0 && t.entropy > 0.0 && t.denominator > 0.0);
    }

    #[test]
    fn fixture_matches_a_fresh_block_measurement() {
        let c = Calibration::committed().unwrap();
        let spec = raw_breakpoints(REFERENCE_L, REFERENCE_C, 1).unwrap();
        let r = gamma_psi_of_block(&lemma_gammas(&spec).unwrap()).unwrap();
        let ratio = r.gamma / (REFERENCE_L.powi(4) * (spec.len() as f64).sqrt());
        assert!((ratio - c.blocks[0].gamma_ratio).abs() < 1e-12 * ratio);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!("block 1 2 3".parse::<Calibration>().is_err());
        assert!("".parse::<Calibration>().is_err());
    }
}
