//! One `(N′, N; κ)` step: keep `γ₀..γ_{N′}` of the source measure, append a
//! reversed, halved block sequence on `(N′, N]`, and put mass
//! `κ = 1/K_{N−1}(1,1)` at `z = 1`.

use crate::construction::lemma::{
    lemma_breakpoints, lemma_gammas, LemmaBlockSpec, BREAKPOINT_CAP, DEFAULT_C, DEFAULT_C_GROWTH,
};
use crate::entropy::{entropy_from_pair, EntropyReport};
use crate::error::{Error, Result};
use crate::grid::{CircleGrid, DEFAULT_OVERSAMPLING};
use crate::measures::{extend_schur, kappa_choice, perturbed_schur, MeasureSpec, PerturbationBasis};
use crate::schur::SchurSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub l: f64,
    pub delta: f64,
    /// Starting constant for the block breakpoints.
    pub c: f64,
    /// Factor between successive constants tried for candidate blocks.
    pub c_growth: f64,
    /// Require `N` even, bumping `N′` by one when needed.
    pub even: bool,
    /// Largest `N` considered.
    pub max_n: usize,
}

impl TransformConfig {
    pub fn new(l: f64, delta: f64) -> Self {
        Self {
            l,
            delta,
            c: DEFAULT_C,
            c_growth: DEFAULT_C_GROWTH,
            even: false,
            max_n: BREAKPOINT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l <= 0.25) {
            return Err(Error::InvalidParameter(format!("L must lie in (0, 1/4], got {}", self.l)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.c >= 1.0) || !(self.c_growth > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need C ≥ 1 and growth > 1, got C = {}, growth = {}",
                self.c, self.c_growth
            )));
        }
        Ok(())
    }
}

/// Verified block specs in walk order: for each constant `c, c·growth, …`
/// the subsequence `k = 1, 2, …` until the gap check fails or the length
/// passes `max_n`. Constants stop once `N₁` exceeds `max_n`.
pub fn candidate_blocks(l: f64, c: f64, growth: f64, max_n: usize) -> Vec<LemmaBlockSpec> {
    let mut out: Vec<LemmaBlockSpec> = Vec::new();
    let mut c = c;
    while c / (l * l * l) <= max_n as f64 {
        let mut k = 1;
        while let Ok(spec) = lemma_breakpoints(l, c, k) {
            if spec.len() > max_n {
                break;
            }
            out.push(spec);
            k += 1;
        }
        c *= growth;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    /// Parameters `γ₀..γ_N` of the Bernstein–Szegő measure `μ₁`.
    pub mu1: SchurSequence,
    pub n_prime: usize,
    pub n: usize,
    pub block: LemmaBlockSpec,
    /// `ln κ` with `κ = 1/K_{N−1}(μ₁)(1,1)`.
    pub log_kappa: f64,
    /// `ln A`, `A = Φ_{N′+1}(μ₁)(1)`.
    pub log_a: f64,
}

impl TransformOutcome {
    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    /// `γ′_{N′+1}, …, γ′_N`.
    pub fn new_block(&self) -> &[f64] {
        &self.mu1.as_slice()[self.n_prime + 1..]
    }

    pub fn measure(&self) -> Result<MeasureSpec> {
        MeasureSpec::bernstein_szego(self.mu1.clone()).add_atom(self.kappa())
    }
}

/// `γ′_{N+1−t} = γ̂ₜ/2`: the halved block sequence in reverse order.
pub fn reversed_half_block(block: &SchurSequence) -> Result<SchurSequence> {
    SchurSequence::new(block.iter().rev().map(|g| 0.5 * g).collect())
}

/// Walks the candidate blocks and returns the first with `N ≥ 2N′` and
/// `κ < δ`.
///
/// `source` must hold at least `γ₀..γ_{N′}` (one more when `even` is set).
pub fn transform_step(
    source: &SchurSequence,
    n_prime: usize,
    cfg: &TransformConfig,
) -> Result<TransformOutcome> {
    cfg.validate()?;
    if n_prime == 0 {
        return Err(Error::InvalidParameter("N′ must be at least 1".into()));
    }
    let mut best_log_kappa = f64::INFINITY;
    for spec in candidate_blocks(cfg.l, cfg.c, cfg.c_growth, cfg.max_n) {
        let block_len = spec.len();
        let np = if cfg.even && (n_prime + block_len) % 2 == 1 {
            n_prime + 1
        } else {
            n_prime
        };
        if block_len < np {
            continue;
        }
        let n = np + block_len;
        if n > cfg.max_n {
            continue;
        }
        let prefix = source.prefix(np + 1)?;
        let block = reversed_half_block(&lemma_gammas(&spec)?)?;
        let mu1 = extend_schur(&prefix, &block)?;
        let log_kappa = kappa_choice(&mu1, n)?.ln;
        best_log_kappa = best_log_kappa.min(log_kappa);
        if log_kappa < cfg.delta.ln() {
            let log_a = prefix.iter().map(f64::ln_1p).sum();
            return Ok(TransformOutcome {
                mu1,
                n_prime: np,
                n,
                block: spec,
                log_kappa,
                log_a,
            });
        }
    }
    Err(Error::Infeasible {
        reason: format!(
            "no block with N ≤ {} gives κ < {} from N′ = {n_prime}",
            cfg.max_n, cfg.delta
        ),
        log_kappa: best_log_kappa,
    })
}

/// `ε̂_N(σ)` of the transformed measure, on the default grid.
pub fn step_entropy(outcome: &TransformOutcome) -> Result<EntropyReport> {
    let grid = CircleGrid::with_oversampling(outcome.n + 1, DEFAULT_OVERSAMPLING);
    step_entropy_on(outcome, grid)
}

pub fn step_entropy_on(outcome: &TransformOutcome, grid: CircleGrid) -> Result<EntropyReport> {
    let measure = outcome.measure()?;
    let density = measure.density_trace(grid)?;
    let basis = PerturbationBasis::new(&outcome.mu1, outcome.n, grid)?;
    let pair = basis.perturbed(outcome.kappa())?;
    let schur = perturbed_schur(&outcome.mu1, outcome.kappa(), outcome.n)?;
    entropy_from_pair(&measure, &density, &pair, &schur, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::lemma::raw_breakpoints;
    use crate::opuc::cd_kernel_at_one;

    #[test]
    fn candidates_walk_each_subsequence() {
        let c = candidate_blocks(0.25, 10.0, 1.25, 100_000);
        assert_eq!(c[0].breakpoints, vec![0, 640]);
        assert_eq!(c[1].breakpoints, vec![0, 800]);
        assert!(c
            .windows(2)
            .all(|w| w[0].c < w[1].c || (w[0].c == w[1].c && w[0].len() < w[1].len())));
        assert!(c.iter().all(|s| s.min_gap_ratio().map_or(true, |r| r >= 0.5)));
        assert!(c.iter().any(|s| s.breakpoints == vec![0, 800, 1977]));
    }

    #[test]
    fn first_step_from_lebesgue() {
        let cfg = TransformConfig::new(0.25, 0.1);
        let out = transform_step(&SchurSequence::zeros(2), 1, &cfg).unwrap();
        assert_eq!(out.n, 641);
        assert_eq!(out.mu1.len(), 642);
        assert!(out.kappa() < 0.1);
        assert!(out.log_a.abs() < 1e-15);
        // first candidate whose kernel exceeds 1/δ
        let k = cd_kernel_at_one(&out.mu1, out.n - 1).unwrap();
        assert!((k.ln + out.log_kappa).abs() < 1e-12);
        let gh = lemma_gammas(&raw_breakpoints(0.25, 10.0, 1).unwrap()).unwrap();
        for t in 1..=640 {
            assert_eq!(out.mu1[out.n + 1 - t], 0.5 * gh[t - 1]);
        }
    }

    #[test]
    fn even_bump_and_threshold_walk() {
        let mut cfg = TransformConfig::new(0.25, 0.1);
        cfg.even = true;
        let out = transform_step(&SchurSequence::zeros(3), 1, &cfg).unwrap();
        assert_eq!((out.n_prime, out.n), (2, 642));
        // an impossible δ walks up the candidates and then fails
        cfg.delta = 1e-300;
        cfg.max_n = 5000;
        assert!(matches!(
            transform_step(&SchurSequence::zeros(3), 1, &cfg),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn step_entropy_half_value() {
        let out = transform_step(&SchurSequence::zeros(2), 1, &TransformConfig::new(0.25, 0.1)).unwrap();
        let basis = PerturbationBasis::new(&out.mu1, out.n, CircleGrid::for_degree(out.n + 1)).unwrap();
        let pair = basis.perturbed(out.kappa()).unwrap();
        let ratio = (pair.log_value_at_one() - basis.log_unperturbed_at_one()).exp();
        assert!((ratio - 0.5).abs() < 1e-9);
        let e = step_entropy(&out).unwrap();
        assert!(e.entropy > 0.0 && e.atom_contribution > 0.0);
    }
}
