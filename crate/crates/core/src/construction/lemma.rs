//! Block-constant parameter sequences with large `Γ`, and the `Γ`/`Ψ`
//! functionals themselves.

use crate::error::{Error, Result};
use crate::logsum::{compensated_sum, LogSumExp};
use crate::schur::SchurSequence;

/// Largest breakpoint the generator will produce.
pub const BREAKPOINT_CAP: usize = 10_000_000;
/// Default constant in `N₁ = ⌈C·L⁻³⌉`.
pub const DEFAULT_C: f64 = 10.0;
/// Factor applied to `C` on each automatic retry.
pub const DEFAULT_C_GROWTH: f64 = 1.25;
const MAX_C_RETRIES: usize = 32;

/// Upper constant in `Σγ̂² ≤ c₂L²`: `1 + Σ j⁻⁴ = 1 + π⁴/90`.
pub fn sum_sq_upper_constant() -> f64 {
    1.0 + std::f64::consts::PI.powi(4) / 90.0
}

/// Lower constant in `c₁L² ≤ Σγ̂²` (the last block alone contributes `L²`).
pub const SUM_SQ_LOWER_CONSTANT: f64 = 1.0;

/// Breakpoints `0 = N₀ < N₁ < … < N_k` of a block sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaBlockSpec {
    pub l: f64,
    pub c: f64,
    /// `N₀ = 0, N₁, …, N_{k_max}`.
    pub breakpoints: Vec<usize>,
}

impl LemmaBlockSpec {
    pub fn k_max(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `N_{k_max}`.
    pub fn len(&self) -> usize {
        *self.breakpoints.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `βⱼ = j⁻²` for `j < k_max`, `β_{k_max} = 1`.
    pub fn betas(&self) -> Vec<f64> {
        let k = self.k_max();
        (1..=k)
            .map(|j| if j == k { 1.0 } else { 1.0 / (j * j) as f64 })
            .collect()
    }

    /// The same spec truncated to its first `k` blocks.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k_max() {
            return Err(Error::OutOfRange {
                requested: k,
                available: self.k_max(),
            });
        }
        Ok(Self {
            l: self.l,
            c: self.c,
            breakpoints: self.breakpoints[..=k].to_vec(),
        })
    }

    /// Smallest `(N_{j+1} − N_j)/N_{j+1}` over `j ≥ 1`, `None` for one block.
    pub fn min_gap_ratio(&self) -> Option<f64> {
        self.breakpoints[1..]
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / w[1] as f64)
            .reduce(f64::min)
    }
}

fn validate(l: f64, c: f64, k_max: usize) -> Result<()> {
    if !(l > 0.0 && l <= 0.25) {
        return Err(Error::InvalidParameter(format!("L must lie in (0, 1/4], got {l}")));
    }
    if !(c >= 1.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be at least 1, got {c}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be positive".into()));
    }
    Ok(())
}

/// The recursion `N_{j+1} = N_j + ⌊j⁻² exp(L Σ_{i≤j} √(N_i − N_{i−1})/i²)⌋`,
/// `N₁ = ⌈C·L⁻³⌉`, without the gap check.
pub fn raw_breakpoints(l: f64, c: f64, k_max: usize) -> Result<LemmaBlockSpec> {
    validate(l, c, k_max)?;
    let first = (c / (l * l * l)).ceil();
    if first > BREAKPOINT_CAP as f64 {
        return Err(Error::KMaxTooLarge {
            requested: k_max,
            largest_feasible: 0,
        });
    }
    let mut n = vec![0usize, first as usize];
    let mut weighted = 0.0;
    for j in 1..k_max {
        weighted += ((n[j] - n[j - 1]) as f64).sqrt() / (j * j) as f64;
        let step = ((l * weighted).exp() / (j * j) as f64).floor();
        if !step.is_finite() || n[j] as f64 + step > BREAKPOINT_CAP as f64 {
            return Err(Error::KMaxTooLarge {
                requested: k_max,
                largest_feasible: j,
            });
        }
        if step < 1.0 {
            return Err(Error::CTooSmall {
                c,
                reason: format!("breakpoint increment after N_{j} is zero"),
            });
        }
        n.push(n[j] + step as usize);
    }
    Ok(LemmaBlockSpec {
        l,
        c,
        breakpoints: n,
    })
}

/// Breakpoints with the gap property `N_{j+1} − N_j ≥ N_{j+1}/2` and
/// `γ̂ < 1/2` verified.
pub fn lemma_breakpoints(l: f64, c: f64, k_max: usize) -> Result<LemmaBlockSpec> {
    let spec = raw_breakpoints(l, c, k_max)?;
    if let Some(r) = spec.min_gap_ratio() {
        if r < 0.5 {
            return Err(Error::CTooSmall {
                c,
                reason: format!("gap ratio {r:.4} is below 1/2"),
            });
        }
    }
    let max_gamma = block_values(&spec).into_iter().fold(0.0, f64::max);
    if max_gamma >= 0.5 {
        return Err(Error::CTooSmall {
            c,
            reason: format!("block value {max_gamma} is not below 1/2"),
        });
    }
    Ok(spec)
}

/// [`lemma_breakpoints`], multiplying `C` by `growth` while it is too small.
pub fn lemma_breakpoints_auto(l: f64, c: f64, k_max: usize, growth: f64) -> Result<LemmaBlockSpec> {
    if !(growth > 1.0) {
        return Err(Error::InvalidParameter(format!("C growth must exceed 1, got {growth}")));
    }
    let mut c = c;
    let mut last = None;
    for _ in 0..MAX_C_RETRIES {
        match lemma_breakpoints(l, c, k_max) {
            Err(e @ Error::CTooSmall { .. }) => {
                last = Some(e);
                c *= growth;
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// `L·βⱼ/√(N_j − N_{j−1})` for each block.
fn block_values(spec: &LemmaBlockSpec) -> Vec<f64> {
    spec.betas()
        .iter()
        .zip(spec.breakpoints.windows(2))
        .map(|(b, w)| spec.l * b / ((w[1] - w[0]) as f64).sqrt())
        .collect()
}

/// The block-constant sequence `γ̂ₜ = L·βⱼ/√(N_j − N_{j−1})`, `t ∈ (N_{j−1}, N_j]`.
pub fn lemma_gammas(spec: &LemmaBlockSpec) -> Result<SchurSequence> {
    let values = block_values(spec);
    if let Some(v) = values.iter().find(|&&v| v >= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "block value {v} is not below 1/2; increase C"
        )));
    }
    let mut out = Vec::with_capacity(spec.len());
    for (v, w) in values.iter().zip(spec.breakpoints.windows(2)) {
        out.extend(std::iter::repeat(*v).take(w[1] - w[0]));
    }
    SchurSequence::new(out)
}

/// `Γₙ` and `Ψₙ` of a nonnegative sequence, with the second (reversed-sum)
/// expression of `Γₙ` kept for cross-checking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPsi {
    pub gamma: f64,
    pub psi: f64,
    /// `Γₙ` from `Σγ̂ / (1 + Σ_{m<n} exp(−Σ_{t≤m} γ̂ₜ))` with `γ̂ₛ = γ_{n+1−s}`.
    pub gamma_reversed: f64,
    /// `1 + Σ_{m<n} exp(−Σ_{t≤m} γ̂ₜ)`.
    pub denominator: f64,
}

impl GammaPsi {
    pub fn relative_disagreement(&self) -> f64 {
        (self.gamma - self.gamma_reversed).abs() / self.gamma.abs().max(f64::MIN_POSITIVE)
    }
}

/// `Γₙ = S·e^S / Σⱼ e^{Pⱼ}` and `Ψₙ = e^S / Σⱼ e^{Pⱼ}` where `Pⱼ = Σ_{k≤j} γₖ`
/// and `S = Pₙ`, evaluated with log-sum-exp.
pub fn gamma_psi(gammas: &[f64]) -> Result<GammaPsi> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter("Γ needs at least one term".into()));
    }
    let mut partial = 0.0;
    let mut lse = LogSumExp::new();
    let mut acc = crate::logsum::NeumaierSum::new();
    for g in gammas {
        acc.add(*g);
        partial = acc.value();
        lse.add(partial);
    }
    let s = partial;
    let log_psi = s - lse.value();
    let psi = log_psi.exp();

    // Reversed form: suffix sums of γ are prefix sums of the reversed sequence.
    let mut suffix = crate::logsum::NeumaierSum::new();
    let mut tail = Vec::with_capacity(gammas.len());
    for g in gammas.iter().rev().take(gammas.len() - 1) {
        suffix.add(*g);
        tail.push((-suffix.value()).exp());
    }
    let denominator = 1.0 + compensated_sum(tail);
    Ok(GammaPsi {
        gamma: s * psi,
        psi,
        gamma_reversed: s / denominator,
        denominator,
    })
}

/// `Γₙ` of the reversal of `γ̂`; this is the value the block sequence is built
/// to make large.
pub fn gamma_psi_of_block(block: &SchurSequence) -> Result<GammaPsi> {
    let rev: Vec<f64> = block.iter().rev().collect();
    gamma_psi(&rev)
}

/// `√n·‖γ‖₂`, which bounds `Γₙ` from above.
pub fn gamma_upper_bound(gammas: &[f64]) -> f64 {
    (gammas.len() as f64).sqrt() * compensated_sum(gammas.iter().map(|g| g * g)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_breakpoints() {
        let spec = raw_breakpoints(0.25, 10.0, 2).unwrap();
        assert_eq!(spec.breakpoints, vec![0, 640, 1198]);
        assert_eq!(
            raw_breakpoints(0.25, 10.0, 4).unwrap().breakpoints,
            vec![0, 640, 1198, 1808, 2347]
        );
        let spec = raw_breakpoints(0.25, 12.5, 3).unwrap();
        assert_eq!(spec.breakpoints, vec![0, 800, 1977, 4489]);
    }

    #[test]
    fn gap_failure_and_retry() {
        assert!(matches!(
            lemma_breakpoints(0.25, 10.0, 2),
            Err(Error::CTooSmall { .. })
        ));
        let spec = lemma_breakpoints_auto(0.25, 10.0, 4, DEFAULT_C_GROWTH).unwrap();
        assert_eq!(spec.c, 12.5);
        assert!(spec.min_gap_ratio().unwrap() >= 0.5);
        let one = lemma_breakpoints(0.25, 10.0, 1).unwrap();
        assert_eq!(one.breakpoints, vec![0, 640]);
    }

    #[test]
    fn cap_reports_largest_k() {
        match raw_breakpoints(0.25, 15.625, 40) {
            Err(Error::KMaxTooLarge { largest_feasible, .. }) => assert_eq!(largest_feasible, 4),
            other => panic!("{other:?}"),
        }
        assert!(raw_breakpoints(0.5, 10.0, 2).is_err());
        assert!(raw_breakpoints(0.25, 0.5, 2).is_err());
    }

    #[test]
    fn block_sums() {
        let one = lemma_gammas(&raw_breakpoints(0.2, 10.0, 1).unwrap()).unwrap();
        assert!((one.norm_sq() - 0.04).abs() < 1e-15);
        let spec = raw_breakpoints(0.25, 10.0, 2).unwrap();
        let two = lemma_gammas(&spec).unwrap();
        assert_eq!(two.len(), 1198);
        assert!((two.norm_sq() - 0.0625 * 2.0).abs() < 1e-14);
        assert!(two.max_abs() < 0.5);
        let four = lemma_gammas(&raw_breakpoints(0.25, 10.0, 4).unwrap()).unwrap();
        let ratio = four.norm_sq() / 0.0625;
        assert!(ratio >= SUM_SQ_LOWER_CONSTANT && ratio <= sum_sq_upper_constant());
    }

    #[test]
    fn gamma_small_cases() {
        let g = gamma_psi(&[0.3]).unwrap();
        assert!((g.gamma - 0.3).abs() < 1e-15 && (g.psi - 1.0).abs() < 1e-15);
        let c: f64 = 0.1;
        let g = gamma_psi(&[c; 3]).unwrap();
        let brute = 3.0 * c * (3.0 * c).exp() / (c.exp() + (2.0 * c).exp() + (3.0 * c).exp());
        assert!((g.gamma - brute).abs() < 1e-15);
        assert!(g.relative_disagreement() < 1e-12);
        assert!(gamma_psi(&[]).is_err());
    }

    #[test]
    fn upper_bound_zero() {
        assert_eq!(gamma_upper_bound(&[0.0; 5]), 0.0);
        assert_eq!(gamma_psi(&[0.0; 5]).unwrap().gamma, 0.0);
    }

    proptest! {
        #[test]
        fn forms_agree_and_bound_holds(g in proptest::collection::vec(0.0f64..0.9, 1..100)) {
            let r = gamma_psi(&g).unwrap();
            prop_assert!((r.gamma - r.gamma_reversed).abs() <= 1e-9 * r.gamma.abs().max(1e-300));
            prop_assert!(r.gamma <= gamma_upper_bound(&g) * (1.0 + 1e-12));
            prop_assert!(r.denominator >= 1.0);
        }
    }
}
