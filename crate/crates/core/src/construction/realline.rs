//! Transfer from the circle to `[−1, 1]` via `x = cos θ`.
//!
//! For a symmetric measure the Jacobi parameters of the image measure follow
//! from the Schur parameters; with `α = −γ` and `α₋₁ = −1` (on `[−2, 2]`):
//! `a²_{n+1} = (1 − α_{2n−1})(1 − α²_{2n})(1 + α_{2n+1})` and
//! `b_{n+1} = (1 − α_{2n−1})α_{2n} − (1 + α_{2n−1})α_{2n−2}`.
//! The point `x = 1` corresponds to `z = 1`.

use crate::error::{Error, Result};
use crate::opuc::leading_coefficient_log;
use crate::schur::SchurSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealLineReport {
    /// Circle degree `M`; the interval degree is `M/2`.
    pub degree: usize,
    /// `ln φ_M(1)`.
    pub log_phi_at_one: f64,
    /// `ln p_{M/2}(1)` from the Jacobi recurrence.
    pub log_p_at_one: f64,
    /// `ln p_{M/2}(1)` from `p_n(1) = √2·φ_{2n}(1)/√(1 + γ_{2n−1})`.
    pub log_p_closed_form: f64,
    /// `ln(p_{M/2}(1)/φ_M(1))`.
    pub log_ratio: f64,
    /// `ln(w·φ_M(1)²·ln φ_M(1))` for an atom of weight `w` at `z = 1`.
    pub circle_atom_log: Option<f64>,
    /// `ln(w·p_{M/2}(1)²·ln p_{M/2}(1))` for the image atom at `x = 1`.
    pub line_atom_log: Option<f64>,
}

impl RealLineReport {
    /// Whether `p/φ` lies in `[1/4, 4]`.
    pub fn ratio_in_range(&self) -> bool {
        self.log_ratio.abs() <= 4f64.ln()
    }
}

fn alpha(g: &[f64], k: isize) -> f64 {
    if k < 0 {
        -1.0
    } else {
        -g[k as usize]
    }
}

/// `ln p_n(1)` by the three-term recurrence at the right endpoint.
pub fn log_jacobi_at_one(schur: &SchurSequence, n: usize) -> Result<f64> {
    if 2 * n > schur.len() {
        return Err(Error::OutOfRange {
            requested: 2 * n,
            available: schur.len(),
        });
    }
    let g = schur.as_slice();
    let a_sq = |m: usize| {
        // a_m² with m = k + 1
        let k = m as isize - 1;
        (1.0 - alpha(g, 2 * k - 1)) * (1.0 - alpha(g, 2 * k).powi(2)) * (1.0 + alpha(g, 2 * k + 1))
    };
    let b = |m: usize| {
        let k = m as isize - 1;
        (1.0 - alpha(g, 2 * k - 1)) * alpha(g, 2 * k) - (1.0 + alpha(g, 2 * k - 1)) * alpha(g, 2 * k - 2)
    };
    let x = 2.0;
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut a_prev = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        let a_next = a_sq(k + 1).sqrt();
        let next = ((x - b(k + 1)) * cur - a_prev * prev) / a_next;
        prev = cur;
        cur = next;
        a_prev = a_next;
        if cur.abs() > 1e100 {
            prev /= cur.abs();
            log_scale += cur.abs().ln();
            cur = cur.signum();
        }
    }
    if !(cur > 0.0) {
        return Err(Error::Integration(format!(
            "p_{n}(1) = {cur} is not positive"
        )));
    }
    Ok(log_scale + cur.ln())
}

/// Compares `p_{M/2}(1)` with `φ_M(1)` for the measure with parameters
/// `schur`; `atom_weight` is the normalized mass at `z = 1`, if any.
pub fn real_line_map(schur: &SchurSequence, m: usize, atom_weight: Option<f64>) -> Result<RealLineReport> {
    if m == 0 || m % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "checkpoint must be even and positive, got {m}"
        )));
    }
    schur.check_degree(m)?;
    let log_phi = leading_coefficient_log(schur, m)? + schur.iter().take(m).map(f64::ln_1p).sum::<f64>();
    let log_p = log_jacobi_at_one(schur, m / 2)?;
    let log_p_closed_form = 0.5 * 2f64.ln() + log_phi - 0.5 * schur[m - 1].ln_1p();
    let atom_log = |w: f64, l: f64| (l > 0.0).then(|| w.ln() + 2.0 * l + l.ln());
    Ok(RealLineReport {
        degree: m,
        log_phi_at_one: log_phi,
        log_p_at_one: log_p,
        log_p_closed_form,
        log_ratio: log_p - log_phi,
        circle_atom_log: atom_weight.and_then(|w| atom_log(w, log_phi)),
        line_atom_log: atom_weight.and_then(|w| atom_log(w, log_p)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chebyshev_case() {
        let s = SchurSequence::zeros(40);
        for m in [2, 10, 40] {
            let r = real_line_map(&s, m, None).unwrap();
            assert!((r.log_p_at_one - 0.5 * 2f64.ln()).abs() < 1e-14);
            assert!(r.ratio_in_range());
        }
        assert!(real_line_map(&s, 3, None).is_err());
        assert!(real_line_map(&s, 42, None).is_err());
    }

    #[test]
    fn recurrence_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g: Vec<f64> = (0..400).map(|_| rng.gen_range(-0.45..0.45)).collect();
        let s = SchurSequence::new(g).unwrap();
        for m in [2, 4, 50, 400] {
            let r = real_line_map(&s, m, Some(0.1)).unwrap();
            assert!(
                (r.log_p_at_one - r.log_p_closed_form).abs() < 1e-10,
                "m = {m}: {} vs {}",
                r.log_p_at_one,
                r.log_p_closed_form
            );
        }
    }

    #[test]
    fn growing_values_survive_rescaling() {
        let s = SchurSequence::new(vec![0.4; 4000]).unwrap();
        let r = real_line_map(&s, 4000, Some(1e-3)).unwrap();
        assert!(r.log_phi_at_one > 1000.0);
        assert!((r.log_p_at_one - r.log_p_closed_form).abs() < 1e-8 * r.log_phi_at_one);
        assert!(r.ratio_in_range());
        let d = r.line_atom_log.unwrap() - r.circle_atom_log.unwrap();
        assert!(d.abs() < 2.0);
    }
}
