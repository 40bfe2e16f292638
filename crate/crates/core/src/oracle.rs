//! Reference computations straight from the moments, used to cross-check the
//! recurrence-based code at small degrees.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measures::MomentVector;

/// Largest degree the dense Gram-matrix oracle accepts.
pub const ORACLE_MAX_DEGREE: usize = 15;

/// Monic orthogonal polynomial of degree `n` by solving the Gram system
/// `Σⱼ aⱼ c_{i−j} = −c_{i−n}`, `i < n`. Returns `a₀, …, a_{n−1}, 1`.
pub fn gram_schmidt_oracle(moments: &MomentVector, n: usize) -> Result<Vec<Complex64>> {
    if n > ORACLE_MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "oracle degree {n} exceeds {ORACLE_MAX_DEGREE}"
        )));
    }
    if moments.len() < n + 1 {
        return Err(Error::OutOfRange {
            requested: n,
            available: moments.len().saturating_sub(1),
        });
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    if n == 0 {
        return Ok(coeffs);
    }
    let gram = DMatrix::from_fn(n, n, |i, j| moments.get(i as isize - j as isize));
    if gram.clone().cholesky().is_none() {
        return Err(Error::DegenerateMeasure(format!(
            "Gram matrix of order {n} is not positive definite"
        )));
    }
    let rhs = DVector::from_fn(n, |i, _| -moments.get(i as isize - n as isize));
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateMeasure("singular Gram matrix".into()))?;
    coeffs[..n].copy_from_slice(sol.as_slice());
    Ok(coeffs)
}

/// First `count` Schur parameters by the Levinson recursion on the moments.
pub fn schur_from_moments(moments: &MomentVector, count: usize) -> Result<Vec<Complex64>> {
    if moments.len() < count + 1 {
        return Err(Error::OutOfRange {
            requested: count,
            available: moments.len().saturating_sub(1),
        });
    }
    let mut phi = vec![Complex64::new(1.0, 0.0)];
    let mut norm = moments.get(0).re;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if !(norm > 0.0) {
            return Err(Error::DegenerateMeasure(format!(
                "non-positive norm {norm} in Levinson recursion"
            )));
        }
        let pairing: Complex64 = phi
            .iter()
            .enumerate()
            .map(|(j, a)| a * moments.get(j as isize + 1).conj())
            .sum();
        let gamma = -pairing / norm;
        let n = phi.len() - 1;
        let mut next = vec![Complex64::new(0.0, 0.0); n + 2];
        for (j, a) in phi.iter().enumerate() {
            next[j + 1] += a;
            next[j] += gamma * phi[n - j].conj();
        }
        phi = next;
        norm *= 1.0 - gamma.norm_sqr();
        out.push(gamma);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_gives_monomials() {
        let c = MomentVector::lebesgue(6);
        let p = gram_schmidt_oracle(&c, 5).unwrap();
        assert!(p[..5].iter().all(|a| a.norm() < 1e-15));
        let g = schur_from_moments(&c, 5).unwrap();
        assert!(g.iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn delta_measure_is_degenerate() {
        let c = MomentVector(vec![Complex64::new(1.0, 0.0); 4]);
        assert!(matches!(
            gram_schmidt_oracle(&c, 2),
            Err(Error::DegenerateMeasure(_))
        ));
        assert!(gram_schmidt_oracle(&c, 16).is_err());
    }

    #[test]
    fn levinson_agrees_with_gram() {
        let c = MomentVector(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.3, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.05, 0.0),
        ]);
        let g = schur_from_moments(&c, 3).unwrap();
        for n in 1..=3 {
            let p = gram_schmidt_oracle(&c, n).unwrap();
            assert!((p[0] - g[n - 1]).norm() < 1e-12, "n = {n}");
        }
    }
}
