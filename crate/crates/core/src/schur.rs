use crate::error::{Error, Result};
use crate::logsum::compensated_sum;

/// Real Schur (Verblunsky) parameters `γ₀, γ₁, …`, every entry in `(-1, 1)`.
///
/// Sign convention: `Φₙ₊₁ = zΦₙ + γₙΦₙ*`, so `γₙ = Φₙ₊₁(0)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SchurSequence(Vec<f64>);

impl SchurSequence {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if let Some((k, g)) = gammas
            .iter()
            .enumerate()
            .find(|(_, g)| !g.is_finite() || g.abs() >= 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "Schur parameter γ_{k} = {g} is not in (-1, 1)"
            )));
        }
        Ok(Self(gammas))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::iter::Copied<std::slice::Iter<'_, f64>> {
        self.0.iter().copied()
    }

    /// The first `n` parameters.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::OutOfRange {
                requested: n,
                available: self.len(),
            });
        }
        Ok(Self(self.0[..n].to_vec()))
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    /// Squared ℓ² norm.
    pub fn norm_sq(&self) -> f64 {
        compensated_sum(self.0.iter().map(|g| g * g))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// `Σ ln(1 − γₖ²)` over the whole sequence.
    pub fn log_szego_sum(&self) -> f64 {
        compensated_sum(self.0.iter().map(|g| (-g * g).ln_1p()))
    }

    pub(crate) fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.len() {
            Err(Error::OutOfRange {
                requested: n,
                available: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

impl std::ops::Index<usize> for SchurSequence {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_disk() {
        assert!(SchurSequence::new(vec![0.2, 1.0]).is_err());
        assert!(SchurSequence::new(vec![-1.5]).is_err());
        assert!(SchurSequence::new(vec![f64::NAN]).is_err());
        assert!(SchurSequence::new(vec![0.99, -0.99]).is_ok());
    }

    #[test]
    fn norms() {
        let s = SchurSequence::new(vec![0.3, -0.4]).unwrap();
        assert!((s.norm_sq() - 0.25).abs() < 1e-15);
        assert_eq!(s.max_abs(), 0.4);
        assert_eq!(s.reversed().as_slice(), &[-0.4, 0.3]);
        assert!(s.prefix(3).is_err());
    }
}
