use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default oversampling: `M ≥ 32·n + 512`.
pub const DEFAULT_OVERSAMPLING: usize = 32;
/// Smallest oversampling the quadrature is considered to resolve.
pub const MIN_OVERSAMPLING: usize = 16;
const GRID_PAD: usize = 512;
const MIN_GRID: usize = 4096;

/// Equispaced nodes `θⱼ = 2πj/M` on the unit circle, weight `1/M` each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleGrid {
    size: usize,
}

impl CircleGrid {
    /// A grid of exactly `size` nodes; `size` must be even and positive.
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and positive, got {size}"
            )));
        }
        Ok(Self { size })
    }

    /// Grid resolving polynomials of degree up to `degree`, default oversampling.
    pub fn for_degree(degree: usize) -> Self {
        Self::with_oversampling(degree, DEFAULT_OVERSAMPLING)
    }

    /// Smallest FFT-friendly size `≥ max(4096, factor·degree + 512)`.
    pub fn with_oversampling(degree: usize, factor: usize) -> Self {
        let factor = factor.max(MIN_OVERSAMPLING);
        let target = (factor * degree + GRID_PAD).max(MIN_GRID);
        Self {
            size: smooth_size_at_least(target),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Highest polynomial degree this grid resolves under the minimal rule.
    pub fn max_degree(&self) -> usize {
        self.size.saturating_sub(GRID_PAD) / MIN_OVERSAMPLING
    }

    pub fn ensure_resolves(&self, degree: usize) -> Result<()> {
        if degree > self.max_degree() {
            Err(Error::Resolution(format!(
                "grid of {} nodes cannot resolve degree {degree} (max {})",
                self.size,
                self.max_degree()
            )))
        } else {
            Ok(())
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * (j as f64) / (self.size as f64)
    }

    /// Nodes `e^{iθⱼ}`, computed from the exact angles.
    pub fn nodes(&self) -> Vec<Complex64> {
        (0..self.size)
            .map(|j| Complex64::from_polar(1.0, self.theta(j)))
            .collect()
    }

    /// The grid with twice as many nodes; the current nodes are its even nodes.
    pub fn doubled(&self) -> Self {
        Self {
            size: 2 * self.size,
        }
    }

    /// The grid of even nodes, if it is still even-sized.
    pub fn halved(&self) -> Option<Self> {
        let half = self.size / 2;
        (half % 2 == 0 && half > 0).then_some(Self { size: half })
    }
}

/// Smallest `2^a 3^b 5^c ≥ n` with `a ≥ 2`.
fn smooth_size_at_least(n: usize) -> usize {
    let mut best = usize::MAX;
    let mut p5 = 1usize;
    while p5 < 2 * n {
        let mut p35 = p5;
        while p35 < 2 * n {
            let mut m = p35 * 4;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_rule() {
        let g = CircleGrid::for_degree(0);
        assert_eq!(g.size(), 4096);
        let g = CircleGrid::for_degree(1000);
        assert!(g.size() >= 32 * 1000 + 512);
        assert!(g.size() % 2 == 0);
        assert!(g.ensure_resolves(1000).is_ok());
        let g = CircleGrid::with_oversampling(1000, 4);
        assert!(g.size() >= 16 * 1000 + 512);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size_at_least(4096), 4096);
        assert_eq!(smooth_size_at_least(4097), 4320);
        assert_eq!(smooth_size_at_least(10800), 10800);
        for n in [5usize, 77, 1001, 65537] {
            let m = smooth_size_at_least(n);
            assert!(m >= n && m % 4 == 0);
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            assert_eq!(r, 1);
        }
    }

    #[test]
    fn odd_grid_rejected() {
        assert!(CircleGrid::new(15).is_err());
        assert!(CircleGrid::new(0).is_err());
        assert_eq!(CircleGrid::new(16).unwrap().halved().unwrap().size(), 8);
    }

    #[test]
    fn node_zero_is_one() {
        let n = CircleGrid::new(8).unwrap().nodes();
        assert_eq!(n[0], Complex64::new(1.0, 0.0));
        assert!((n[4] + 1.0).norm() < 1e-15);
    }
}
