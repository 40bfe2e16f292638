//! Trigonometric polynomial approximation of grid functions in the sup norm.
//!
//! The approximant is a de la Vallée Poussin type mean of the Fourier series:
//! coefficients are kept for `|m| ≤ ⌈3d/4⌉` and tapered linearly to zero at
//! `|m| = d + 1`. Coefficients come from the even nodes of the grid and the sup
//! error is measured on all nodes.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    degree: usize,
    /// `a_{−d}, …, a_d`.
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidParameter(
                "coefficient list must have odd length 2d + 1".into(),
            ));
        }
        Ok(Self {
            degree: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `a_m` for `|m| ≤ d`, zero beyond.
    pub fn coeff(&self, m: isize) -> Complex64 {
        let d = self.degree as isize;
        if m.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(m + d) as usize]
        }
    }

    /// Values `Σ a_m e^{imθⱼ}` on an `size`-node grid.
    pub fn eval_on_grid(&self, size: usize) -> Result<Vec<Complex64>> {
        if 2 * self.degree >= size {
            return Err(Error::Resolution(format!(
                "degree {} does not fit a grid of {size}",
                self.degree
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let d = self.degree as isize;
        for m in -d..=d {
            buf[m.rem_euclid(size as isize) as usize] = self.coeff(m);
        }
        FftPlanner::new().plan_fft_inverse(size).process(&mut buf);
        Ok(buf)
    }

    /// `∫ f dσ` from the moments `c_m = ∫ e^{−imθ} dσ`, `m = 0..=d`.
    pub fn integrate_against(&self, moments: &[Complex64]) -> Result<Complex64> {
        if moments.len() <= self.degree {
            return Err(Error::OutOfRange {
                requested: self.degree,
                available: moments.len().saturating_sub(1),
            });
        }
        let d = self.degree as isize;
        Ok((-d..=d)
            .map(|m| {
                let c = if m >= 0 {
                    moments[m as usize].conj()
                } else {
                    moments[(-m) as usize]
                };
                self.coeff(m) * c
            })
            .sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigApprox {
    pub poly: TrigPoly,
    /// Max over all grid nodes of `|target − f|`.
    pub sup_error: f64,
}

fn taper(m: usize, d: usize) -> f64 {
    let flat = (3 * d + 3) / 4;
    if m <= flat {
        1.0
    } else if m > d {
        0.0
    } else {
        (d + 1 - m) as f64 / (d + 1 - flat) as f64
    }
}

struct Fitter {
    size: usize,
    /// Fourier coefficients from the even nodes, index `m mod M/2`.
    spectrum: Vec<Complex64>,
    target: Vec<f64>,
}

impl Fitter {
    fn new(target: &[f64]) -> Result<Self> {
        let size = target.len();
        if size < 8 || size % 4 != 0 {
            return Err(Error::InvalidParameter(format!(
                "trig fitting needs a grid size divisible by 4, got {size}"
            )));
        }
        if let Some(j) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("target not finite at node {j}")));
        }
        let half = size / 2;
        let mut spectrum: Vec<Complex64> = target
            .iter()
            .step_by(2)
            .map(|v| Complex64::new(*v, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(half).process(&mut spectrum);
        for c in spectrum.iter_mut() {
            *c /= half as f64;
        }
        Ok(Self {
            size,
            spectrum,
            target: target.to_vec(),
        })
    }

    fn max_degree(&self) -> usize {
        self.size / 4 - 1
    }

    fn fit(&self, d: usize) -> Result<TrigApprox> {
        let half = self.spectrum.len() as isize;
        let coeffs = (-(d as isize)..=d as isize)
            .map(|m| self.spectrum[m.rem_euclid(half) as usize] * taper(m.unsigned_abs(), d))
            .collect();
        let poly = TrigPoly::new(coeffs)?;
        let values = poly.eval_on_grid(self.size)?;
        let sup_error = values
            .iter()
            .zip(&self.target)
            .map(|(v, t)| (v.re - t).abs().max(v.im.abs()))
            .fold(0.0, f64::max);
        Ok(TrigApprox { poly, sup_error })
    }
}

/// Lowest-degree approximant found by doubling then bisection whose sup error
/// on the full grid is below `eps`.
pub fn trig_approx(target: &[f64], eps: f64) -> Result<TrigApprox> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let fitter = Fitter::new(target)?;
    let first = fitter.fit(0)?;
    if first.sup_error < eps {
        return Ok(first);
    }
    let cap = fitter.max_degree();
    let mut lo = 0;
    let mut hi = 1;
    let best = loop {
        let a = fitter.fit(hi)?;
        if a.sup_error < eps {
            break a;
        }
        if hi == cap {
            return Err(Error::Resolution(format!(
                "sup error {:.3e} at the largest degree {cap} the grid supports",
                a.sup_error
            )));
        }
        lo = hi;
        hi = (hi * 2).min(cap);
    };
    let mut best = best;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let a = fitter.fit(mid)?;
        if a.sup_error < eps {
            hi = mid;
            best = a;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}
