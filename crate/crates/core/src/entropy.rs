//! Entropy integrals `∫|Φₙ|² log|Φₙ| dσ` (monic) and `∫|φₙ|² log|φₙ| dσ`
//! (orthonormal), gauge integrals `∫F(|φₙ|²) dσ`, and the elementary bounds.
//!
//! Everything is evaluated from `ln|Φₙ|` on the grid and at the atoms. Atom
//! terms carry their own log magnitude so that huge values at `z = 1` can
//! still be compared when they are not representable as `f64`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::logsum::MAX_LINEAR_LOG;
use crate::measures::{DensityTrace, MeasureSpec};
use crate::opuc::{evaluate, leading_coefficient_log, log_abs_at, GridPolynomialPair};
use crate::schur::SchurSequence;

/// One entropy integral with its split into `log⁺`/`log⁻` parts and into the
/// a.c. and atom contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub degree: usize,
    pub monic: bool,
    pub entropy: f64,
    pub entropy_plus: f64,
    pub entropy_minus: f64,
    pub ac_contribution: f64,
    pub atom_contribution: f64,
    pub quadrature_error: f64,
    /// False when an atom term overflowed; the linear fields are then `inf`.
    pub representable: bool,
    /// `ln` of the largest positive atom term, `-inf` without one.
    pub atom_log_magnitude: f64,
}

impl EntropyReport {
    pub const CSV_HEADER: &'static str = "n,monic,entropy,entropy_plus,entropy_minus,ac,atom,quad_err";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.degree,
            self.monic,
            self.entropy,
            self.entropy_plus,
            self.entropy_minus,
            self.ac_contribution,
            self.atom_contribution,
            self.quadrature_error
        )
    }

    /// `ln ε`, usable whether or not the linear value is representable.
    /// `None` when the entropy is not positive.
    pub fn log_entropy(&self) -> Option<f64> {
        if self.representable {
            (self.entropy > 0.0).then(|| self.entropy.ln())
        } else {
            let rest = self.ac_contribution * (-self.atom_log_magnitude).exp();
            Some(self.atom_log_magnitude + rest.ln_1p())
        }
    }

    /// Relative error estimate against `max(|entropy|, 1)`.
    pub fn relative_error(&self) -> f64 {
        self.quadrature_error / self.entropy.abs().max(1.0)
    }
}

/// Entropy of the polynomial described by `pair` against `measure`.
///
/// `schur` holds the parameters of the same polynomial; it supplies exact
/// values at the atoms and at the local nodes of `density`. With `log_kappa`
/// set the orthonormal variant `φₙ = κₙΦₙ` is integrated.
pub fn entropy_from_pair(
    measure: &MeasureSpec,
    density: &DensityTrace,
    pair: &GridPolynomialPair,
    schur: &SchurSequence,
    log_kappa: Option<f64>,
) -> Result<EntropyReport> {
    if pair.grid() != density.grid() {
        return Err(Error::InvalidParameter(
            "polynomial and density live on different grids".into(),
        ));
    }
    let n = pair.degree();
    schur.check_degree(n)?;
    let shift = log_kappa.unwrap_or(0.0);
    let lp = |j: usize| pair.log_abs_phi(j) + shift;
    let weight = |j: usize| 2.0 * lp(j);
    let local_lp: Vec<f64> = log_values_at(schur, n, density.local_thetas())
        .into_iter()
        .map(|l| l + shift)
        .collect();
    let local_weight: Vec<f64> = local_lp.iter().map(|l| 2.0 * l).collect();
    let local_plus: Vec<f64> = local_lp.iter().map(|l| l.max(0.0)).collect();
    let local_minus: Vec<f64> = local_lp.iter().map(|l| (-l).max(0.0)).collect();
    let overflow = |e: Error| match e {
        Error::Integration(_) => Error::Integration("a.c. entropy integrand overflows".into()),
        other => other,
    };
    let ac = density
        .integrate_scaled(weight, lp, &local_weight, &local_lp)
        .map_err(overflow)?;
    let ac_plus = density
        .integrate_scaled(weight, |j| lp(j).max(0.0), &local_weight, &local_plus)
        .map_err(overflow)?;
    let ac_minus = density
        .integrate_scaled(weight, |j| (-lp(j)).max(0.0), &local_weight, &local_minus)
        .map_err(overflow)?;

    let mut atom = 0.0;
    let mut atom_plus = 0.0;
    let mut atom_minus = 0.0;
    let mut atom_log_magnitude = f64::NEG_INFINITY;
    let mut representable = true;
    let atom_log_abs = log_values_at(schur, n, &atom_thetas(measure));
    for (a, la) in measure.atoms().iter().zip(atom_log_abs) {
        let lp = la + shift;
        let lw = (a.mass / measure.normalization()).ln() + 2.0 * lp;
        if lp > 0.0 {
            let lt = lw + lp.ln();
            atom_log_magnitude = atom_log_magnitude.max(lt);
            if lt > MAX_LINEAR_LOG {
                representable = false;
            } else {
                let t = lt.exp();
                atom += t;
                atom_plus += t;
            }
        } else if lp < 0.0 {
            let t = lw.exp() * (-lp);
            atom -= t;
            atom_minus += t;
        }
    }

    let (entropy, entropy_plus, atom) = if representable {
        (
            ac.value + atom,
            ac_plus.value + atom_plus,
            atom,
        )
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    Ok(EntropyReport {
        degree: n,
        monic: log_kappa.is_none(),
        entropy,
        entropy_plus,
        entropy_minus: ac_minus.value + atom_minus,
        ac_contribution: ac.value,
        atom_contribution: atom,
        quadrature_error: ac.error_estimate,
        representable,
        atom_log_magnitude,
    })
}

fn atom_thetas(measure: &MeasureSpec) -> Vec<f64> {
    measure.atoms().iter().map(|a| a.theta).collect()
}

/// `ln|Φₙ(e^{iθ})|` of `schur` at each angle.
pub fn log_values_at(schur: &SchurSequence, n: usize, thetas: &[f64]) -> Vec<f64> {
    let g = &schur.as_slice()[..n];
    thetas
        .par_iter()
        .map(|t| log_abs_at(g, Complex64::from_polar(1.0, *t)))
        .collect()
}

/// Entropy of `Φₙ` built from `schur`, integrated against `measure` on the
/// default grid for `max(n, deg measure)`.
pub fn entropy_integral(
    measure: &MeasureSpec,
    schur: &SchurSequence,
    n: usize,
    monic: bool,
) -> Result<EntropyReport> {
    let grid = CircleGrid::for_degree(n.max(measure.degree()));
    entropy_integral_on(measure, schur, n, monic, grid)
}

pub fn entropy_integral_on(
    measure: &MeasureSpec,
    schur: &SchurSequence,
    n: usize,
    monic: bool,
    grid: CircleGrid,
) -> Result<EntropyReport> {
    schur.check_degree(n)?;
    grid.ensure_resolves(n)?;
    let density = measure.density_trace(grid)?;
    let pair = evaluate(schur, n, grid)?;
    let log_kappa = if monic {
        None
    } else {
        Some(leading_coefficient_log(schur, n)?)
    };
    entropy_from_pair(measure, &density, &pair, schur, log_kappa)
}

/// `Σ_{k<n} |γₖ|`, an upper bound for `ln|Φₙ|` on the circle and hence for
/// the monic entropy of a probability measure.
pub fn entropy_upper_bound(schur: &SchurSequence, n: usize) -> f64 {
    schur.iter().take(n).map(f64::abs).sum()
}

/// The `log⁻` part of the orthonormal entropy and whether it is below 1.
pub fn log_minus_check(measure: &MeasureSpec, schur: &SchurSequence, n: usize) -> Result<(f64, bool)> {
    let r = entropy_integral(measure, schur, n, false)?;
    Ok((r.entropy_minus, r.entropy_minus < 1.0))
}

/// An increasing superlinear test function `F` applied to `x = |φₙ|²`.
#[derive(Debug, Clone, PartialEq)]
pub enum GaugeFunction {
    /// `F(x) = x`; not a gauge, kept as the normalization pin.
    Linear,
    XLogX,
    XLog2X,
    Power(f64),
    /// Piecewise-linear through `(x, F(x))` samples, extended linearly past
    /// the last sample.
    Tabulated(Vec<(f64, f64)>),
}

impl GaugeFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            GaugeFunction::Power(p) if !(*p > 1.0) || !p.is_finite() => Err(
                Error::InvalidParameter(format!("power gauge needs p > 1, got {p}")),
            ),
            GaugeFunction::Tabulated(pts) => {
                if pts.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated gauge needs at least two samples".into(),
                    ));
                }
                for w in pts.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 || w[0].0 < 0.0 || w[0].1 < 0.0 {
                        return Err(Error::InvalidParameter(
                            "tabulated gauge must be nonnegative and increasing".into(),
                        ));
                    }
                }
                let ratio = |(x, f): (f64, f64)| f / x;
                let first = pts.iter().copied().find(|p| p.0 > 0.0).map(ratio);
                let last = ratio(pts[pts.len() - 1]);
                match first {
                    Some(r) if last > r => Ok(()),
                    _ => Err(Error::InvalidParameter(
                        "tabulated gauge does not grow faster than x on its samples".into(),
                    )),
                }
            }
            _ => Ok(()),
        }
    }

    /// `F(eˡˣ)` as `(sign, ln|F|)`, or `None` if only a linear form exists and
    /// the argument overflows.
    pub fn eval_log(&self, lx: f64) -> Option<(f64, f64)> {
        let signed_log = |v: f64, lmag: f64| {
            if v == 0.0 {
                (0.0, f64::NEG_INFINITY)
            } else {
                (v.signum(), lmag)
            }
        };
        match self {
            GaugeFunction::Linear => Some((1.0, lx)),
            GaugeFunction::XLogX => Some(signed_log(lx, lx + lx.abs().ln())),
            GaugeFunction::XLog2X => Some(signed_log(lx * lx, lx + 2.0 * lx.abs().ln())),
            GaugeFunction::Power(p) => Some((1.0, p * lx)),
            GaugeFunction::Tabulated(pts) => {
                if lx > MAX_LINEAR_LOG {
                    return None;
                }
                let v = tabulated(pts, lx.exp());
                Some(signed_log(v, v.abs().ln()))
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GaugeFunction::Tabulated(pts) => tabulated(pts, x),
            _ => match self.eval_log(x.ln()) {
                Some((s, l)) if s != 0.0 => s * l.exp(),
                _ => 0.0,
            },
        }
    }
}

fn tabulated(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = match pts.iter().position(|p| p.0 >= x) {
        Some(0) => 1,
        Some(i) => i,
        None => pts.len() - 1,
    };
    let (x0, f0) = pts[i - 1];
    let (x1, f1) = pts[i];
    (f0 + (f1 - f0) * (x - x0) / (x1 - x0)).max(0.0)
}

/// Result of a gauge integral; `value` is `inf` when not representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeReport {
    pub value: f64,
    pub ac_contribution: f64,
    pub atom_contribution: f64,
    pub quadrature_error: f64,
    pub representable: bool,
    /// `ln` of the largest atom term magnitude.
    pub atom_log_magnitude: f64,
}

/// `∫ F(|φₙ|²) dσ` for orthonormal `φₙ` built from `schur`.
pub fn gauge_integral(
    measure: &MeasureSpec,
    schur: &SchurSequence,
    n: usize,
    gauge: &GaugeFunction,
) -> Result<GaugeReport> {
    gauge_integral_on(measure, schur, n, gauge, CircleGrid::for_degree(n.max(measure.degree())))
}

pub fn gauge_integral_on(
    measure: &MeasureSpec,
    schur: &SchurSequence,
    n: usize,
    gauge: &GaugeFunction,
    grid: CircleGrid,
) -> Result<GaugeReport> {
    gauge.validate()?;
    schur.check_degree(n)?;
    grid.ensure_resolves(n)?;
    let density = measure.density_trace(grid)?;
    let pair = evaluate(schur, n, grid)?;
    let log_kappa = leading_coefficient_log(schur, n)?;
    gauge_from_pair(measure, &density, &pair, schur, log_kappa, gauge)
}

pub fn gauge_from_pair(
    measure: &MeasureSpec,
    density: &DensityTrace,
    pair: &GridPolynomialPair,
    schur: &SchurSequence,
    log_kappa: f64,
    gauge: &GaugeFunction,
) -> Result<GaugeReport> {
    let n = pair.degree();
    schur.check_degree(n)?;
    let overflow = || Error::Integration("gauge integrand is not representable on the grid".into());
    let eval = |la: f64| gauge.eval_log(2.0 * (la + log_kappa)).ok_or_else(overflow);
    let evaluated = (0..density.grid().size())
        .map(|j| eval(pair.log_abs_phi(j)))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let local = log_values_at(schur, n, density.local_thetas())
        .into_iter()
        .map(eval)
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let local_log: Vec<f64> = local.iter().map(|e| e.1).collect();
    let local_sign: Vec<f64> = local.iter().map(|e| e.0).collect();
    let ac = density
        .integrate_scaled(|j| evaluated[j].1, |j| evaluated[j].0, &local_log, &local_sign)
        .map_err(|_| overflow())?;

    let mut atom = 0.0;
    let mut representable = true;
    let mut atom_log_magnitude = f64::NEG_INFINITY;
    let atom_log_abs = log_values_at(schur, n, &atom_thetas(measure));
    for (a, la) in measure.atoms().iter().zip(atom_log_abs) {
        let lx = 2.0 * (la + log_kappa);
        let lw = (a.mass / measure.normalization()).ln();
        match gauge.eval_log(lx) {
            Some((s, lf)) => {
                let lt = lw + lf;
                atom_log_magnitude = atom_log_magnitude.max(lt);
                if lt > MAX_LINEAR_LOG {
                    representable = false;
                } else {
                    atom += s * lt.exp();
                }
            }
            None => representable = false,
        }
    }
    let (value, atom) = if representable {
        (ac.value + atom, atom)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(GaugeReport {
        value,
        ac_contribution: ac.value,
        atom_contribution: atom,
        quadrature_error: ac.error_estimate,
        representable,
        atom_log_magnitude,
    })
}
