//! Probability measures on the circle built from a Bernstein–Szegő density
//! `dm/|φ_d|²` plus point masses, and the point-mass perturbation machinery.
//!
//! The a.c. density is only ever handled through `ln σ′` on a grid. Atoms are
//! kept symbolic as `(θ, mass)`; integrals pick up their exact contributions.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::logsum::{compensated_sum, ln_1p_exp, LogValue, NeumaierSum, MAX_LINEAR_LOG};
use crate::opuc::{log_abs_at, sweep, GridPolynomialPair, ScalarChannels, SweepSnapshot};
use crate::schur::SchurSequence;
use crate::spikes::{unresolved_zeros, LocalRule};

const MASS_TOL: f64 = 1e-9;

/// A point mass `mass · δ_{e^{iθ}}` before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub theta: f64,
    pub mass: f64,
}

/// `(dm/|φ_d|² + Σ massᵢ δ_{θᵢ}) / normalization`, with `d` the prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    schur_prefix: SchurSequence,
    atoms: Vec<Atom>,
    normalization: f64,
}

impl MeasureSpec {
    pub fn new(schur_prefix: SchurSequence, atoms: Vec<Atom>, normalization: f64) -> Result<Self> {
        let m = Self {
            schur_prefix,
            atoms,
            normalization,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn lebesgue() -> Self {
        Self::bernstein_szego(SchurSequence::default())
    }

    /// `dm/|φ_d|²`; its first `d` Schur parameters are `schur`, the rest vanish.
    pub fn bernstein_szego(schur: SchurSequence) -> Self {
        Self {
            schur_prefix: schur,
            atoms: Vec::new(),
            normalization: 1.0,
        }
    }

    /// `(μ + κδ₁)/(1 + κ)`.
    pub fn add_atom(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "atom mass must be positive, got {kappa}"
            )));
        }
        if self.atoms.iter().any(|a| a.theta == 0.0) {
            return Err(Error::InvalidParameter(
                "measure already has an atom at z = 1".into(),
            ));
        }
        let mut atoms = self.atoms.clone();
        atoms.push(Atom {
            theta: 0.0,
            mass: kappa * self.normalization,
        });
        let m = Self {
            schur_prefix: self.schur_prefix.clone(),
            atoms,
            normalization: self.normalization * (1.0 + kappa),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.normalization > 0.0) || !self.normalization.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normalization must be positive, got {}",
                self.normalization
            )));
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if !(a.mass > 0.0) || !a.mass.is_finite() || !a.theta.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} has invalid (θ, mass) = ({}, {})",
                    a.theta, a.mass
                )));
            }
            if self.atoms[..i].iter().any(|b| b.theta == a.theta) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate atom angle {}",
                    a.theta
                )));
            }
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "total mass {mass} is not 1"
            )));
        }
        Ok(())
    }

    /// `(1 + Σ massᵢ) / normalization`; the a.c. part has mass exactly one.
    pub fn total_mass(&self) -> f64 {
        (1.0 + compensated_sum(self.atoms.iter().map(|a| a.mass))) / self.normalization
    }

    pub fn schur_prefix(&self) -> &SchurSequence {
        &self.schur_prefix
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Degree of the Bernstein–Szegő denominator.
    pub fn degree(&self) -> usize {
        self.schur_prefix.len()
    }

    /// Normalized mass of the atom at `z = 1`, if any.
    pub fn atom_weight_at_one(&self) -> Option<f64> {
        self.atoms
            .iter()
            .find(|a| a.theta == 0.0)
            .map(|a| a.mass / self.normalization)
    }

    /// `ln σ′` of the a.c. part on `grid`, normalization included.
    pub fn density_trace(&self, grid: CircleGrid) -> Result<DensityTrace> {
        grid.ensure_resolves(self.degree())?;
        let out = sweep(self.schur_prefix.as_slice(), &[], grid, false);
        DensityTrace::from_snapshot(grid, self.normalization, self.schur_prefix.as_slice(), out.last())
    }
}

impl fmt::Display for MeasureSpec {
    /// Plain-text form: `normalization`, `schur`, then one `atom` line each.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "normalization {:.16e}", self.normalization)?;
        write!(f, "schur")?;
        for g in self.schur_prefix.iter() {
            write!(f, " {g:.16e}")?;
        }
        writeln!(f)?;
        for a in &self.atoms {
            writeln!(f, "atom {:.16e} {:.16e}", a.theta, a.mass)?;
        }
        Ok(())
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut normalization = None;
        let mut schur = None;
        let mut atoms = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else { continue };
            let nums = parts
                .map(|t| {
                    t.parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: bad number {t:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            match (key, nums.as_slice()) {
                ("normalization", [v]) => normalization = Some(*v),
                ("schur", gs) => schur = Some(SchurSequence::new(gs.to_vec())?),
                ("atom", [theta, mass]) => atoms.push(Atom {
                    theta: *theta,
                    mass: *mass,
                }),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: unexpected {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let normalization =
            normalization.ok_or_else(|| Error::Parse("missing normalization line".into()))?;
        let schur = schur.ok_or_else(|| Error::Parse("missing schur line".into()))?;
        MeasureSpec::new(schur, atoms, normalization)
    }
}

/// `ln σ′(θⱼ)` on a grid for the a.c. part of a measure, with the quadrature
/// weights used to integrate against it.
///
/// Without unresolved poles the grid weights are `σ′(θⱼ)`. Otherwise the grid
/// carries `(1 − χ)σ′` and a [`LocalRule`] carries `χσ′`; integrands are then
/// also needed at the local nodes, see [`DensityTrace::local_thetas`].
#[derive(Debug, Clone)]
pub struct DensityTrace {
    grid: CircleGrid,
    log_density: Vec<f64>,
    poles: Vec<Complex64>,
    regular: Vec<f64>,
    local_thetas: Vec<f64>,
    /// Local weights against `dθ/2π`, and with `σ′` folded in.
    local_plain_weights: Vec<f64>,
    local_weights: Vec<f64>,
    local_log_density: Vec<f64>,
    /// `1 − χ` at the grid nodes; empty without local nodes.
    grid_share: Vec<f64>,
}

impl DensityTrace {
    /// `ln σ′ = −ln normalization − 2 ln|φ_d|`, from the final sweep snapshot
    /// of `gammas`.
    pub(crate) fn from_snapshot(
        grid: CircleGrid,
        normalization: f64,
        gammas: &[f64],
        snap: &SweepSnapshot,
    ) -> Result<Self> {
        let log_factor = -normalization.ln() - 2.0 * snap.log_kappa;
        let shift = log_factor - 2.0 * snap.log_bound;
        let log_density: Vec<f64> = snap
            .phi
            .iter()
            .map(|u| shift - 2.0 * u.norm().ln())
            .collect();
        let poles = unresolved_zeros(gammas, grid, &log_density);
        let rule = LocalRule::around(&poles, grid);
        let grid_share: Vec<f64> = if rule.is_empty() {
            Vec::new()
        } else {
            (0..grid.size()).map(|j| 1.0 - rule.cutoff(grid.theta(j))).collect()
        };
        let regular = log_density
            .iter()
            .enumerate()
            .map(|(j, l)| l.exp() * grid_share.get(j).copied().unwrap_or(1.0))
            .collect();
        let local_log_density: Vec<f64> = rule
            .thetas
            .par_iter()
            .map(|t| log_factor - 2.0 * log_abs_at(gammas, Complex64::from_polar(1.0, *t)))
            .collect();
        let local_weights = rule
            .weights
            .iter()
            .zip(&local_log_density)
            .map(|(w, l)| w * l.exp())
            .collect();
        Ok(Self {
            grid,
            log_density,
            poles,
            regular,
            local_thetas: rule.thetas,
            local_plain_weights: rule.weights,
            local_weights,
            local_log_density,
            grid_share,
        })
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    /// Zeros of `φ_d` too close to the circle for the grid.
    pub fn unresolved_poles(&self) -> &[Complex64] {
        &self.poles
    }

    /// Angles at which integrands must also be supplied; empty when every
    /// pole is resolved.
    pub fn local_thetas(&self) -> &[f64] {
        &self.local_thetas
    }

    /// `∫ ln σ′ dθ/2π` with the same split between grid and local nodes.
    pub fn log_density_integral(&self) -> QuadratureResult {
        let m = self.grid.size();
        let share = |j: usize| self.grid_share.get(j).copied().unwrap_or(1.0);
        let mut full = NeumaierSum::new();
        let mut half = NeumaierSum::new();
        for (j, l) in self.log_density.iter().enumerate() {
            let t = l * share(j);
            full.add(t);
            if j % 2 == 0 {
                half.add(t);
            }
        }
        let local = compensated_sum(
            self.local_plain_weights
                .iter()
                .zip(&self.local_log_density)
                .map(|(w, l)| w * l),
        );
        let full = full.value() / m as f64;
        let half = half.value() / (m / 2) as f64;
        QuadratureResult {
            value: full + local,
            error_estimate: (full - half).abs(),
        }
    }

    /// `∫ f dσ_ac` for values of `f` on the grid and at the local nodes.
    pub fn integrate_ac(&self, values: &[f64], local_values: &[f64]) -> Result<QuadratureResult> {
        self.integrate_scaled(|_| 0.0, |j| values[j], &vec![0.0; local_values.len()], local_values)
    }

    /// `∫ e^{log_factor} · value dσ_ac`, with the exponential folded into the
    /// weights so that large factors against small densities stay finite.
    /// Grid values come from the closures, local values from the slices.
    pub fn integrate_scaled(
        &self,
        log_factor: impl Fn(usize) -> f64,
        value: impl Fn(usize) -> f64,
        local_log_factor: &[f64],
        local_value: &[f64],
    ) -> Result<QuadratureResult> {
        let k = self.local_thetas.len();
        if local_log_factor.len() != k || local_value.len() != k {
            return Err(Error::InvalidParameter(format!(
                "{} local values for {k} local nodes",
                local_value.len()
            )));
        }
        let term = |lf: f64, v: f64, w: f64, at: &str| -> Result<f64> {
            if w == 0.0 || v == 0.0 {
                return Ok(0.0);
            }
            let l = lf + w.abs().ln();
            if l.is_nan() || l > MAX_LINEAR_LOG || !v.is_finite() {
                return Err(Error::Integration(format!(
                    "a.c. integrand is not representable at {at}"
                )));
            }
            Ok(v * w.signum() * l.exp())
        };
        let m = self.grid.size();
        let mut full = NeumaierSum::new();
        let mut half = NeumaierSum::new();
        for j in 0..m {
            let t = term(log_factor(j), value(j), self.regular[j], "a grid node")?;
            full.add(t);
            if j % 2 == 0 {
                half.add(t);
            }
        }
        let mut local = NeumaierSum::new();
        for i in 0..k {
            local.add(term(local_log_factor[i], local_value[i], self.local_weights[i], "a local node")?);
        }
        let full = full.value() / m as f64;
        let half = half.value() / (m / 2) as f64;
        Ok(QuadratureResult {
            value: full + local.value(),
            error_estimate: (full - half).abs(),
        })
    }
}

/// A quadrature value with its grid-halving error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// `|I_M − I_{M/2}|`, the change when only every other node is used.
    pub error_estimate: f64,
}

impl QuadratureResult {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error_estimate: 0.0,
        }
    }

    /// Relative error estimate against `max(|value|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        self.error_estimate / self.value.abs().max(floor)
    }

    pub fn is_converged(&self, rel_tol: f64, abs_floor: f64) -> bool {
        self.relative_error(abs_floor) < rel_tol
    }
}

impl std::ops::Add for QuadratureResult {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            error_estimate: self.error_estimate + rhs.error_estimate,
        }
    }
}

/// Periodic trapezoidal rule for `(1/M) Σ fⱼ`, with the even-node estimate.
pub fn trapezoid(weighted: &[f64]) -> Result<QuadratureResult> {
    if let Some(j) = weighted.iter().position(|v| !v.is_finite()) {
        return Err(Error::Integration(format!(
            "non-finite integrand at node {j}"
        )));
    }
    let m = weighted.len();
    if m < 2 || m % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "trapezoid needs an even number of nodes, got {m}"
        )));
    }
    let full = compensated_sum(weighted.iter().copied()) / m as f64;
    let half = compensated_sum(weighted.iter().step_by(2).copied()) / (m / 2) as f64;
    Ok(QuadratureResult {
        value: full,
        error_estimate: (full - half).abs(),
    })
}

/// `∫ f dσ`: values on the grid and at the local nodes of the a.c. part, and
/// exact values at each atom in the order of [`MeasureSpec::atoms`].
pub fn integrate(
    measure: &MeasureSpec,
    density: &DensityTrace,
    values: &[f64],
    local_values: &[f64],
    atom_values: &[f64],
) -> Result<QuadratureResult> {
    if values.len() != density.grid.size() {
        return Err(Error::InvalidParameter(format!(
            "integrand has {} values for a grid of {}",
            values.len(),
            density.grid.size()
        )));
    }
    if atom_values.len() != measure.atoms.len() {
        return Err(Error::InvalidParameter(format!(
            "{} atom values for {} atoms",
            atom_values.len(),
            measure.atoms.len()
        )));
    }
    if atom_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration("non-finite integrand at an atom".into()));
    }
    let ac = density.integrate_ac(values, local_values)?;
    let atoms = compensated_sum(
        measure
            .atoms
            .iter()
            .zip(atom_values)
            .map(|(a, v)| a.mass / measure.normalization * v),
    );
    Ok(ac + QuadratureResult::exact(atoms))
}

/// Trigonometric moments `c_j = ∫ e^{−ijθ} dσ`, `j = 0..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector(pub Vec<Complex64>);

impl MomentVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `c_j` for any integer `j`, using `c_{−j} = conj(c_j)`.
    pub fn get(&self, j: isize) -> Complex64 {
        if j >= 0 {
            self.0[j as usize]
        } else {
            self.0[(-j) as usize].conj()
        }
    }

    /// Lebesgue measure: `c_j = δ_{j0}`.
    pub fn lebesgue(p: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); p + 1];
        c[0] = Complex64::new(1.0, 0.0);
        Self(c)
    }
}

/// Moments of the a.c. part by FFT quadrature plus exact atom terms.
pub fn moments_from_measure(
    measure: &MeasureSpec,
    p: usize,
    grid: CircleGrid,
) -> Result<MomentVector> {
    if p > grid.size() / 4 {
        return Err(Error::Resolution(format!(
            "{p} moments need more than {} nodes",
            grid.size()
        )));
    }
    let density = measure.density_trace(grid)?;
    Ok(moments_from_density(measure, &density, p))
}

pub(crate) fn moments_from_density(
    measure: &MeasureSpec,
    density: &DensityTrace,
    p: usize,
) -> MomentVector {
    let m = density.grid.size();
    let mut buf: Vec<Complex64> = density.regular.iter().map(|w| Complex64::new(*w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mut local = vec![Complex64::new(0.0, 0.0); p + 1];
    for (t, w) in density.local_thetas.iter().zip(&density.local_weights) {
        let step = Complex64::from_polar(1.0, -t);
        let mut phase = Complex64::new(*w, 0.0);
        for c in local.iter_mut() {
            *c += phase;
            phase *= step;
        }
    }
    let c = (0..=p)
        .map(|j| {
            let mut c = buf[j] / m as f64 + local[j];
            for a in &measure.atoms {
                c += Complex64::from_polar(a.mass / measure.normalization, -(j as f64) * a.theta);
            }
            c
        })
        .collect();
    MomentVector(c)
}

/// Copies `prefix` and appends `block` (the new Schur parameters on
/// `(N′, N]`); every block entry must lie in `[0, 1/2)`.
pub fn extend_schur(prefix: &SchurSequence, block: &SchurSequence) -> Result<SchurSequence> {
    if let Some((i, g)) = block
        .iter()
        .enumerate()
        .find(|(_, g)| !(0.0..0.5).contains(g))
    {
        return Err(Error::InvalidParameter(format!(
            "block entry {i} = {g} is not in [0, 1/2)"
        )));
    }
    let mut v = prefix.as_slice().to_vec();
    v.extend(block.iter());
    SchurSequence::new(v)
}

/// `κ = 1/K_{N−1}(μ₁)(1,1)`, returned in log form.
pub fn kappa_choice(schur_mu1: &SchurSequence, n: usize) -> Result<LogValue> {
    if n == 0 {
        return Err(Error::InvalidParameter("kappa_choice needs N ≥ 1".into()));
    }
    if n - 1 > schur_mu1.len() {
        return Err(Error::OutOfRange {
            requested: n - 1,
            available: schur_mu1.len(),
        });
    }
    let scalars = ScalarChannels::new(schur_mu1.as_slice(), n);
    Ok(LogValue::from_ln(-scalars.log_kernel_at_one(n)))
}

/// `Φ_N(μ₁)` and `K_{N−1}(μ₁)(z,1)` on a grid; any point-mass perturbation
/// `Φ_N(μ₁ + κδ₁)` is a linear combination of the two.
#[derive(Debug, Clone)]
pub struct PerturbationBasis {
    grid: CircleGrid,
    degree: usize,
    log_bound: f64,
    phi: Vec<Complex64>,
    kernel: Vec<Complex64>,
    kernel_log_scale: f64,
    log_phi_one: f64,
    log_kernel_one: f64,
    log_kappa: f64,
}

impl PerturbationBasis {
    pub(crate) fn from_snapshot(grid: CircleGrid, snap: &SweepSnapshot) -> Self {
        Self {
            grid,
            degree: snap.degree,
            log_bound: snap.log_bound,
            phi: snap.phi.clone(),
            kernel: snap
                .kernel
                .clone()
                .expect("perturbation basis needs a kernel sweep"),
            kernel_log_scale: snap.kernel_log_scale,
            log_phi_one: snap.log_value_at_one,
            log_kernel_one: snap.log_kernel_at_one,
            log_kappa: snap.log_kappa,
        }
    }

    /// Basis for `Φ_N` from the first `N` parameters of `schur_mu1`.
    pub fn new(schur_mu1: &SchurSequence, n: usize, grid: CircleGrid) -> Result<Self> {
        schur_mu1.check_degree(n)?;
        grid.ensure_resolves(n)?;
        let out = sweep(&schur_mu1.as_slice()[..n], &[n], grid, true);
        Ok(Self::from_snapshot(grid, out.last()))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `ln K_{N−1}(μ₁)(1,1)`.
    pub fn log_kernel_at_one(&self) -> f64 {
        self.log_kernel_one
    }

    /// `ln Φ_N(μ₁)(1)`.
    pub fn log_unperturbed_at_one(&self) -> f64 {
        self.log_phi_one
    }

    /// `ln(1 + κK_{N−1}(1,1))`.
    fn log_denominator(&self, kappa: f64) -> f64 {
        ln_1p_exp(kappa.ln() + self.log_kernel_one)
    }

    /// `ln Φ_N(σ)(1) = ln Φ_N(μ₁)(1) − ln(1 + κK_{N−1}(1,1))`.
    pub fn log_value_at_one(&self, kappa: f64) -> f64 {
        self.log_phi_one - self.log_denominator(kappa)
    }

    /// `ln ‖Φ_N(σ)‖²` in `L²(σ)`, `σ = (μ₁ + κδ₁)/(1+κ)`.
    pub fn log_norm_sq(&self, kappa: f64) -> f64 {
        let base = -2.0 * self.log_kappa;
        let extra = kappa.ln() + 2.0 * self.log_phi_one - self.log_denominator(kappa);
        let hi = base.max(extra);
        hi + ((base - hi).exp() + (extra - hi).exp()).ln() - kappa.ln_1p()
    }

    /// Geronimus formula:
    /// `Φ_N(σ) = Φ_N(μ₁) − [κΦ_N(μ₁)(1)/(1 + κK_{N−1}(1,1))]·K_{N−1}(μ₁)(·,1)`.
    pub fn perturbed(&self, kappa: f64) -> Result<GridPolynomialPair> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        let log_coeff = kappa.ln() + self.log_phi_one - self.log_denominator(kappa);
        let c = (log_coeff + self.kernel_log_scale - self.log_bound).exp();
        if !c.is_finite() {
            return Err(Error::Integration(
                "perturbation coefficient overflowed".into(),
            ));
        }
        let phi: Vec<Complex64> = self
            .phi
            .iter()
            .zip(&self.kernel)
            .map(|(u, k)| u - k * c)
            .collect();
        let m = self.grid.size();
        let shift = (self.degree % m) as u128;
        let phi_star = phi
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let turns = ((j as u128 * shift) % m as u128) as f64 / m as f64;
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * turns) * p.conj()
            })
            .collect();
        Ok(GridPolynomialPair::from_parts(
            self.grid,
            self.degree,
            self.log_bound,
            phi,
            phi_star,
            self.log_value_at_one(kappa),
        ))
    }
}

/// `Φ_N(σ)` on a grid for `σ = (μ₁ + κδ₁)/(1+κ)`.
pub fn geronimus_perturbed_phi(
    schur_mu1: &SchurSequence,
    n: usize,
    kappa: f64,
    grid: CircleGrid,
) -> Result<GridPolynomialPair> {
    PerturbationBasis::new(schur_mu1, n, grid)?.perturbed(kappa)
}

/// The first `len` Schur parameters of `(μ₁ + κδ₁)/(1+κ)`, where `μ₁` is the
/// Bernstein–Szegő measure of `schur_mu1`.
///
/// Uses `γₙ(σ) = Φₙ₊₁(σ)(0)` with the point-mass formula evaluated at `z = 0`,
/// where `φₖ(0) = κₖγₖ₋₁`. All scalar; cost `O(len)`.
pub fn perturbed_schur(schur_mu1: &SchurSequence, kappa: f64, len: usize) -> Result<SchurSequence> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let g = schur_mu1.as_slice();
    let d = g.len();
    let ln_kappa = kappa.ln();
    let gamma_mu = |k: usize| if k < d { g[k] } else { 0.0 };

    let (mut ln_b, mut ln_k) = (NeumaierSum::new(), NeumaierSum::new());
    // ln Φₙ(1) and ln κₙ at the current degree n
    let mut ln_one = 0.0;
    let mut ln_kap = 0.0;
    let mut k11 = crate::logsum::LogSumExp::new();
    let mut mixed = 0.0;
    let mut mixed_scale = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let phi_at_zero = if n == 0 { 1.0 } else { gamma_mu(n - 1) };
        let t = 2.0 * ln_kap + ln_one;
        if t > mixed_scale {
            mixed *= (mixed_scale - t).exp();
            mixed_scale = t;
        }
        mixed += phi_at_zero * (t - mixed_scale).exp();
        k11.add(2.0 * (ln_kap + ln_one));

        let gn = gamma_mu(n);
        ln_b.add(gn.ln_1p());
        ln_k.add((-gn * gn).ln_1p());
        let ln_one_next = ln_b.value();
        let ln_c = ln_kappa + ln_one_next - ln_1p_exp(ln_kappa + k11.value());
        out.push(gn - (ln_c + mixed_scale).exp() * mixed);

        ln_one = ln_one_next;
        ln_kap = -0.5 * ln_k.value();
    }
    SchurSequence::new(out)
}

/// Both sides of `∫ ln σ′ dm = Σ ln(1 − γₖ²)` for a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SzegoIntegral {
    pub quadrature: QuadratureResult,
    /// `Σ ln(1 − γₖ²) − ln normalization` over the prefix.
    pub analytic: f64,
}

pub fn szego_integral(measure: &MeasureSpec, grid: CircleGrid) -> Result<SzegoIntegral> {
    let quadrature = measure.density_trace(grid)?.log_density_integral();
    let analytic = measure.schur_prefix.log_szego_sum() - measure.normalization.ln();
    Ok(SzegoIntegral {
        quadrature,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opuc::{evaluate, leading_coefficient_log};
    use crate::oracle::{gram_schmidt_oracle, schur_from_moments};

    fn bs(gs: &[f64]) -> MeasureSpec {
        MeasureSpec::bernstein_szego(SchurSequence::new(gs.to_vec()).unwrap())
    }

    #[test]
    fn lebesgue_moments() {
        let c = moments_from_measure(&MeasureSpec::lebesgue(), 6, CircleGrid::for_degree(0)).unwrap();
        assert!((c.0[0].re - 1.0).abs() < 1e-14);
        for j in 1..=6 {
            assert!(c.0[j].norm() < 1e-14);
        }
    }

    #[test]
    fn pure_atom_moments() {
        let m = MeasureSpec::new(
            SchurSequence::default(),
            vec![Atom { theta: 0.0, mass: 1e12 }],
            1.0 + 1e12,
        )
        .unwrap();
        let c = moments_from_measure(&m, 4, CircleGrid::for_degree(0)).unwrap();
        for j in 0..=4 {
            assert!((c.0[j].re - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn half_parameter_first_moment() {
        // For γ₀ = 1/2: Φ₁ = z + 1/2 ⟂ 1 gives c₁ = −1/2 under e^{−ijθ}.
        let grid = CircleGrid::for_degree(1);
        let c = moments_from_measure(&bs(&[0.5]), 3, grid).unwrap();
        assert!((c.0[1].re + 0.5).abs() < 1e-13, "{}", c.0[1]);
        let phi = gram_schmidt_oracle(&c, 1).unwrap();
        assert!((phi[0].re - 0.5).abs() < 1e-12);

        let sigma = bs(&[0.5]).add_atom(0.2).unwrap();
        let cs = moments_from_measure(&sigma, 3, grid).unwrap();
        for j in 0..=3 {
            let expect = (c.0[j] + 0.2) / 1.2;
            assert!((cs.0[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn schur_round_trip_through_moments() {
        let gs = [0.3, -0.45, 0.1, 0.6, -0.2, 0.05];
        let grid = CircleGrid::for_degree(6);
        let c = moments_from_measure(&bs(&gs), 8, grid).unwrap();
        let rec = schur_from_moments(&c, 8).unwrap();
        for k in 0..6 {
            assert!((rec[k].re - gs[k]).abs() < 1e-8, "γ_{k}");
        }
        for k in 6..8 {
            assert!(rec[k].norm() < 1e-8);
        }
    }

    #[test]
    fn atom_moment_recursion_small_kappa() {
        let m = bs(&[0.3, 0.2]);
        let grid = CircleGrid::for_degree(2);
        let c0 = moments_from_measure(&m, 5, grid).unwrap();
        let c1 = moments_from_measure(&m.add_atom(1e-8).unwrap(), 5, grid).unwrap();
        for j in 0..=5 {
            assert!((c0.0[j] - c1.0[j]).norm() <= 2e-8);
        }
        let c = moments_from_measure(&MeasureSpec::lebesgue().add_atom(1.0).unwrap(), 1, grid).unwrap();
        assert!((c.0[1].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn add_atom_rules() {
        let m = MeasureSpec::lebesgue();
        assert!(m.add_atom(0.0).is_err());
        assert!(m.add_atom(-1.0).is_err());
        let s = m.add_atom(0.5).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
        assert!(s.add_atom(0.1).is_err());
    }

    #[test]
    fn extend_rules() {
        let p = SchurSequence::new(vec![0.1]).unwrap();
        let e = extend_schur(&p, &SchurSequence::default()).unwrap();
        assert_eq!(e, p);
        let b = SchurSequence::new(vec![0.2, 0.3]).unwrap();
        assert_eq!(extend_schur(&p, &b).unwrap().as_slice(), &[0.1, 0.2, 0.3]);
        let bad = SchurSequence::new(vec![0.2, 0.5]).unwrap();
        assert!(extend_schur(&p, &bad).is_err());
        let neg = SchurSequence::new(vec![-0.1]).unwrap();
        assert!(extend_schur(&p, &neg).is_err());
    }

    #[test]
    fn kappa_examples() {
        let k = kappa_choice(&SchurSequence::zeros(4), 4).unwrap();
        assert!((k.value().unwrap() - 0.25).abs() < 1e-15);
        let k = kappa_choice(&SchurSequence::new(vec![0.5]).unwrap(), 2).unwrap();
        assert!((k.value().unwrap() - 0.25).abs() < 1e-14);
        assert!(kappa_choice(&SchurSequence::zeros(4), 0).is_err());
    }

    #[test]
    fn geronimus_matches_oracle() {
        let mu1 = SchurSequence::new(vec![0.3, 0.2]).unwrap();
        let grid = CircleGrid::for_degree(2);
        let p = geronimus_perturbed_phi(&mu1, 2, 0.1, grid).unwrap();
        let coeffs = p.monic_coefficients().unwrap();
        let sigma = MeasureSpec::bernstein_szego(mu1).add_atom(0.1).unwrap();
        let c = moments_from_measure(&sigma, 4, grid).unwrap();
        let oracle = gram_schmidt_oracle(&c, 2).unwrap();
        for (a, b) in coeffs.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn geronimus_small_kappa_is_identity() {
        let mu1 = SchurSequence::new(vec![0.3, 0.2, 0.1]).unwrap();
        let grid = CircleGrid::for_degree(3);
        let p = geronimus_perturbed_phi(&mu1, 3, 1e-300, grid).unwrap();
        let q = evaluate(&mu1, 3, grid).unwrap();
        for j in (0..grid.size()).step_by(37) {
            assert!((p.phi(j).unwrap() - q.phi(j).unwrap()).norm() < 1e-14);
        }
        assert!(p.modulus_symmetry_error() < 1e-10);
    }

    #[test]
    fn geronimus_half_value() {
        let mu1 = SchurSequence::new(vec![0.0, 0.0, 0.2, 0.15, 0.1, 0.05]).unwrap();
        let n = 6;
        let kappa = kappa_choice(&mu1, n).unwrap().value().unwrap();
        let basis = PerturbationBasis::new(&mu1, n, CircleGrid::for_degree(n)).unwrap();
        let p = basis.perturbed(kappa).unwrap();
        let ratio = (p.log_value_at_one() - basis.log_unperturbed_at_one()).exp();
        assert!((ratio - 0.5).abs() < 1e-12);
        let grid_ratio = p.phi(0).unwrap().re / basis.log_unperturbed_at_one().exp();
        assert!((grid_ratio - 0.5).abs() < 1e-9);
    }

    #[test]
    fn perturbed_schur_matches_oracle_and_norm() {
        let mu1 = SchurSequence::new(vec![0.3, 0.2, -0.1]).unwrap();
        let kappa = 0.37;
        let sigma = MeasureSpec::bernstein_szego(mu1.clone()).add_atom(kappa).unwrap();
        let grid = CircleGrid::for_degree(3);
        let c = moments_from_measure(&sigma, 10, grid).unwrap();
        let oracle = schur_from_moments(&c, 8).unwrap();
        let ours = perturbed_schur(&mu1, kappa, 8).unwrap();
        for k in 0..8 {
            assert!((oracle[k].re - ours[k]).abs() < 1e-9, "γ_{k}: {} vs {}", oracle[k], ours[k]);
        }
        // ‖Φₙ(σ)‖² = ∏(1 − γₖ(σ)²)
        for n in 1..6 {
            let basis = PerturbationBasis::new(&mu1_padded(&mu1, n), n, grid).unwrap();
            let lhs = basis.log_norm_sq(kappa);
            let rhs = -2.0 * leading_coefficient_log(&ours, n).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "n = {n}");
        }
    }

    fn mu1_padded(mu1: &SchurSequence, n: usize) -> SchurSequence {
        let mut v = mu1.as_slice().to_vec();
        v.resize(v.len().max(n), 0.0);
        SchurSequence::new(v).unwrap()
    }

    #[test]
    fn szego_identity_examples() {
        let s = szego_integral(&MeasureSpec::lebesgue(), CircleGrid::for_degree(0)).unwrap();
        assert!(s.quadrature.value.abs() < 1e-15 && s.analytic == 0.0);
        let s = szego_integral(&bs(&[0.5]), CircleGrid::for_degree(1)).unwrap();
        assert!((s.analytic - 0.75f64.ln()).abs() < 1e-15);
        assert!((s.quadrature.value - s.analytic).abs() < 1e-8);
    }

    #[test]
    fn integrate_total_mass() {
        let m = bs(&[0.4, -0.3, 0.2]).add_atom(0.7).unwrap();
        let grid = CircleGrid::for_degree(3);
        let d = m.density_trace(grid).unwrap();
        let ones = vec![1.0; grid.size()];
        let q = integrate(&m, &d, &ones, &[], &[1.0]).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
        let mut bad = ones.clone();
        bad[3] = f64::NAN;
        assert!(integrate(&m, &d, &bad, &[], &[1.0]).is_err());
        assert!(integrate(&m, &d, &ones, &[], &[]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = bs(&[0.1, 1.0 / 3.0, -0.25]).add_atom(std::f64::consts::PI / 7.0).unwrap();
        let text = m.to_string();
        let back: MeasureSpec = text.parse().unwrap();
        assert_eq!(back, m);
        assert!("schur 0.1\n".parse::<MeasureSpec>().is_err());
        assert!("normalization 2\nschur\n".parse::<MeasureSpec>().is_err());
        assert!("normalization 1\nschur 1.5\n".parse::<MeasureSpec>().is_err());
    }
}
