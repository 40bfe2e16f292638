//! Monic orthogonal polynomials on the unit circle driven by real Schur
//! parameters.
//!
//! Polynomials are stored as values on a [`CircleGrid`], never as coefficient
//! vectors. Grid values are kept relative to the bound
//! `Bₙ = ∏_{k<n}(1+|γₖ|) ≥ |Φₙ(z)|` (|z| = 1), so the stored mantissas never
//! exceed one and the scale lives in the log domain. The value at `z = 1` has
//! its own exact channel: for real parameters `Φₙ(1) = Φₙ*(1) = ∏(1+γₖ)`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::logsum::{LogSumExp, LogValue, NeumaierSum, MAX_LINEAR_LOG};
use crate::schur::SchurSequence;

const CHUNK: usize = 256;

/// `(Φₙ, Φₙ*)` on a grid, plus the exact value at `z = 1`.
#[derive(Debug, Clone)]
pub struct GridPolynomialPair {
    grid: CircleGrid,
    degree: usize,
    log_scale: f64,
    phi: Vec<Complex64>,
    phi_star: Vec<Complex64>,
    log_value_at_one: f64,
}

impl GridPolynomialPair {
    /// `Φ₀ = Φ₀* = 1`.
    pub fn unit(grid: CircleGrid) -> Self {
        let m = grid.size();
        Self {
            grid,
            degree: 0,
            log_scale: 0.0,
            phi: vec![Complex64::new(1.0, 0.0); m],
            phi_star: vec![Complex64::new(1.0, 0.0); m],
            log_value_at_one: 0.0,
        }
    }

    pub(crate) fn from_parts(
        grid: CircleGrid,
        degree: usize,
        log_scale: f64,
        phi: Vec<Complex64>,
        phi_star: Vec<Complex64>,
        log_value_at_one: f64,
    ) -> Self {
        debug_assert_eq!(phi.len(), grid.size());
        debug_assert_eq!(phi_star.len(), grid.size());
        Self {
            grid,
            degree,
            log_scale,
            phi,
            phi_star,
            log_value_at_one,
        }
    }

    pub fn grid(&self) -> CircleGrid {
        self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Stored values are `exp(-log_scale)` times the true values.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn phi_scaled(&self) -> &[Complex64] {
        &self.phi
    }

    pub fn phi_star_scaled(&self) -> &[Complex64] {
        &self.phi_star
    }

    /// `Φₙ(zⱼ)`, when it is representable.
    pub fn phi(&self, j: usize) -> Option<Complex64> {
        (self.log_scale <= MAX_LINEAR_LOG).then(|| self.phi[j] * self.log_scale.exp())
    }

    pub fn phi_star(&self, j: usize) -> Option<Complex64> {
        (self.log_scale <= MAX_LINEAR_LOG).then(|| self.phi_star[j] * self.log_scale.exp())
    }

    /// `ln |Φₙ(zⱼ)|`.
    pub fn log_abs_phi(&self, j: usize) -> f64 {
        self.phi[j].norm().ln() + self.log_scale
    }

    pub fn log_abs_phi_star(&self, j: usize) -> f64 {
        self.phi_star[j].norm().ln() + self.log_scale
    }

    /// `ln Φₙ(1)` from the exact channel.
    pub fn log_value_at_one(&self) -> f64 {
        self.log_value_at_one
    }

    /// `Φₙ(1)` when representable.
    pub fn value_at_one(&self) -> Option<f64> {
        LogValue::from_ln(self.log_value_at_one).value()
    }

    /// Largest `||Φₙ| − |Φₙ*|| / |Φₙ|` over the grid.
    pub fn modulus_symmetry_error(&self) -> f64 {
        self.phi
            .iter()
            .zip(&self.phi_star)
            .map(|(p, q)| {
                let a = p.norm();
                if a == 0.0 {
                    q.norm()
                } else {
                    (a - q.norm()).abs() / a
                }
            })
            .fold(0.0, f64::max)
    }

    /// One step of the Szegő recurrence:
    /// `Φₙ₊₁ = zΦₙ + γΦₙ*`, `Φₙ₊₁* = Φₙ* + γzΦₙ`.
    pub fn szego_step(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let s = 1.0 / (1.0 + gamma.abs());
        let nodes = self.grid.nodes();
        let mut phi = Vec::with_capacity(nodes.len());
        let mut phi_star = Vec::with_capacity(nodes.len());
        for ((z, p), q) in nodes.iter().zip(&self.phi).zip(&self.phi_star) {
            let zp = z * p;
            phi.push((zp + q * gamma) * s);
            phi_star.push((q + zp * gamma) * s);
        }
        Ok(Self {
            grid: self.grid,
            degree: self.degree + 1,
            log_scale: self.log_scale + gamma.abs().ln_1p(),
            phi,
            phi_star,
            log_value_at_one: self.log_value_at_one + gamma.ln_1p(),
        })
    }

    /// Monic coefficients `a₀, …, aₙ` recovered by FFT from the grid values.
    pub fn monic_coefficients(&self) -> Result<Vec<Complex64>> {
        if self.degree >= self.grid.size() {
            return Err(Error::Resolution(format!(
                "degree {} needs more than {} nodes",
                self.degree,
                self.grid.size()
            )));
        }
        if self.log_scale > MAX_LINEAR_LOG {
            return Err(Error::Integration(
                "coefficients are not representable".into(),
            ));
        }
        let m = self.grid.size();
        let mut buf = self.phi.clone();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let scale = self.log_scale.exp() / m as f64;
        Ok(buf[..=self.degree].iter().map(|c| c * scale).collect())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma.abs() >= 1.0 {
        Err(Error::InvalidParameter(format!(
            "Schur parameter {gamma} is not in (-1, 1)"
        )))
    } else {
        Ok(())
    }
}

/// `Φₙ` and `Φₙ*` on the grid, iterating the recurrence node by node.
pub fn evaluate(schur: &SchurSequence, n: usize, grid: CircleGrid) -> Result<GridPolynomialPair> {
    schur.check_degree(n)?;
    let gammas = &schur.as_slice()[..n];
    let out = sweep(gammas, &[n], grid, false);
    Ok(out.snapshots.into_iter().next().expect("one snapshot").into_pair(grid))
}

/// `ln κₙ = −½ Σ_{k<n} ln(1 − γₖ²)`, the log of the leading coefficient of `φₙ`.
pub fn leading_coefficient_log(schur: &SchurSequence, n: usize) -> Result<f64> {
    schur.check_degree(n)?;
    let mut acc = NeumaierSum::new();
    for g in schur.iter().take(n) {
        acc.add((-g * g).ln_1p());
    }
    Ok(-0.5 * acc.value())
}

/// Coefficients `a₀, …, aₙ` of the monic `Φₙ`, built in coefficient space by
/// `Φₖ₊₁ = zΦₖ + γₖΦₖ*`. Only sensible for moderate `n`.
pub fn monic_coefficients(schur: &SchurSequence, n: usize) -> Result<Vec<f64>> {
    schur.check_degree(n)?;
    let mut phi = vec![1.0];
    for &g in &schur.as_slice()[..n] {
        let k = phi.len();
        let mut next = vec![0.0; k + 1];
        for j in 0..k {
            next[j + 1] += phi[j];
            next[j] += g * phi[k - 1 - j];
        }
        phi = next;
    }
    Ok(phi)
}

/// `Kₙ(1,1) = Σ_{k≤n} |φₖ(1)|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelAtOne {
    pub ln: f64,
}

impl KernelAtOne {
    pub fn value(&self) -> Option<f64> {
        LogValue::from_ln(self.ln).value()
    }
}

/// Christoffel–Darboux kernel on the diagonal at `z = w = 1`, accumulated in
/// log-sum-exp form.
pub fn cd_kernel_at_one(schur: &SchurSequence, n: usize) -> Result<KernelAtOne> {
    if n >= schur.len() + 1 {
        return Err(Error::OutOfRange {
            requested: n,
            available: schur.len(),
        });
    }
    let scalars = ScalarChannels::new(schur.as_slice(), n + 1);
    Ok(KernelAtOne {
        ln: scalars.log_kernel_at_one(n + 1),
    })
}

/// `Φₙ(z)` at a single point as `(mantissa, log_scale)`.
pub fn evaluate_at(schur: &SchurSequence, n: usize, z: Complex64) -> Result<(Complex64, f64)> {
    schur.check_degree(n)?;
    Ok(run_at(&schur.as_slice()[..n], z))
}

/// `ln|Φ_d(z)|` with `d = gammas.len()`.
pub fn log_abs_at(gammas: &[f64], z: Complex64) -> f64 {
    let (p, log_scale) = run_at(gammas, z);
    log_scale + p.norm().ln()
}

fn run_at(gammas: &[f64], z: Complex64) -> (Complex64, f64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(1.0, 0.0);
    let mut log_scale = 0.0;
    for g in gammas {
        let s = 1.0 / (1.0 + g.abs());
        let zp = z * p;
        p = (zp + q * g) * s;
        q = (q + zp * g) * s;
        log_scale += g.abs().ln_1p();
    }
    (p, log_scale)
}

/// `Φₙ`, `Φₙ′` and `Φₙ*` at one point, sharing the factor `e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvaluation {
    pub phi: Complex64,
    pub derivative: Complex64,
    pub phi_star: Complex64,
    pub log_scale: f64,
}

/// Runs the recurrence over all of `gammas` at `z`, differentiating along.
pub fn evaluate_with_derivative(gammas: &[f64], z: Complex64) -> PointEvaluation {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mut p, mut q, mut dp, mut dq) = (one, one, zero, zero);
    let mut log_scale = 0.0;
    for &g in gammas {
        let s = 1.0 / (1.0 + g.abs());
        let zp = z * p;
        let dzp = p + z * dp;
        p = (zp + q * g) * s;
        dp = (dzp + dq * g) * s;
        q = (q + zp * g) * s;
        dq = (dq + dzp * g) * s;
        log_scale += g.abs().ln_1p();
    }
    PointEvaluation {
        phi: p,
        derivative: dp,
        phi_star: q,
        log_scale,
    }
}

/// Newton iteration for a zero of `Φₙ` started at `start`; `None` when the
/// last of `max_iter` steps is still above `1e-13`.
pub fn newton_zero(gammas: &[f64], start: Complex64, max_iter: usize) -> Option<Complex64> {
    deflated_newton_zero(gammas, start, &[], max_iter)
}

/// [`newton_zero`] on `Φₙ(z)/∏(z − aᵢ)` over the `known` zeros, which steers
/// the iteration away from zeros already found.
pub fn deflated_newton_zero(
    gammas: &[f64],
    start: Complex64,
    known: &[Complex64],
    max_iter: usize,
) -> Option<Complex64> {
    let mut z = start;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let e = evaluate_with_derivative(gammas, z);
        if e.phi.norm() == 0.0 {
            return Some(z);
        }
        let ratio = e.derivative / e.phi - known.iter().map(|a| (z - a).inv()).sum::<Complex64>();
        if ratio.norm() == 0.0 {
            return None;
        }
        let step = ratio.inv();
        z -= step;
        if !z.is_finite() {
            return None;
        }
        last = step.norm();
        if last <= 1e-16 {
            return Some(z);
        }
    }
    (last <= 1e-13).then_some(z)
}

/// Prefix scalars shared by the sweep: `ln Bₖ`, `ln Φₖ(1)`, `ln κₖ`.
#[derive(Debug, Clone)]
pub(crate) struct ScalarChannels {
    pub log_bound: Vec<f64>,
    pub log_one: Vec<f64>,
    pub log_kappa: Vec<f64>,
}

impl ScalarChannels {
    /// Channels for degrees `0..=len`.
    pub fn new(gammas: &[f64], len: usize) -> Self {
        let len = len.min(gammas.len());
        let mut log_bound = Vec::with_capacity(len + 1);
        let mut log_one = Vec::with_capacity(len + 1);
        let mut log_kappa = Vec::with_capacity(len + 1);
        let (mut b, mut o, mut k) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
        for i in 0..=len {
            log_bound.push(b.value());
            log_one.push(o.value());
            log_kappa.push(-0.5 * k.value());
            if i < len {
                let g = gammas[i];
                b.add(g.abs().ln_1p());
                o.add(g.ln_1p());
                k.add((-g * g).ln_1p());
            }
        }
        Self {
            log_bound,
            log_one,
            log_kappa,
        }
    }

    /// `ln K_{n−1}(1,1) = ln Σ_{k<n} κₖ² Φₖ(1)²`.
    pub fn log_kernel_at_one(&self, n: usize) -> f64 {
        let mut acc = LogSumExp::new();
        for k in 0..n {
            acc.add(2.0 * (self.log_kappa[k] + self.log_one[k]));
        }
        acc.value()
    }
}

/// Grid state of the recurrence at one degree, optionally with the kernel
/// `K_{n−1}(z, 1) = Σ_{k<n} φₖ(z)φₖ(1)`.
#[derive(Debug, Clone)]
pub(crate) struct SweepSnapshot {
    pub degree: usize,
    pub log_bound: f64,
    pub phi: Vec<Complex64>,
    pub phi_star: Vec<Complex64>,
    pub log_value_at_one: f64,
    pub log_kappa: f64,
    /// Kernel values are `exp(kernel_log_scale)` times the stored ones.
    pub kernel: Option<Vec<Complex64>>,
    pub kernel_log_scale: f64,
    pub log_kernel_at_one: f64,
}

impl SweepSnapshot {
    pub fn into_pair(self, grid: CircleGrid) -> GridPolynomialPair {
        GridPolynomialPair::from_parts(
            grid,
            self.degree,
            self.log_bound,
            self.phi,
            self.phi_star,
            self.log_value_at_one,
        )
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SweepOutput {
    /// Snapshots in increasing degree; the last one is the full length.
    pub snapshots: Vec<SweepSnapshot>,
}

impl SweepOutput {
    pub fn at(&self, degree: usize) -> Option<&SweepSnapshot> {
        self.snapshots.iter().find(|s| s.degree == degree)
    }

    pub fn last(&self) -> &SweepSnapshot {
        self.snapshots.last().expect("sweep always has a final snapshot")
    }
}

struct ChunkOut {
    phi: Vec<Vec<Complex64>>,
    phi_star: Vec<Vec<Complex64>>,
    kernel: Vec<Vec<Complex64>>,
}

/// Runs the recurrence over all of `gammas` on every grid node, recording
/// `(Φₙ, Φₙ*)` (and optionally `K_{n−1}(z,1)`) at each requested degree and at
/// the final degree. Cost is `O(len · M)`; nodes are processed in parallel
/// chunks, with results independent of the thread count.
pub(crate) fn sweep(
    gammas: &[f64],
    degrees: &[usize],
    grid: CircleGrid,
    with_kernel: bool,
) -> SweepOutput {
    let d = gammas.len();
    let mut snaps: Vec<usize> = degrees.iter().copied().filter(|&n| n <= d).collect();
    snaps.push(d);
    snaps.sort_unstable();
    snaps.dedup();

    let scalars = ScalarChannels::new(gammas, d);
    let scale: Vec<f64> = gammas.iter().map(|g| 1.0 / (1.0 + g.abs())).collect();

    // Kernel terms t_k = ln(κₖ² Φₖ(1) Bₖ) multiply the scaled values uₖ(z).
    // Running maximum T_k keeps the accumulated sum bounded.
    let mut rescale = vec![1.0; d];
    let mut weight = vec![0.0; d];
    let mut kernel_scale_before = vec![0.0; d + 1];
    if with_kernel {
        let mut running = f64::NEG_INFINITY;
        for k in 0..d {
            kernel_scale_before[k] = if running.is_finite() { running } else { 0.0 };
            let t = 2.0 * scalars.log_kappa[k] + scalars.log_one[k] + scalars.log_bound[k];
            if t > running {
                rescale[k] = if running.is_finite() {
                    (running - t).exp()
                } else {
                    1.0
                };
                running = t;
            }
            weight[k] = (t - running).exp();
        }
        kernel_scale_before[d] = if running.is_finite() { running } else { 0.0 };
    }

    let nodes = grid.nodes();
    let chunks: Vec<ChunkOut> = nodes
        .par_chunks(CHUNK)
        .map(|zs| {
            let w = zs.len();
            let mut u = vec![Complex64::new(1.0, 0.0); w];
            let mut v = vec![Complex64::new(1.0, 0.0); w];
            let mut kt = vec![Complex64::new(0.0, 0.0); w];
            let mut out = ChunkOut {
                phi: Vec::with_capacity(snaps.len()),
                phi_star: Vec::with_capacity(snaps.len()),
                kernel: Vec::with_capacity(snaps.len()),
            };
            let mut next = 0;
            for k in 0..=d {
                if next < snaps.len() && snaps[next] == k {
                    out.phi.push(u.clone());
                    out.phi_star.push(v.clone());
                    if with_kernel {
                        out.kernel.push(kt.clone());
                    }
                    next += 1;
                }
                if k == d {
                    break;
                }
                if with_kernel {
                    let (r, a) = (rescale[k], weight[k]);
                    for (acc, ui) in kt.iter_mut().zip(&u) {
                        *acc = *acc * r + ui * a;
                    }
                }
                let g = gammas[k];
                let s = scale[k];
                for ((ui, vi), z) in u.iter_mut().zip(v.iter_mut()).zip(zs) {
                    let zu = z * *ui;
                    *ui = (zu + *vi * g) * s;
                    *vi = (*vi + zu * g) * s;
                }
            }
            out
        })
        .collect();

    let m = grid.size();
    let mut snapshots = Vec::with_capacity(snaps.len());
    for (i, &n) in snaps.iter().enumerate() {
        let mut phi = Vec::with_capacity(m);
        let mut phi_star = Vec::with_capacity(m);
        let mut kernel = with_kernel.then(|| Vec::with_capacity(m));
        for c in &chunks {
            phi.extend_from_slice(&c.phi[i]);
            phi_star.extend_from_slice(&c.phi_star[i]);
            if let Some(k) = kernel.as_mut() {
                k.extend_from_slice(&c.kernel[i]);
            }
        }
        snapshots.push(SweepSnapshot {
            degree: n,
            log_bound: scalars.log_bound[n],
            phi,
            phi_star,
            log_value_at_one: scalars.log_one[n],
            log_kappa: scalars.log_kappa[n],
            kernel,
            kernel_log_scale: kernel_scale_before[n],
            log_kernel_at_one: scalars.log_kernel_at_one(n),
        });
    }
    SweepOutput { snapshots }
}
