//! Projected gradient ascent of `ln Γₙ` over `{γ ≥ 0, Σγ² = L²}`.

use crate::construction::lemma::{gamma_psi, gamma_upper_bound};
use crate::error::{Error, Result};
use crate::logsum::LogSumExp;

/// Largest length the search accepts.
pub const MAX_SEARCH_LEN: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSchedule {
    pub iterations: usize,
    pub initial_step: f64,
    /// Stop once a full step improves `ln Γ` by less than this.
    pub tolerance: f64,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        Self {
            iterations: 2000,
            initial_step: 1.0,
            tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalResult {
    pub gammas: Vec<f64>,
    pub gamma: f64,
    /// `Γ` of the constant starting profile `L/√n`.
    pub start_gamma: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    /// True when the iteration cap was hit before the tolerance.
    pub stagnated: bool,
}

/// `ln Γ` and its gradient: `∂ᵢ ln Γ = 1/S + 1 − Σ_{j≥i} softmax(P)ⱼ`.
fn log_gamma_and_grad(g: &[f64]) -> (f64, Vec<f64>) {
    let mut p = Vec::with_capacity(g.len());
    let mut s = 0.0;
    for x in g {
        s += x;
        p.push(s);
    }
    let mut lse = LogSumExp::new();
    for &x in &p {
        lse.add(x);
    }
    let z = lse.value();
    let mut grad = vec![0.0; g.len()];
    let mut tail = 0.0;
    for i in (0..g.len()).rev() {
        tail += (p[i] - z).exp();
        grad[i] = 1.0 / s + 1.0 - tail;
    }
    (s.ln() + s - z, grad)
}

/// Clips to `γ ≥ 0` and rescales onto the sphere of radius `l`.
fn project(g: &mut [f64], l: f64) -> bool {
    for x in g.iter_mut() {
        *x = x.max(0.0);
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    for x in g.iter_mut() {
        *x *= l / norm;
    }
    true
}

pub fn extremal_search(l: f64, n: usize, schedule: SearchSchedule) -> Result<ExtremalResult> {
    if n == 0 || n > MAX_SEARCH_LEN {
        return Err(Error::InvalidParameter(format!(
            "search length must be in 1..={MAX_SEARCH_LEN}, got {n}"
        )));
    }
    if !(l > 0.0 && l < 1.0) {
        return Err(Error::InvalidParameter(format!("L must lie in (0, 1), got {l}")));
    }
    let mut g = vec![l / (n as f64).sqrt(); n];
    let start_gamma = gamma_psi(&g)?.gamma;
    let (mut value, mut grad) = log_gamma_and_grad(&g);
    let mut step = schedule.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < schedule.iterations && !converged {
        iterations += 1;
        // tangent component of the gradient on the sphere
        let radial = grad.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / (l * l);
        let mut gain = None;
        while step > 1e-12 && gain.is_none() {
            let mut trial: Vec<f64> = g
                .iter()
                .zip(&grad)
                .map(|(x, d)| x + step * (d - radial * x))
                .collect();
            if project(&mut trial, l) {
                let (v, dv) = log_gamma_and_grad(&trial);
                if v.is_finite() && v > value {
                    gain = Some(v - value);
                    g = trial;
                    value = v;
                    grad = dv;
                    step *= 1.5;
                    continue;
                }
            }
            step *= 0.5;
        }
        converged = gain.map_or(true, |d| d < schedule.tolerance);
    }
    let gamma = gamma_psi(&g)?.gamma;
    Ok(ExtremalResult {
        upper_bound: gamma_upper_bound(&g),
        gammas: g,
        gamma,
        start_gamma,
        iterations,
        stagnated: !converged,
    })
}
