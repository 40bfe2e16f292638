//! Poles of a Bernstein–Szegő density that sit closer to the circle than the
//! grid can resolve, and the local quadrature used around them.
//!
//! A zero `a` of `φ_d` with `M(1 − |a|)` small gives `1/|φ_d|²` a spike of
//! width `1 − |a|` that grid nodes miss. Polynomials orthogonal for such a
//! measure have zeros right next to the spike, so integrands built from them
//! are just as unresolved there. Each cluster of such poles is covered by a
//! window with a smooth cutoff `χ`: one on a core around the poles, zero past
//! a transition band. The grid then integrates against `(1 − χ)σ′`, and
//! Gauss–Legendre panels graded toward every pole integrate against `χσ′`
//! with exact point values of the integrand.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use crate::grid::CircleGrid;
use crate::opuc::deflated_newton_zero;

/// Zeros with `M(1 − |a|)` at or above this are left to the grid rule.
pub const RESOLVED_DISTANCE: f64 = 30.0;

/// Minimal excess of a local maximum of `ln σ′` over the mean of its two
/// neighbours for it to seed a zero search.
const PEAK_EXCESS: f64 = 0.005;
const NEWTON_STEPS: usize = 100;
/// Zeros sought from one peak before moving on.
const MAX_ZEROS_PER_PEAK: usize = 8;

/// Core margin around the outermost poles, in node spacings.
const CORE_MARGIN: f64 = 32.0;
/// Width of the band where `χ` falls from one to zero, in node spacings.
const TRANSITION: f64 = 256.0;
/// Widest panel, in node spacings.
const MAX_PANEL: f64 = 4.0;
/// Narrowest graded panel relative to `1 − |a|`.
const GRADING_FLOOR: f64 = 0.05;
const GAUSS_ORDER: usize = 16;

/// Zeros `a` of `Φ_d` (parameters `gammas`) inside the disk with
/// `M(1 − |a|) < RESOLVED_DISTANCE`, found by Newton's method from the sharp
/// local maxima of `log_density`.
pub fn unresolved_zeros(gammas: &[f64], grid: CircleGrid, log_density: &[f64]) -> Vec<Complex64> {
    let m = log_density.len();
    let mut zeros: Vec<Complex64> = Vec::new();
    for j in 0..m {
        let prev = log_density[(j + m - 1) % m];
        let next = log_density[(j + 1) % m];
        let here = log_density[j];
        if !(here > prev && here > next && here - 0.5 * (prev + next) > PEAK_EXCESS) {
            continue;
        }
        let start = Complex64::from_polar(1.0, grid.theta(j));
        // close zeros share one peak, so keep deflating from the same seed
        for _ in 0..MAX_ZEROS_PER_PEAK {
            let Some(a) = deflated_newton_zero(gammas, start, &zeros, NEWTON_STEPS) else {
                break;
            };
            if !is_unresolved(a, m) || zeros.iter().any(|z| (z - a).norm() < 1e-12) {
                break;
            }
            zeros.push(a);
            let conj = a.conj();
            if (conj - a).norm() >= 1e-12 && zeros.iter().all(|z| (z - conj).norm() >= 1e-12) {
                if let Some(b) = deflated_newton_zero(gammas, conj, &[], NEWTON_STEPS) {
                    if is_unresolved(b, m) && zeros.iter().all(|z| (z - b).norm() >= 1e-12) {
                        zeros.push(b);
                    }
                }
            }
        }
    }
    zeros
}

fn is_unresolved(a: Complex64, grid_size: usize) -> bool {
    let r = a.norm();
    r < 1.0 && grid_size as f64 * (1.0 - r) < RESOLVED_DISTANCE
}

/// A window around a cluster of poles, in angles that increase through the
/// window (so `start` may lie below `−π`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub core_start: f64,
    pub core_end: f64,
    pub end: f64,
}

impl Window {
    /// `χ(θ)` for any angle.
    pub fn cutoff(&self, theta: f64) -> f64 {
        let t = self.start + (theta - self.start).rem_euclid(TAU);
        if t >= self.end {
            0.0
        } else if t < self.core_start {
            smooth_step((t - self.start) / (self.core_start - self.start))
        } else if t <= self.core_end {
            1.0
        } else {
            smooth_step((self.end - t) / (self.end - self.core_end))
        }
    }
}

/// `C^∞` step from 0 at `x ≤ 0` to 1 at `x ≥ 1`.
fn smooth_step(x: f64) -> f64 {
    let g = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let (a, b) = (g(x), g(1.0 - x));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Nodes and weights of the `χ`-weighted local rule: `Σ wᵢ g(θᵢ)` approximates
/// `∫ χ g dθ/2π`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalRule {
    pub windows: Vec<Window>,
    pub thetas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LocalRule {
    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    /// `Σ χ` over all windows.
    pub fn cutoff(&self, theta: f64) -> f64 {
        self.windows.iter().map(|w| w.cutoff(theta)).sum()
    }

    /// Windows around `poles` on `grid` and their graded panels. Poles spread
    /// too densely for separate windows share one window with `χ ≡ 1` on the
    /// whole circle.
    pub fn around(poles: &[Complex64], grid: CircleGrid) -> Self {
        if poles.is_empty() {
            return Self::default();
        }
        let h = TAU / grid.size() as f64;
        let reach = (CORE_MARGIN + TRANSITION) * h;
        let mut sites: Vec<(f64, f64)> = poles
            .iter()
            .map(|a| (a.arg(), (GRADING_FLOOR * (1.0 - a.norm())).max(1e-15)))
            .collect();
        sites.sort_by(|x, y| x.0.total_cmp(&y.0));
        sites.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-15);
        // start after the widest circular gap so that clusters never wrap
        let n = sites.len();
        let gap = |i: usize| {
            let next = if i + 1 < n { sites[i + 1].0 } else { sites[0].0 + TAU };
            next - sites[i].0
        };
        let widest = (0..n).max_by(|&i, &j| gap(i).total_cmp(&gap(j))).unwrap_or(0);
        let gauss = gauss_legendre();
        let max_w = MAX_PANEL * h;
        let mut rule = Self::default();
        if gap(widest) <= 2.0 * reach {
            let first = sites[0];
            let mut ring = sites.clone();
            ring.push((first.0 + TAU, first.1));
            let mut panels = Vec::new();
            for pair in ring.windows(2) {
                panels.extend(graded_panels(pair[0].0, pair[1].0, Some(pair[0].1), Some(pair[1].1), max_w));
            }
            let w = Window {
                start: first.0,
                core_start: first.0,
                core_end: first.0 + TAU,
                end: first.0 + TAU,
            };
            rule.push_panels(&w, &panels, gauss);
            rule.windows.push(w);
            return rule;
        }
        let unwrapped: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let i = widest + 1 + k;
                let (theta, floor) = sites[i % n];
                (if i >= n && widest + 1 < n { theta + TAU } else { theta }, floor)
            })
            .collect();
        let mut clusters: Vec<Vec<(f64, f64)>> = Vec::new();
        for site in unwrapped {
            match clusters.last_mut() {
                Some(c) if site.0 - c[c.len() - 1].0 <= 2.0 * reach => c.push(site),
                _ => clusters.push(vec![site]),
            }
        }
        for cluster in clusters {
            let first = cluster[0];
            let last = cluster[cluster.len() - 1];
            let w = Window {
                start: first.0 - reach,
                core_start: first.0 - CORE_MARGIN * h,
                core_end: last.0 + CORE_MARGIN * h,
                end: last.0 + reach,
            };
            let mut panels = uniform_panels(w.start, w.core_start, max_w);
            panels.extend(graded_panels(w.core_start, first.0, None, Some(first.1), max_w));
            for pair in cluster.windows(2) {
                panels.extend(graded_panels(pair[0].0, pair[1].0, Some(pair[0].1), Some(pair[1].1), max_w));
            }
            panels.extend(graded_panels(last.0, w.core_end, Some(last.1), None, max_w));
            panels.extend(uniform_panels(w.core_end, w.end, max_w));
            rule.push_panels(&w, &panels, gauss);
            rule.windows.push(w);
        }
        rule
    }

    fn push_panels(&mut self, w: &Window, panels: &[(f64, f64)], gauss: &[(f64, f64)]) {
        for (a, b) in panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, gw) in gauss {
                let t = mid + half * x;
                let chi = w.cutoff(t);
                if chi > 0.0 {
                    self.thetas.push(wrap(t));
                    self.weights.push(gw * half * chi / TAU);
                }
            }
        }
    }
}

/// Angle in `(−π, π]`.
fn wrap(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

fn uniform_panels(a: f64, b: f64, max_w: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let k = ((b - a) / max_w).ceil().max(1.0) as usize;
    let w = (b - a) / k as f64;
    (0..k)
        .map(|i| (a + i as f64 * w, if i + 1 == k { b } else { a + (i + 1) as f64 * w }))
        .collect()
}

/// Panels on `[a, b]` shrinking geometrically toward each graded end down to
/// the given floor, none wider than `max_w`.
fn graded_panels(a: f64, b: f64, floor_a: Option<f64>, floor_b: Option<f64>, max_w: f64) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    if floor_a.is_some() && floor_b.is_some() {
        let m = 0.5 * (a + b);
        let mut p = graded_panels(a, m, floor_a, None, max_w);
        p.extend(graded_panels(m, b, None, floor_b, max_w));
        return p;
    }
    let len = b - a;
    let Some(floor) = floor_a.or(floor_b) else {
        return uniform_panels(a, b, max_w);
    };
    // offsets from the graded end: 0, floor, 2·floor, 4·floor, …, len
    let mut offsets = vec![0.0];
    let mut w = floor;
    while w < len {
        offsets.push(w);
        w *= 2.0;
    }
    offsets.push(len);
    let mut out = Vec::new();
    for pair in offsets.windows(2) {
        let (lo, hi) = if floor_a.is_some() {
            (a + pair[0], a + pair[1])
        } else {
            (b - pair[1], b - pair[0])
        };
        out.extend(uniform_panels(lo, hi, max_w));
    }
    out
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` from the Jacobi matrix.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
            j[(k - 1, k)] = b;
            j[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut rule: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        rule.sort_by(|x, y| x.0.total_cmp(&y.0));
        rule
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_high_powers() {
        let g = gauss_legendre();
        assert!((g.iter().map(|(_, w)| w).sum::<f64>() - 2.0).abs() < 1e-14);
        let x30: f64 = g.iter().map(|(x, w)| w * x.powi(30)).sum();
        assert!((x30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_smooth_and_supported() {
        let w = Window {
            start: -1.0,
            core_start: -0.5,
            core_end: 0.5,
            end: 1.0,
        };
        assert_eq!(w.cutoff(0.0), 1.0);
        assert_eq!(w.cutoff(1.5), 0.0);
        assert_eq!(w.cutoff(-3.0), 0.0);
        assert!((w.cutoff(0.75) - 0.5).abs() < 1e-15);
        assert!((w.cutoff(-0.75) - 0.5).abs() < 1e-15);
        assert_eq!(w.cutoff(TAU), 1.0);
    }

    /// The split `(1 − χ)` on the grid plus `χ` on the panels integrates a
    /// Poisson kernel far narrower than the node spacing.
    #[test]
    fn split_rule_integrates_a_narrow_poisson_kernel() {
        let grid = CircleGrid::new(4096).unwrap();
        let a = Complex64::from_polar(1.0 - 1e-10, 3.0);
        let rule = LocalRule::around(&[a], grid);
        assert_eq!(rule.windows.len(), 1);
        let poisson = |t: f64| {
            let z = Complex64::from_polar(1.0, t);
            (1.0 - a.norm_sqr()) / (z - a).norm_sqr()
        };
        let g = |t: f64| 2.0 + t.cos();
        let m = grid.size();
        let on_grid: f64 = (0..m)
            .map(|j| {
                let t = grid.theta(j);
                poisson(t) * g(t) * (1.0 - rule.cutoff(t))
            })
            .sum::<f64>()
            / m as f64;
        let local: f64 = rule
            .thetas
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| w * poisson(*t) * g(*t))
            .sum();
        // harmonic extension of 2 + cos θ at a
        let exact = 2.0 + (1.0 - 1e-10) * 3f64.cos();
        // node angles carry absolute rounding of about 4e-16 against a width of 1e-10
        assert!((on_grid + local - exact).abs() < 3e-7, "{}", on_grid + local - exact);
    }

    #[test]
    fn clusters_across_the_seam_share_one_window() {
        let grid = CircleGrid::new(4096).unwrap();
        let poles = [
            Complex64::from_polar(1.0 - 1e-9, PI - 1e-3),
            Complex64::from_polar(1.0 - 1e-9, -PI + 1e-3),
        ];
        let rule = LocalRule::around(&poles, grid);
        assert_eq!(rule.windows.len(), 1);
        assert!((rule.cutoff(PI) - 1.0).abs() < 1e-15);
        let chi_mass: f64 = rule.weights.iter().sum();
        let on_grid: f64 =
            (0..grid.size()).map(|j| rule.cutoff(grid.theta(j))).sum::<f64>() / grid.size() as f64;
        assert!((chi_mass - on_grid).abs() < 1e-10, "{chi_mass} vs {on_grid}");
    }

    #[test]
    fn dense_poles_take_the_whole_circle() {
        let grid = CircleGrid::new(4096).unwrap();
        let poles: Vec<Complex64> = (0..12)
            .map(|k| Complex64::from_polar(1.0 - 1e-3, -3.0 + 0.5 * k as f64))
            .collect();
        let rule = LocalRule::around(&poles, grid);
        assert_eq!(rule.windows.len(), 1);
        assert!((0..grid.size()).all(|j| rule.cutoff(grid.theta(j)) == 1.0));
        let a = poles[5];
        let exact = 2.0 + a.re;
        let local: f64 = rule
            .thetas
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let z = Complex64::from_polar(1.0, *t);
                w * (1.0 - a.norm_sqr()) / (z - a).norm_sqr() * (2.0 + t.cos())
            })
            .sum();
        assert!((local - exact).abs() < 1e-12, "{}", local - exact);
    }
}
