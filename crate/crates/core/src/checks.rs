//! Named invariant checks shared by the verification command and the
//! acceptance suite. A check records the measured quantity next to the
//! threshold it was held to.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::calibration::Thresholds;
use crate::construction::lemma::{gamma_psi_of_block, gamma_upper_bound, lemma_gammas, raw_breakpoints};
use crate::entropy::{entropy_integral_on, entropy_upper_bound, gauge_integral_on, EntropyReport, GaugeFunction};
use crate::error::{Error, Result};
use crate::grid::CircleGrid;
use crate::measures::{kappa_choice, moments_from_measure, perturbed_schur, szego_integral, MeasureSpec};
use crate::opuc::{log_abs_at, monic_coefficients};
use crate::oracle::gram_schmidt_oracle;
use crate::schur::SchurSequence;

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-7;
pub const SZEGO_TOLERANCE: f64 = 1e-7;
pub const HALF_VALUE_TOLERANCE: f64 = 1e-9;
pub const GAMMA_FORMS_TOLERANCE: f64 = 1e-9;
/// Slack in `ε̂ₙ/√n ≤ ‖γ‖₂`.
pub const GROWTH_SLACK: f64 = 1e-3;

/// The fixtures run by default.
pub const DEFAULT_FIXTURES: &str = include_str!("../fixtures/verify.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub subject: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub const CSV_HEADER: &'static str = "check,subject,measured,threshold,passed";

    pub fn at_most(name: &'static str, subject: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            subject: subject.into(),
            measured,
            threshold,
            passed: measured <= threshold,
        }
    }

    pub fn at_least(name: &'static str, subject: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            subject: subject.into(),
            measured,
            threshold,
            passed: measured >= threshold,
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: &'static str, subject: impl Into<String>, error: &Error) -> Self {
        Self {
            name,
            subject: format!("{}: {error}", subject.into()),
            measured: f64::NAN,
            threshold: f64::NAN,
            passed: false,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{}",
            self.name,
            self.subject.replace(',', ";"),
            self.measured,
            self.threshold,
            self.passed
        )
    }
}

/// Recurrence coefficients of `Φₙ` against the Gram-system oracle for the
/// measure `σ` with parameters `schur`.
pub fn oracle_equivalence(subject: &str, measure: &MeasureSpec, schur: &SchurSequence, n: usize) -> Result<Check> {
    let grid = CircleGrid::for_degree(n.max(measure.degree()));
    let moments = moments_from_measure(measure, n, grid)?;
    let oracle = gram_schmidt_oracle(&moments, n)?;
    let coeffs = monic_coefficients(schur, n)?;
    let err = coeffs
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (Complex64::new(*a, 0.0) - b).norm())
        .fold(0.0, f64::max);
    Ok(Check::at_most("oracle_equivalence", subject, err, ORACLE_TOLERANCE))
}

/// `|∫|φₙ|² dσ − 1|`.
pub fn normalization(
    subject: &str,
    measure: &MeasureSpec,
    schur: &SchurSequence,
    n: usize,
    grid: CircleGrid,
) -> Result<Check> {
    let r = gauge_integral_on(measure, schur, n, &GaugeFunction::Linear, grid)?;
    Ok(Check::at_most("normalization", subject, (r.value - 1.0).abs(), NORMALIZATION_TOLERANCE))
}

/// Quadrature of `∫ ln σ′ dm` against `Σ ln(1 − γ²)`.
pub fn szego_identity(subject: &str, measure: &MeasureSpec, grid: CircleGrid) -> Result<Check> {
    let s = szego_integral(measure, grid)?;
    Ok(Check::at_most(
        "szego_identity",
        subject,
        (s.quadrature.value - s.analytic).abs(),
        SZEGO_TOLERANCE,
    ))
}

/// `Φ_N(σ)(1) = Φ_N(μ₁)(1)/2` for `κ = 1/K_{N−1}(1,1)`, with the left side
/// taken from the perturbed parameters.
pub fn half_value(subject: &str, mu1: &SchurSequence, n: usize) -> Result<Check> {
    let kappa = kappa_choice(mu1, n)?.ln.exp();
    let sigma = perturbed_schur(mu1, kappa, n)?;
    let one = Complex64::new(1.0, 0.0);
    let lhs = log_abs_at(sigma.as_slice(), one);
    let rhs = log_abs_at(&mu1.as_slice()[..n], one) - LN_2;
    Ok(Check::at_most(
        "half_value",
        subject,
        (lhs - rhs).abs() / rhs.abs().max(1.0),
        HALF_VALUE_TOLERANCE,
    ))
}

/// `entropy_minus < 1` for an orthonormal report.
pub fn log_minus(subject: &str, report: &EntropyReport) -> Check {
    let mut c = Check::at_most("log_minus", subject, report.entropy_minus, 1.0);
    c.passed = report.entropy_minus < 1.0;
    c
}

/// `ε̂ₙ ≤ Σ|γₖ| + quadrature error` and `ε̂ₙ/√n ≤ ‖γ‖₂ + slack` for a monic
/// report built from `schur`.
pub fn upper_bounds(subject: &str, report: &EntropyReport, schur: &SchurSequence) -> [Check; 2] {
    let n = report.degree;
    let linear = Check::at_most(
        "upper_bound",
        subject,
        report.entropy,
        entropy_upper_bound(schur, n) + report.quadrature_error,
    );
    let l2 = schur.iter().take(n).map(|g| g * g).sum::<f64>().sqrt();
    let rate = if n == 0 { 0.0 } else { report.entropy / (n as f64).sqrt() };
    [linear, Check::at_most("growth_rate", subject, rate, l2 + GROWTH_SLACK)]
}

/// `Γ`/`Ψ` form agreement and the calibrated sandwich on the lemma sequence
/// for `k = 1..=k_max`.
pub fn gamma_psi_checks(l: f64, c: f64, k_max: usize, t: &Thresholds) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for k in 1..=k_max {
        let spec = raw_breakpoints(l, c, k)?;
        let g = lemma_gammas(&spec)?;
        let n = spec.len();
        let r = gamma_psi_of_block(&g)?;
        let subject = format!("L={l} C={c} k={k} N={n}");
        let root_n = (n as f64).sqrt();
        out.push(Check::at_most(
            "gamma_forms",
            subject.clone(),
            r.relative_disagreement(),
            GAMMA_FORMS_TOLERANCE,
        ));
        out.push(Check::at_least("gamma_lower", subject.clone(), r.gamma, t.gamma * l.powi(4) * root_n));
        out.push(Check::at_least("psi_lower", subject.clone(), r.psi, t.psi * l.powi(3)));
        out.push(Check::at_most("gamma_upper", subject.clone(), r.gamma, gamma_upper_bound(g.as_slice())));
        out.push(Check::at_most("denominator", subject, r.denominator, t.denominator / l.powi(3)));
    }
    Ok(out)
}

/// One verification fixture: raw parameters, unvalidated, and an optional
/// atom at `z = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub kappa: f64,
    pub gammas: Vec<f64>,
}

/// Lines `fixture <name> <kappa> <γ₀> <γ₁> …`; `#` starts a comment.
pub fn parse_fixtures(text: &str) -> Result<Vec<Fixture>> {
    let mut out = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let bad = || Error::Parse(format!("bad fixture line: {line}"));
        if fields.next() != Some("fixture") {
            return Err(bad());
        }
        let name = fields.next().ok_or_else(bad)?.to_string();
        let kappa: f64 = fields.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let gammas = fields
            .map(|v| v.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        out.push(Fixture { name, kappa, gammas });
    }
    if out.is_empty() {
        return Err(Error::Parse("no fixtures".into()));
    }
    Ok(out)
}

/// Every applicable check for one fixture on a grid with the given
/// oversampling factor.
pub fn fixture_checks(fx: &Fixture, grid_factor: usize) -> Vec<Check> {
    let name = fx.name.as_str();
    let mu1 = match SchurSequence::new(fx.gammas.clone()) {
        Ok(s) => s,
        Err(_) => {
            let worst = fx.gammas.iter().map(|g| g.abs()).fold(0.0, f64::max);
            let mut c = Check::at_most("schur_validity", name, worst, 1.0);
            c.passed = false;
            return vec![c];
        }
    };
    let n = mu1.len();
    let measure = if fx.kappa > 0.0 {
        MeasureSpec::bernstein_szego(mu1.clone()).add_atom(fx.kappa)
    } else {
        Ok(MeasureSpec::bernstein_szego(mu1.clone()))
    };
    let schur = if fx.kappa > 0.0 {
        perturbed_schur(&mu1, fx.kappa, n)
    } else {
        Ok(mu1.clone())
    };
    let (measure, schur) = match (measure, schur) {
        (Ok(m), Ok(s)) => (m, s),
        (Err(e), _) | (_, Err(e)) => return vec![Check::failed("fixture_setup", name, &e)],
    };
    let grid = CircleGrid::with_oversampling(n, grid_factor);
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<Check>| match r {
        Ok(c) => out.push(c),
        Err(e) => out.push(Check::failed(name, fx.name.as_str(), &e)),
    };
    if n <= 12 {
        push("oracle_equivalence", oracle_equivalence(name, &measure, &schur, n));
    }
    push("normalization", normalization(name, &measure, &schur, n, grid));
    if fx.kappa == 0.0 && mu1.max_abs() < 0.5 {
        push("szego_identity", szego_identity(name, &measure, grid));
    }
    match entropy_integral_on(&measure, &schur, n, false, grid) {
        Ok(r) => out.push(log_minus(name, &r)),
        Err(e) => out.push(Check::failed("log_minus", name, &e)),
    }
    match entropy_integral_on(&measure, &schur, n, true, grid) {
        Ok(r) => out.extend(upper_bounds(name, &r, &schur)),
        Err(e) => out.push(Check::failed("upper_bound", name, &e)),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::Calibration;

    #[test]
    fn default_fixtures_pass() {
        for fx in parse_fixtures(DEFAULT_FIXTURES).unwrap() {
            for c in fixture_checks(&fx, 32) {
                assert!(c.passed, "{c:?}");
            }
        }
    }

    #[test]
    fn invalid_parameter_is_a_named_failure() {
        let fx = parse_fixtures("fixture bad 0 0.2 1.5").unwrap();
        let checks = fixture_checks(&fx[0], 32);
        assert_eq!(checks.len(), 1);
        assert_eq!(checks[0].name, "schur_validity");
        assert!(!checks[0].passed && checks[0].measured == 1.5);
    }

    #[test]
    fn oracle_and_half_value_on_small_cases() {
        let s = SchurSequence::new(vec![0.5, -0.3, 0.2]).unwrap();
        let m = MeasureSpec::bernstein_szego(s.clone());
        assert!(oracle_equivalence("t", &m, &s, 3).unwrap().passed);
        assert!(half_value("t", &s, 3).unwrap().passed);
    }

    #[test]
    fn sandwich_with_committed_thresholds() {
        let t = Calibration::committed().unwrap().thresholds();
        let checks = gamma_psi_checks(0.25, 10.0, 4, &t).unwrap();
        assert_eq!(checks.len(), 20);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn malformed_fixtures() {
        assert!(parse_fixtures("").is_err());
        assert!(parse_fixtures("fixture x").is_err());
        assert!(parse_fixtures("schur 0.1").is_err());
    }
}
