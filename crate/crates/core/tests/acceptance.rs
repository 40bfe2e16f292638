//! Acceptance run: one `PASS`/`FAIL` line per criterion. The three-stage
//! construction is slow and only runs with `OPUC_SLOW=1`.

use std::time::{Duration, Instant};

use opuc_core::calibration::{Calibration, Thresholds};
use opuc_core::checks::{
    fixture_checks, gamma_psi_checks, half_value, log_minus, normalization, oracle_equivalence, parse_fixtures,
    szego_identity, upper_bounds, Check, DEFAULT_FIXTURES,
};
use opuc_core::construction::driver::{run, ConstructionState, DriverConfig};
use opuc_core::construction::extremal::{extremal_search, SearchSchedule};
use opuc_core::construction::lemma::{lemma_gammas, raw_breakpoints, sum_sq_upper_constant};
use opuc_core::construction::realline::real_line_map;
use opuc_core::construction::transform::{step_entropy, transform_step, TransformConfig};
use opuc_core::entropy::{entropy_integral_on, EntropyReport};
use opuc_core::measures::{perturbed_schur, szego_integral};
use opuc_core::{CircleGrid, MeasureSpec, Result, SchurSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20261016;
const DOUBLING_TOLERANCE: f64 = 1e-6;
/// Absolute rounding level of quadrature moments, allowed on top of `2κ`.
const MOMENT_ROUNDOFF: f64 = 1e-12;
/// Scale used for an integrand that vanishes identically, such as `zⁿ`
/// against Lebesgue measure.
const VANISHING_SCALE: f64 = 1e-10;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Runs one criterion, folding errors and the runtime budget into the verdict.
fn criterion(label: &str, budget: Option<Duration>, body: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            detail.push_str(&format!("; over the {}s budget", b.as_secs()));
        }
    }
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("{verdict} criterion {label}: {detail} ({:.1}s)", elapsed.as_secs_f64());
    passed
}

fn summarize(checks: &[Check]) -> Outcome {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    // for a passing check the smaller of measured/threshold and its inverse
    // is at most one, and approaches one as the check tightens
    let tightest = checks
        .iter()
        .filter(|c| c.passed && c.threshold > 0.0 && c.measured > 0.0)
        .map(|c| (c.measured / c.threshold).min(c.threshold / c.measured))
        .fold(0.0, f64::max);
    let mut detail = format!("{} checks, {} failed, tightest ratio {tightest:.3e}", checks.len(), failed.len());
    if let Some(c) = failed.first() {
        detail.push_str(&format!("; first failure {} [{}] {:.6e} vs {:.6e}", c.name, c.subject, c.measured, c.threshold));
    }
    outcome(failed.is_empty(), detail)
}

fn random_schur(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> SchurSequence {
    SchurSequence::new((0..len).map(|_| rng.gen_range(-bound..bound)).collect()).expect("entries below 1")
}

fn fixtures() -> Vec<opuc_core::checks::Fixture> {
    parse_fixtures(DEFAULT_FIXTURES).expect("built-in fixtures parse")
}

/// The measure and parameters of a fixture, with the atom applied.
fn fixture_measure(fx: &opuc_core::checks::Fixture) -> Result<(MeasureSpec, SchurSequence)> {
    let mu1 = SchurSequence::new(fx.gammas.clone())?;
    let n = mu1.len();
    if fx.kappa > 0.0 {
        Ok((MeasureSpec::bernstein_szego(mu1.clone()).add_atom(fx.kappa)?, perturbed_schur(&mu1, fx.kappa, n)?))
    } else {
        Ok((MeasureSpec::bernstein_szego(mu1.clone()), mu1))
    }
}

fn oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checks = Vec::new();
    for i in 0..50 {
        let n = rng.gen_range(1..=12);
        let s = random_schur(&mut rng, n, 0.9);
        let m = MeasureSpec::bernstein_szego(s.clone());
        checks.push(oracle_equivalence(&format!("random {i}"), &m, &s, n)?);
    }
    Ok(summarize(&checks))
}

fn normalizations() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut checks = Vec::new();
    for (i, &n) in [20usize, 50, 100, 150, 200].iter().enumerate() {
        let mu1 = random_schur(&mut rng, n, 0.6);
        let grid = CircleGrid::for_degree(n);
        let bs = MeasureSpec::bernstein_szego(mu1.clone());
        checks.push(normalization(&format!("random {i} n={n}"), &bs, &mu1, n, grid)?);
        for kappa in [0.05, 0.5] {
            let measure = bs.add_atom(kappa)?;
            let schur = perturbed_schur(&mu1, kappa, n)?;
            checks.push(normalization(&format!("random {i} n={n} atom {kappa}"), &measure, &schur, n, grid)?);
        }
    }
    for fx in fixtures() {
        let (measure, schur) = fixture_measure(&fx)?;
        let n = schur.len();
        checks.push(normalization(&fx.name, &measure, &schur, n, CircleGrid::for_degree(n))?);
    }
    Ok(summarize(&checks))
}

fn szego() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut checks = Vec::new();
    for i in 0..20 {
        let n = rng.gen_range(1..=200);
        let s = random_schur(&mut rng, n, 0.49);
        let m = MeasureSpec::bernstein_szego(s);
        checks.push(szego_identity(&format!("random {i} n={n}"), &m, CircleGrid::for_degree(n))?);
    }
    Ok(summarize(&checks))
}

fn half_values() -> Result<Outcome> {
    let lemma = lemma_gammas(&raw_breakpoints(0.25, 10.0, 4)?)?;
    let mut checks = Vec::new();
    for n in [10, 100, 1000, 2000] {
        checks.push(half_value(&format!("N={n}"), &lemma.prefix(n + 1)?, n)?);
    }
    Ok(summarize(&checks))
}

fn sandwich(t: &Thresholds) -> Result<Outcome> {
    Ok(summarize(&gamma_psi_checks(0.25, 10.0, 4, t)?))
}

fn single_step(t: &Thresholds, step_reports: &mut Vec<(EntropyReport, SchurSequence)>) -> Result<Outcome> {
    let l = 0.25;
    let out = transform_step(&SchurSequence::zeros(3), 1, &TransformConfig::new(l, 0.1))?;
    let sum_sq: f64 = out.new_block().iter().map(|g| g * g).sum();
    let report = step_entropy(&out)?;
    let log_rate = report.log_entropy().unwrap_or(f64::NEG_INFINITY) - 0.5 * (out.n as f64).ln();
    let log_floor = (t.entropy * l.powi(4)).ln();
    let checks = [
        out.n >= 2 * out.n_prime,
        sum_sq <= 0.0625 * sum_sq_upper_constant(),
        out.log_kappa < 0.1f64.ln(),
        log_rate >= log_floor,
        out.n <= 100_000,
    ];
    step_reports.push((report, perturbed_schur(&out.mu1, out.kappa(), out.n)?));
    Ok(outcome(
        checks.iter().all(|&c| c),
        format!(
            "N'={} N={} sum γ'²={sum_sq:.4e} (cap {:.4e}) ln κ={:.4} ln(ε̂/√N)={log_rate:.4} (floor {log_floor:.4})",
            out.n_prime,
            out.n,
            0.0625 * sum_sq_upper_constant(),
            out.log_kappa
        ),
    ))
}

fn driver_checks(state: &ConstructionState) -> Outcome {
    let margin = state.persistence_margin();
    let (bound, budget) = (state.l2_bound(), 2.0 * state.l2_budget());
    let excess = state.moment_cauchy_excess();
    outcome(
        margin > 0.0 && bound <= budget && excess <= MOMENT_ROUNDOFF,
        format!(
            "K={} checkpoints {:?} persistence margin {margin:.4e}, ℓ² {bound:.4e} ≤ {budget:.4e}, Cauchy excess {excess:.3e}",
            state.stage(),
            state.checkpoints()
        ),
    )
}

fn three_stage(relative: bool) -> Result<Outcome> {
    let mut cfg = DriverConfig::new(vec![0.25, 0.25, 0.25], vec![0.1, 0.05, 0.025]);
    cfg.trig_relative = relative;
    Ok(driver_checks(&run(&cfg)?))
}

fn log_minus_all(state: &ConstructionState) -> Result<Outcome> {
    let mut checks: Vec<Check> = state
        .checkpoint_entropies(state.grid(), false)?
        .iter()
        .map(|r| log_minus(&format!("K=2 n={}", r.degree), r))
        .collect();
    for fx in fixtures() {
        checks.extend(fixture_checks(&fx, 32).into_iter().filter(|c| c.name == "log_minus"));
    }
    Ok(summarize(&checks))
}

fn upper_bounds_all(state: &ConstructionState, step_reports: &[(EntropyReport, SchurSequence)]) -> Result<Outcome> {
    let schur = state.schur(state.checkpoints().into_iter().max().unwrap_or(0))?;
    let mut checks = Vec::new();
    for r in state.checkpoint_entropies(state.grid(), true)? {
        checks.extend(upper_bounds(&format!("K=2 n={}", r.degree), &r, &schur));
    }
    for (r, s) in step_reports {
        checks.extend(upper_bounds(&format!("single step n={}", r.degree), r, s));
    }
    for fx in fixtures() {
        checks.extend(
            fixture_checks(&fx, 32)
                .into_iter()
                .filter(|c| c.name == "upper_bound" || c.name == "growth_rate"),
        );
    }
    Ok(summarize(&checks))
}

fn real_line(state: &ConstructionState) -> Result<Outcome> {
    let mut reports = state.real_line()?;
    for m in [10, 100, 1000] {
        reports.push(real_line_map(&SchurSequence::zeros(m), m, None)?);
    }
    let worst = reports.iter().map(|r| r.log_ratio.abs()).fold(0.0, f64::max);
    Ok(outcome(
        reports.iter().all(|r| r.ratio_in_range()),
        format!("{} degrees, largest |ln ratio| {worst:.4} (limit ln 4)", reports.len()),
    ))
}

fn extremal() -> Result<Outcome> {
    let l = 0.25;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [10, 100, 1000] {
        let r = extremal_search(l, n, SearchSchedule::default())?;
        let cap = l * (n as f64).sqrt();
        ok &= r.gamma >= r.start_gamma && r.gamma <= cap;
        parts.push(format!("n={n}: {:.4e} ≥ {:.4e}, ≤ {cap:.4e}", r.gamma, r.start_gamma));
    }
    Ok(outcome(ok, parts.join("; ")))
}

/// Change between two evaluations of one integral relative to the mass of its
/// integrand, `∫|g|`, which stays meaningful when the integral itself cancels
/// to zero.
fn relative_change(a: &EntropyReport, b: &EntropyReport) -> f64 {
    let scale = (a.entropy_plus + a.entropy_minus.abs())
        .max(a.entropy.abs())
        .max(VANISHING_SCALE);
    (a.entropy - b.entropy).abs() / scale
}

fn stability(state: &ConstructionState, config: &DriverConfig) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let grid = state.grid();
    for orthonormal in [false, true] {
        let base = state.checkpoint_entropies(grid, orthonormal)?;
        let fine = state.checkpoint_entropies(grid.doubled(), orthonormal)?;
        for (a, b) in base.iter().zip(&fine) {
            worst = worst.max(relative_change(a, b));
        }
    }
    for fx in fixtures() {
        let (measure, schur) = fixture_measure(&fx)?;
        let n = schur.len();
        let grid = CircleGrid::with_oversampling(n, 32);
        for monic in [false, true] {
            let a = entropy_integral_on(&measure, &schur, n, monic, grid)?;
            let b = entropy_integral_on(&measure, &schur, n, monic, grid.doubled())?;
            worst = worst.max(relative_change(&a, &b));
        }
        if fx.kappa == 0.0 {
            let a = szego_integral(&measure, grid)?.quadrature.value;
            let b = szego_integral(&measure, grid.doubled())?.quadrature.value;
            worst = worst.max((a - b).abs() / a.abs().max(VANISHING_SCALE));
        }
    }
    let again = run(config)?;
    let same_run = state.growth_csv() == again.growth_csv() && state.entropy_csv() == again.entropy_csv();
    let csv = |cs: Vec<Check>| cs.iter().map(Check::to_csv_row).collect::<Vec<_>>().join("\n");
    let fx = fixtures();
    let first = csv(fx.iter().flat_map(|f| fixture_checks(f, 32)).collect());
    let second = csv(fx.iter().flat_map(|f| fixture_checks(f, 32)).collect());
    Ok(outcome(
        worst < DOUBLING_TOLERANCE && same_run && first == second,
        format!(
            "largest relative change under grid doubling {worst:.3e}; repeated construction identical: {same_run}; repeated fixture checks identical: {}",
            first == second
        ),
    ))
}

fn main() {
    let thresholds = match Calibration::committed() {
        Ok(c) => c.thresholds(),
        Err(e) => {
            println!("FAIL calibration fixture: {e}");
            std::process::exit(1);
        }
    };
    let secs = Duration::from_secs;
    let mut all = true;
    all &= criterion("1 oracle equivalence", Some(secs(10)), oracle);
    all &= criterion("2 normalization", Some(secs(30)), normalizations);
    all &= criterion("3 Szegő identity", None, szego);
    all &= criterion("4 half value", None, half_values);
    all &= criterion("5 Γ/Ψ sandwich", Some(secs(60)), || sandwich(&thresholds));
    let mut step_reports = Vec::new();
    all &= criterion("6 single step", Some(secs(120)), || single_step(&thresholds, &mut step_reports));

    let config = DriverConfig::new(vec![0.25, 0.25], vec![0.1, 0.05]);
    let mut state = None;
    all &= criterion("7 driver K=2", Some(secs(600)), || {
        let s = run(&config)?;
        let o = driver_checks(&s);
        state = Some(s);
        Ok(o)
    });
    if std::env::var_os("OPUC_SLOW").is_some() {
        all &= criterion("7 driver K=3 (absolute trig tolerance)", Some(secs(600)), || three_stage(false));
        criterion("7 driver K=3 (trig tolerance relative to peak, informational)", Some(secs(600)), || {
            three_stage(true)
        });
    }
    match &state {
        Some(s) => {
            all &= criterion("8 log⁻ bound", None, || log_minus_all(s));
            all &= criterion("9 upper bound", None, || upper_bounds_all(s, &step_reports));
            all &= criterion("10 real-line transfer", None, || real_line(s));
            all &= criterion("11 extremal search", None, extremal);
            all &= criterion("12 quadrature stability", None, || stability(s, &config));
        }
        None => {
            for label in ["8 log⁻ bound", "9 upper bound", "10 real-line transfer", "12 quadrature stability"] {
                println!("FAIL criterion {label}: no K=2 construction to evaluate");
            }
            criterion("11 extremal search", None, extremal);
            all = false;
        }
    }
    if !all {
        std::process::exit(1);
    }
}
