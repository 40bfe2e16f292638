use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use opuc_core::calibration::Calibration;
use opuc_core::checks::{
    fixture_checks, gamma_psi_checks, half_value, oracle_equivalence, parse_fixtures, Check, DEFAULT_FIXTURES,
};
use opuc_core::construction::driver::{run_with_progress, ConstructionState, DriverConfig};
use opuc_core::construction::lemma::{
    gamma_psi_of_block, gamma_upper_bound, lemma_breakpoints_auto, lemma_gammas, raw_breakpoints,
};
use opuc_core::construction::realline::{real_line_map, RealLineReport};
use opuc_core::entropy::{entropy_integral_on, EntropyReport};
use opuc_core::measures::perturbed_schur;
use opuc_core::{CircleGrid, Error, MeasureSpec, SchurSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::{ConstructArgs, EntropyTableArgs, GlobalArgs, LemmaArgs, RealLineArgs, VerifyArgs};
use crate::error::{CliError, CliResult};

/// Stage parameters used when `--L`/`--delta` are not given.
const DEFAULT_LS: [f64; 4] = [0.25, 0.25, 0.25, 0.1];
const DEFAULT_DELTAS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
/// Degrees for the half-value check on the lemma sequence.
const HALF_VALUE_DEGREES: [usize; 4] = [10, 100, 1000, 2000];
const ORACLE_MAX_LEN: usize = 12;
const ORACLE_RANGE: f64 = 0.9;

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn lemma(g: &GlobalArgs, a: &LemmaArgs) -> CliResult<()> {
    let spec = if a.raw {
        raw_breakpoints(a.l, a.c, a.k_max)?
    } else {
        lemma_breakpoints_auto(a.l, a.c, a.k_max, a.c_growth)?
    };
    let t = Calibration::committed()?.thresholds();
    let mut breakpoints = String::from("k,N_k,C,gap_ratio\n");
    let mut table = String::from("k,N_k,gamma,psi,lower_bound,upper_bound,psi_lower_bound,satisfied\n");
    let mut violations = Vec::new();
    for k in 1..=spec.k_max() {
        let n = spec.breakpoints[k];
        let gap = (n - spec.breakpoints[k - 1]) as f64 / n as f64;
        let _ = writeln!(breakpoints, "{k},{n},{:.16e},{:.16e}", spec.c, gap);
        let g = lemma_gammas(&spec.truncated(k)?)?;
        let r = gamma_psi_of_block(&g)?;
        let lower = t.gamma * a.l.powi(4) * (n as f64).sqrt();
        let upper = gamma_upper_bound(g.as_slice());
        let psi_lower = t.psi * a.l.powi(3);
        let ok = r.gamma >= lower && r.gamma <= upper && r.psi >= psi_lower;
        if !ok {
            violations.push(k);
        }
        let _ = writeln!(
            table,
            "{k},{n},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{ok}",
            r.gamma, r.psi, lower, upper, psi_lower
        );
    }
    write_file(&g.out, "breakpoints.csv", &breakpoints)?;
    write_file(&g.out, "gamma_psi.csv", &table)?;
    print!("{table}");
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed {
            failed: violations.len(),
            total: spec.k_max(),
        })
    }
}

fn driver_config(g: &GlobalArgs, a: &ConstructArgs) -> CliResult<DriverConfig> {
    let k = a.stages;
    if k == 0 || k > DEFAULT_LS.len() {
        return Err(Error::InvalidParameter(format!("K must be in 1..={}, got {k}", DEFAULT_LS.len())).into());
    }
    let pick = |given: &[f64], default: &[f64], what: &str| -> CliResult<Vec<f64>> {
        match given.len() {
            0 => Ok(default[..k].to_vec()),
            n if n == k => Ok(given.to_vec()),
            n => Err(Error::InvalidParameter(format!("K = {k} stages but {n} values of {what}")).into()),
        }
    };
    let mut cfg = DriverConfig::new(pick(&a.l, &DEFAULT_LS, "L")?, pick(&a.delta, &DEFAULT_DELTAS, "delta")?);
    cfg.eps = a.eps;
    cfg.trig_relative = a.trig_relative;
    cfg.c = a.c;
    cfg.c_growth = a.c_growth;
    cfg.grid_factor = g.grid_factor;
    Ok(cfg)
}

fn write_state(dir: &Path, s: &ConstructionState) -> CliResult<()> {
    write_file(dir, "growth.csv", &s.growth_csv())?;
    write_file(dir, "entropy_matrix.csv", &s.entropy_csv())?;
    write_file(dir, "state.txt", &s.to_string())?;
    let mut dat = String::from("# M_k entropy_over_sqrtM\n");
    for (i, r) in s.records.iter().enumerate() {
        let _ = writeln!(dat, "{} {:.16e}", r.checkpoint, s.entropy[i][i] / (r.checkpoint as f64).sqrt());
    }
    write_file(dir, "growth.dat", &dat)
}

pub fn construct(g: &GlobalArgs, a: &ConstructArgs) -> CliResult<()> {
    let cfg = driver_config(g, a)?;
    let mut last: Option<ConstructionState> = None;
    let result = run_with_progress(&cfg, |s| {
        eprintln!(
            "stage {} done: M = {}, log kappa = {:.6}",
            s.stage(),
            s.checkpoints().last().copied().unwrap_or(0),
            s.log_kappa
        );
        last = Some(s.clone());
    });
    match result {
        Ok(s) => {
            write_state(&g.out, &s)?;
            let mut diag = String::new();
            let _ = writeln!(diag, "persistence_margin {:.16e}", s.persistence_margin());
            let _ = writeln!(diag, "moment_cauchy_excess {:.16e}", s.moment_cauchy_excess());
            let _ = writeln!(diag, "l2_bound {:.16e}", s.l2_bound());
            let _ = writeln!(diag, "l2_budget {:.16e}", s.l2_budget());
            write_file(&g.out, "diagnostics.txt", &diag)?;
            print!("{}", s.growth_csv());
            Ok(())
        }
        Err(e) => {
            if let Some(s) = &last {
                write_state(&g.out, s)?;
            }
            write_file(&g.out, "diagnostics.txt", &format!("failed: {e}\n"))?;
            Err(e.into())
        }
    }
}

/// Random parameter sequences for the oracle sweep.
fn random_sequences(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=ORACLE_MAX_LEN);
            (0..len).map(|_| rng.gen_range(-ORACLE_RANGE..ORACLE_RANGE)).collect()
        })
        .collect()
}

pub fn verify(g: &GlobalArgs, a: &VerifyArgs) -> CliResult<()> {
    let text = match &a.fixtures {
        Some(p) => read_file(p)?,
        None => DEFAULT_FIXTURES.to_string(),
    };
    let fixtures = parse_fixtures(&text)?;
    let mut checks: Vec<Check> = Vec::new();
    for fx in &fixtures {
        checks.extend(fixture_checks(fx, g.grid_factor));
    }
    for (i, gammas) in random_sequences(g.seed, a.random).into_iter().enumerate() {
        let subject = format!("random oracle {i}");
        let s = SchurSequence::new(gammas)?;
        let n = s.len();
        let m = MeasureSpec::bernstein_szego(s.clone());
        checks.push(
            oracle_equivalence(&subject, &m, &s, n).unwrap_or_else(|e| Check::failed("oracle_equivalence", subject, &e)),
        );
    }
    let t = Calibration::committed()?.thresholds();
    checks.extend(gamma_psi_checks(0.25, 10.0, 4, &t)?);
    let lemma = lemma_gammas(&raw_breakpoints(0.25, 10.0, 4)?)?;
    for n in HALF_VALUE_DEGREES {
        let subject = format!("lemma sequence N={n}");
        let mu1 = lemma.prefix(n + 1)?;
        checks.push(half_value(&subject, &mu1, n).unwrap_or_else(|e| Check::failed("half_value", subject, &e)));
    }
    let mut csv = String::from(Check::CSV_HEADER);
    csv.push('\n');
    for c in &checks {
        csv.push_str(&c.to_csv_row());
        csv.push('\n');
    }
    write_file(&g.out, "verify.csv", &csv)?;
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        eprintln!(
            "FAIL {} [{}]: measured {:e}, threshold {:e}",
            c.name, c.subject, c.measured, c.threshold
        );
    }
    println!("{} checks, {} failed", checks.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed {
            failed: failed.len(),
            total: checks.len(),
        })
    }
}

fn load_state(path: &Path) -> CliResult<ConstructionState> {
    Ok(read_file(path)?.parse()?)
}

fn odd_checkpoint(ms: &[usize]) -> CliResult<()> {
    match ms.iter().find(|m| *m % 2 == 1) {
        Some(m) => Err(Error::InvalidParameter(format!("checkpoint {m} is odd; the interval map needs M even")).into()),
        None => Ok(()),
    }
}

pub fn realline(g: &GlobalArgs, a: &RealLineArgs) -> CliResult<()> {
    let reports: Vec<RealLineReport> = match &a.state {
        Some(p) => {
            let s = load_state(p)?;
            odd_checkpoint(&s.checkpoints())?;
            s.real_line()?
        }
        None => {
            odd_checkpoint(&a.chebyshev)?;
            a.chebyshev
                .iter()
                .map(|&m| real_line_map(&SchurSequence::zeros(m), m, None))
                .collect::<opuc_core::Result<_>>()?
        }
    };
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
    let mut csv = String::from(
        "M,log_phi_at_one,log_p_at_one,log_p_closed_form,log_ratio,ratio_in_range,circle_atom_log,line_atom_log\n",
    );
    for r in &reports {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.degree,
            r.log_phi_at_one,
            r.log_p_at_one,
            r.log_p_closed_form,
            r.log_ratio,
            r.ratio_in_range(),
            opt(r.circle_atom_log),
            opt(r.line_atom_log)
        );
    }
    write_file(&g.out, "realline.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

/// The measure, its parameters and the degrees to tabulate.
fn table_input(a: &EntropyTableArgs) -> CliResult<(MeasureSpec, Box<dyn Fn(usize) -> opuc_core::Result<SchurSequence>>, Vec<usize>)> {
    if let Some(p) = &a.state {
        let s = load_state(p)?;
        let degrees = if a.n.is_empty() { s.checkpoints() } else { a.n.clone() };
        let measure = s.measure()?;
        return Ok((measure, Box::new(move |n| s.schur(n)), degrees));
    }
    let p = a.measure.as_ref().expect("clap requires --state or --measure");
    let measure: MeasureSpec = read_file(p)?.parse()?;
    if a.n.is_empty() {
        return Err(CliError::Usage("--n is required with --measure".into()));
    }
    let prefix = measure.schur_prefix().clone();
    let atoms = measure.atoms();
    let schur: Box<dyn Fn(usize) -> opuc_core::Result<SchurSequence>> = match atoms {
        [] => Box::new(move |n| {
            let mut g = prefix.clone().into_vec();
            g.resize(n.max(g.len()), 0.0);
            SchurSequence::new(g)
        }),
        [atom] if atom.theta == 0.0 && (measure.normalization() - 1.0 - atom.mass).abs() <= 1e-15 * measure.normalization() => {
            let kappa = atom.mass;
            Box::new(move |n| perturbed_schur(&prefix, kappa, n))
        }
        _ => {
            return Err(Error::InvalidParameter(
                "only Bernstein–Szegő measures with at most one atom at z = 1 of mass κ and normalization 1 + κ are supported".into(),
            )
            .into())
        }
    };
    Ok((measure, schur, a.n.clone()))
}

pub fn entropy_table(g: &GlobalArgs, a: &EntropyTableArgs) -> CliResult<()> {
    let (measure, schur_for, degrees) = table_input(a)?;
    let top = degrees.iter().copied().max().unwrap_or(0);
    let schur = schur_for(top)?;
    let grid = CircleGrid::with_oversampling(top.max(measure.degree()), g.grid_factor);
    let mut csv = String::from(EntropyReport::CSV_HEADER);
    csv.push('\n');
    for &n in &degrees {
        for monic in [true, false] {
            let r = entropy_integral_on(&measure, &schur, n, monic, grid)?;
            csv.push_str(&r.to_csv_row());
            csv.push('\n');
        }
    }
    write_file(&g.out, "entropy_table.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn calibrate(g: &GlobalArgs) -> CliResult<()> {
    let c = Calibration::measure()?;
    write_file(&g.out, "calibration.txt", &c.to_string())?;
    let t = c.thresholds();
    println!(
        "thresholds: gamma {:.6e}, psi {:.6e}, denominator {:.6e}, entropy {:.6e}",
        t.gamma, t.psi, t.denominator, t.entropy
    );
    Ok(())
}
