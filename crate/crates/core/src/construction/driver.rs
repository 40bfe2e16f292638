//! Iterated construction: stage `k` transforms the measure of stage `k − 1`
//! and keeps the entropies at earlier checkpoints from dropping.
//!
//! Stage `k` holds `σᵏ = (μ₁ᵏ + κₖδ₁)/(1 + κₖ)` with `μ₁ᵏ` Bernstein–Szegő.
//! The Schur parameters of `σᵏ` are never stored; they are regenerated from
//! `(μ₁ᵏ, κₖ)` on demand.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::construction::lemma::{LemmaBlockSpec, BREAKPOINT_CAP, DEFAULT_C, DEFAULT_C_GROWTH};
use crate::construction::realline::{real_line_map, RealLineReport};
use crate::construction::transform::{transform_step, TransformConfig};
use crate::construction::trig::trig_approx;
use crate::entropy::{entropy_from_pair, entropy_integral, EntropyReport};
use crate::error::{Error, Result};
use crate::grid::{CircleGrid, DEFAULT_OVERSAMPLING};
use crate::measures::{moments_from_density, perturbed_schur, DensityTrace, MeasureSpec, PerturbationBasis};
use crate::opuc::{sweep, SweepOutput};
use crate::schur::SchurSequence;

/// Largest number of stages the driver accepts.
pub const MAX_STAGES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub ls: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Sup-norm tolerance `ε′` of the trigonometric approximations.
    pub eps: f64,
    pub c: f64,
    pub c_growth: f64,
    pub even_checkpoints: bool,
    /// Measure the trig approximation error relative to the peak of the
    /// target instead of absolutely.
    pub trig_relative: bool,
    pub grid_factor: usize,
    /// Number of times `κ` may be halved to restore persistence.
    pub kappa_budget: usize,
    /// Moments `c_0..c_p` recorded per stage.
    pub moment_count: usize,
    pub max_n: usize,
}

impl DriverConfig {
    pub fn new(ls: Vec<f64>, deltas: Vec<f64>) -> Self {
        Self {
            ls,
            deltas,
            eps: 0.01,
            c: DEFAULT_C,
            c_growth: DEFAULT_C_GROWTH,
            even_checkpoints: true,
            trig_relative: false,
            grid_factor: DEFAULT_OVERSAMPLING,
            kappa_budget: 60,
            moment_count: 8,
            max_n: BREAKPOINT_CAP,
        }
    }

    pub fn stages(&self) -> usize {
        self.ls.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.ls.len();
        if k == 0 || k > MAX_STAGES {
            return Err(Error::InvalidParameter(format!(
                "number of stages must be in 1..={MAX_STAGES}, got {k}"
            )));
        }
        if self.deltas.len() != k {
            return Err(Error::InvalidParameter(format!(
                "{k} values of L but {} values of delta",
                self.deltas.len()
            )));
        }
        let l2: f64 = self.ls.iter().map(|l| l * l).sum();
        if !(l2 < 0.25) {
            return Err(Error::InvalidParameter(format!(
                "sum of L² must be below 1/4, got {l2}"
            )));
        }
        let ds: f64 = self.deltas.iter().sum();
        if !(ds < 0.25) || self.deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "deltas must be positive with sum below 1/4, got sum {ds}"
            )));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if self.grid_factor < crate::grid::MIN_OVERSAMPLING {
            return Err(Error::InvalidParameter(format!(
                "grid factor must be at least {}, got {}",
                crate::grid::MIN_OVERSAMPLING,
                self.grid_factor
            )));
        }
        for (i, l) in self.ls.iter().enumerate() {
            let mut t = self.transform_config(i);
            t.l = *l;
            t.validate()?;
        }
        Ok(())
    }

    fn transform_config(&self, stage: usize) -> TransformConfig {
        TransformConfig {
            l: self.ls[stage],
            delta: self.deltas[stage],
            c: self.c,
            c_growth: self.c_growth,
            even: self.even_checkpoints,
            max_n: self.max_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// 1-based.
    pub stage: usize,
    pub l: f64,
    pub delta: f64,
    /// `M′ = max(trig degree, previous checkpoint)` before any parity bump.
    pub m_prime: usize,
    /// `N′` actually used.
    pub n_prime: usize,
    /// The checkpoint `Mₖ = N`.
    pub checkpoint: usize,
    pub block: LemmaBlockSpec,
    /// `ln A`, `A = Φ_{N′+1}(μ₁)(1)`.
    pub log_a: f64,
    /// `ln(1/K_{N−1}(μ₁)(1,1))`.
    pub log_kappa_choice: f64,
    pub log_kappa: f64,
    pub halvings: usize,
    pub grid_size: usize,
    /// `ln φ_{Mₖ}(σᵏ)(1)`, orthonormal.
    pub log_phi_at_one: f64,
    /// `ln Φ_{Mₖ}(σᵏ)(1)`.
    pub log_monic_at_one: f64,
    /// Largest trig degree over all checkpoints, when a next stage was prepared.
    pub trig_degree: Option<usize>,
    pub trig_sup_error: Option<f64>,
}

impl StageRecord {
    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }
}

/// Everything a finished (or partial) run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionState {
    pub config: DriverConfig,
    pub records: Vec<StageRecord>,
    /// Parameters of `μ₁` for the last completed stage.
    pub mu1: SchurSequence,
    pub log_kappa: f64,
    /// Row `i` holds `ε̂_{M_j}(σ^{i+1})` for `j ≤ i`.
    pub entropy: Vec<Vec<f64>>,
    /// Row `0` is Lebesgue measure, row `k` is `σᵏ`.
    pub moments: Vec<Vec<Complex64>>,
}

impl ConstructionState {
    pub fn stage(&self) -> usize {
        self.records.len()
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.checkpoint).collect()
    }

    pub fn kappa(&self) -> f64 {
        self.log_kappa.exp()
    }

    /// The current measure `σᴷ`.
    pub fn measure(&self) -> Result<MeasureSpec> {
        MeasureSpec::bernstein_szego(self.mu1.clone()).add_atom(self.kappa())
    }

    /// First `len` Schur parameters of `σᴷ`.
    pub fn schur(&self, len: usize) -> Result<SchurSequence> {
        perturbed_schur(&self.mu1, self.kappa(), len)
    }

    /// Upper bound on `Σγ²` over the full parameter sequence of `σᴷ`, from
    /// `Σγ² ≤ −Σ ln(1 − γ²) = −Σ_{μ₁} ln(1 − γ²) + ln(1 + κ)`.
    pub fn l2_bound(&self) -> f64 {
        -self.mu1.log_szego_sum() + self.kappa().ln_1p()
    }

    /// `Σ Lₖ² + Σ δₖ` over the completed stages.
    pub fn l2_budget(&self) -> f64 {
        self.records.iter().map(|r| r.l * r.l + r.delta).sum()
    }

    /// Largest `|c_p(σᵏ) − c_p(σᵏ⁻¹)| − 2κₖ` over stages and recorded
    /// `p ≤ N′ₖ + 1`, the range where `μ₁ᵏ` shares the moments of `σᵏ⁻¹`;
    /// non-positive when every step obeys the bound.
    pub fn moment_cauchy_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (k, r) in self.records.iter().enumerate() {
            let (a, b) = (&self.moments[k], &self.moments[k + 1]);
            for (x, y) in a.iter().zip(b).take(r.n_prime + 2) {
                worst = worst.max((y - x).norm() - 2.0 * r.kappa());
            }
        }
        worst
    }

    /// Smallest `ε̂_{M_j}(σᴷ) − ε̂_{M_j}(σʲ) + 5ε′(K − j)` over `j`.
    pub fn persistence_margin(&self) -> f64 {
        let k = self.stage();
        let last = &self.entropy[k - 1];
        (0..k.saturating_sub(1))
            .map(|j| last[j] - self.entropy[j][j] + 5.0 * self.config.eps * (k - 1 - j) as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Monic or orthonormal entropies at every checkpoint, against `σᴷ`, on
    /// the given grid.
    pub fn checkpoint_entropies(&self, grid: CircleGrid, orthonormal: bool) -> Result<Vec<EntropyReport>> {
        let ev = StageEvaluator::new(&self.mu1, &self.checkpoints(), grid)?;
        ev.reports(self.kappa(), orthonormal)
    }

    /// Grid the driver used for the last stage.
    pub fn grid(&self) -> CircleGrid {
        CircleGrid::with_oversampling(self.mu1.len(), self.config.grid_factor)
    }

    /// `p_{M/2}(1)` against `φ_M(1)` at every even checkpoint.
    pub fn real_line(&self) -> Result<Vec<RealLineReport>> {
        let checkpoints = self.checkpoints();
        let top = checkpoints.iter().copied().max().unwrap_or(0);
        let schur = self.schur(top)?;
        let w = self.kappa() / (1.0 + self.kappa());
        checkpoints
            .into_iter()
            .filter(|m| m % 2 == 0)
            .map(|m| real_line_map(&schur, m, Some(w)))
            .collect()
    }

    /// Replaces `σᴷ` by the Bernstein–Szegő measure of its first `degree`
    /// parameters and measures the monic entropy at every checkpoint up to
    /// `degree`.
    pub fn ac_post_pass(&self, degree: usize) -> Result<Vec<EntropyReport>> {
        let schur = self.schur(degree)?;
        let measure = MeasureSpec::bernstein_szego(schur.clone());
        self.checkpoints()
            .into_iter()
            .filter(|&m| m <= degree)
            .map(|m| entropy_integral(&measure, &schur, m, true))
            .collect()
    }

    pub const GROWTH_HEADER: &'static str =
        "k,M_k,L_k,kappa_k,log_phi_at_one,entropy_hat_log,entropy_over_sqrtM";

    pub fn growth_csv(&self) -> String {
        let mut s = String::from(Self::GROWTH_HEADER);
        s.push('\n');
        for (i, r) in self.records.iter().enumerate() {
            let e = self.entropy[i][i];
            let log_e = if e > 0.0 { e.ln() } else { f64::NAN };
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.stage,
                r.checkpoint,
                r.l,
                r.kappa(),
                r.log_phi_at_one,
                log_e,
                e / (r.checkpoint as f64).sqrt()
            );
        }
        s
    }

    /// `i,j,M_j,entropy_hat` for every entry of the entropy matrix.
    pub fn entropy_csv(&self) -> String {
        let mut s = String::from("stage,checkpoint,M_j,entropy_hat\n");
        let m = self.checkpoints();
        for (i, row) in self.entropy.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{:.16e}", i + 1, j + 1, m[j], e);
            }
        }
        s
    }
}

/// Perturbation bases of `μ₁` at a list of degrees plus the density snapshot.
struct StageEvaluator {
    grid: CircleGrid,
    mu1: SchurSequence,
    bases: Vec<PerturbationBasis>,
    output: SweepOutput,
}

impl StageEvaluator {
    fn new(mu1: &SchurSequence, checkpoints: &[usize], grid: CircleGrid) -> Result<Self> {
        grid.ensure_resolves(mu1.len())?;
        if let Some(&m) = checkpoints.iter().find(|&&m| m == 0 || m > mu1.len()) {
            return Err(Error::OutOfRange {
                requested: m,
                available: mu1.len(),
            });
        }
        let output = sweep(mu1.as_slice(), checkpoints, grid, true);
        let bases = checkpoints
            .iter()
            .map(|&m| {
                let snap = output.at(m).expect("sweep records every requested degree");
                PerturbationBasis::from_snapshot(grid, snap)
            })
            .collect();
        Ok(Self {
            grid,
            mu1: mu1.clone(),
            bases,
            output,
        })
    }

    fn measure(&self, kappa: f64) -> Result<(MeasureSpec, DensityTrace)> {
        let measure = MeasureSpec::bernstein_szego(self.mu1.clone()).add_atom(kappa)?;
        let density = DensityTrace::from_snapshot(
            self.grid,
            measure.normalization(),
            self.mu1.as_slice(),
            self.output.last(),
        )?;
        Ok((measure, density))
    }

    fn reports(&self, kappa: f64, orthonormal: bool) -> Result<Vec<EntropyReport>> {
        let (measure, density) = self.measure(kappa)?;
        let top = self.bases.iter().map(|b| b.degree()).max().unwrap_or(0);
        let schur = perturbed_schur(&self.mu1, kappa, top)?;
        self.bases
            .iter()
            .map(|b| {
                let pair = b.perturbed(kappa)?;
                let lk = orthonormal.then(|| -0.5 * b.log_norm_sq(kappa));
                entropy_from_pair(&measure, &density, &pair, &schur, lk)
            })
            .collect()
    }

    /// Largest trig degree, and its sup error, needed to approximate every
    /// `|Φ_{M_j}|² ln|Φ_{M_j}|` within `eps` (times the peak of the target
    /// when `relative`).
    fn trig_degree(&self, kappa: f64, eps: f64, relative: bool) -> Result<(usize, f64)> {
        let mut best = (0, 0.0);
        for b in &self.bases {
            let pair = b.perturbed(kappa)?;
            let target: Vec<f64> = (0..self.grid.size())
                .map(|j| {
                    let lp = pair.log_abs_phi(j);
                    (2.0 * lp).exp() * lp
                })
                .collect();
            let tol = if relative {
                eps * target.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
            } else {
                eps
            };
            let a = trig_approx(&target, tol)?;
            if a.poly.degree() >= best.0 {
                best = (a.poly.degree(), a.sup_error);
            }
        }
        Ok(best)
    }
}

fn trig_degree_with_refinement(
    mu1: &SchurSequence,
    checkpoints: &[usize],
    kappa: f64,
    grid: CircleGrid,
    eps: f64,
    relative: bool,
) -> Result<(usize, f64)> {
    match StageEvaluator::new(mu1, checkpoints, grid)?.trig_degree(kappa, eps, relative) {
        Err(Error::Resolution(_)) => StageEvaluator::new(mu1, checkpoints, grid.doubled())?
            .trig_degree(kappa, eps, relative),
        other => other,
    }
}

fn failure(stage: usize, err: Error) -> Error {
    match err {
        e @ (Error::InvalidParameter(_) | Error::StageFailure { .. }) => e,
        e => Error::StageFailure {
            stage,
            reason: e.to_string(),
        },
    }
}

/// Runs every configured stage from Lebesgue measure.
pub fn run(config: &DriverConfig) -> Result<ConstructionState> {
    run_with_progress(config, |_| {})
}

/// As [`run`], calling `progress` after each completed stage. On failure the
/// returned error names the stage; completed stages are reported through
/// `progress` first.
pub fn run_with_progress(
    config: &DriverConfig,
    mut progress: impl FnMut(&ConstructionState),
) -> Result<ConstructionState> {
    config.validate()?;
    let p = config.moment_count;
    let mut state = ConstructionState {
        config: config.clone(),
        records: Vec::new(),
        mu1: SchurSequence::default(),
        log_kappa: f64::NEG_INFINITY,
        entropy: Vec::new(),
        moments: vec![lebesgue_moments(p)],
    };
    let mut next_m_prime = 1;
    for stage in 0..config.stages() {
        let rec = run_stage(&mut state, stage, next_m_prime).map_err(|e| failure(stage + 1, e))?;
        next_m_prime = rec;
        progress(&state);
    }
    Ok(state)
}

fn lebesgue_moments(p: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); p + 1];
    c[0] = Complex64::new(1.0, 0.0);
    c
}

/// Performs one stage in place and returns `M′` for the next one.
fn run_stage(state: &mut ConstructionState, stage: usize, m_prime: usize) -> Result<usize> {
    let config = state.config.clone();
    let source = if stage == 0 {
        SchurSequence::zeros(m_prime + 2)
    } else {
        state.schur(m_prime + 2)?
    };
    let outcome = transform_step(&source, m_prime, &config.transform_config(stage))?;
    let mut checkpoints = state.checkpoints();
    checkpoints.push(outcome.n);
    let grid = CircleGrid::with_oversampling(outcome.mu1.len(), config.grid_factor);
    let ev = StageEvaluator::new(&outcome.mu1, &checkpoints, grid)?;

    let kappa_choice = outcome.kappa();
    let mut halvings = 0;
    let (kappa, reports) = loop {
        let kappa = kappa_choice * 0.5f64.powi(halvings as i32);
        let reports = ev.reports(kappa, false)?;
        if let Some(r) = reports.iter().find(|r| !r.representable) {
            return Err(Error::Integration(format!(
                "entropy at degree {} exceeds the representable range",
                r.degree
            )));
        }
        let failing = (0..stage)
            .find(|&j| !(reports[j].entropy > state.entropy[j][j] - 5.0 * config.eps));
        match failing {
            None => break (kappa, reports),
            Some(j) if halvings >= config.kappa_budget => {
                return Err(Error::StageFailure {
                    stage: stage + 1,
                    reason: format!(
                        "persistence at M_{} = {} fails after {halvings} halvings: {:.6e} vs {:.6e} − 5ε′",
                        j + 1,
                        checkpoints[j],
                        reports[j].entropy,
                        state.entropy[j][j]
                    ),
                });
            }
            Some(_) => halvings += 1,
        }
    };

    let (measure, density) = ev.measure(kappa)?;
    let moments = moments_from_density(&measure, &density, config.moment_count).0;
    let top = ev.bases.last().expect("at least one checkpoint");
    let log_monic_at_one = top.log_value_at_one(kappa);
    let log_phi_at_one = log_monic_at_one - 0.5 * top.log_norm_sq(kappa);

    let trig = if stage + 1 < config.stages() {
        Some(trig_degree_with_refinement(
            &outcome.mu1,
            &checkpoints,
            kappa,
            grid,
            config.eps,
            config.trig_relative,
        )?)
    } else {
        None
    };

    state.records.push(StageRecord {
        stage: stage + 1,
        l: config.ls[stage],
        delta: config.deltas[stage],
        m_prime,
        n_prime: outcome.n_prime,
        checkpoint: outcome.n,
        block: outcome.block.clone(),
        log_a: outcome.log_a,
        log_kappa_choice: outcome.log_kappa,
        log_kappa: kappa.ln(),
        halvings,
        grid_size: grid.size(),
        log_phi_at_one,
        log_monic_at_one,
        trig_degree: trig.map(|t| t.0),
        trig_sup_error: trig.map(|t| t.1),
    });
    state.entropy.push(reports.iter().map(|r| r.entropy).collect());
    state.moments.push(moments);
    state.mu1 = outcome.mu1;
    state.log_kappa = kappa.ln();
    Ok(trig.map_or(outcome.n, |t| t.0.max(outcome.n)))
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn fmt_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl std::fmt::Display for ConstructionState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = &self.config;
        writeln!(f, "[config]")?;
        writeln!(f, "ls {}", fmt_floats(&c.ls))?;
        writeln!(f, "deltas {}", fmt_floats(&c.deltas))?;
        writeln!(f, "eps {:.16e}", c.eps)?;
        writeln!(f, "c {:.16e}", c.c)?;
        writeln!(f, "c_growth {:.16e}", c.c_growth)?;
        writeln!(f, "even_checkpoints {}", c.even_checkpoints)?;
        writeln!(f, "trig_relative {}", c.trig_relative)?;
        writeln!(f, "grid_factor {}", c.grid_factor)?;
        writeln!(f, "kappa_budget {}", c.kappa_budget)?;
        writeln!(f, "moment_count {}", c.moment_count)?;
        writeln!(f, "max_n {}", c.max_n)?;
        for r in &self.records {
            writeln!(f, "[stage]")?;
            writeln!(f, "stage {}", r.stage)?;
            writeln!(f, "l {:.16e}", r.l)?;
            writeln!(f, "delta {:.16e}", r.delta)?;
            writeln!(f, "m_prime {}", r.m_prime)?;
            writeln!(f, "n_prime {}", r.n_prime)?;
            writeln!(f, "checkpoint {}", r.checkpoint)?;
            writeln!(f, "block_l {:.16e}", r.block.l)?;
            writeln!(f, "block_c {:.16e}", r.block.c)?;
            writeln!(f, "block_breakpoints {}", fmt_list(&r.block.breakpoints))?;
            writeln!(f, "log_a {:.16e}", r.log_a)?;
            writeln!(f, "log_kappa_choice {:.16e}", r.log_kappa_choice)?;
            writeln!(f, "log_kappa {:.16e}", r.log_kappa)?;
            writeln!(f, "halvings {}", r.halvings)?;
            writeln!(f, "grid_size {}", r.grid_size)?;
            writeln!(f, "log_phi_at_one {:.16e}", r.log_phi_at_one)?;
            writeln!(f, "log_monic_at_one {:.16e}", r.log_monic_at_one)?;
            writeln!(f, "trig_degree {}", fmt_opt(r.trig_degree))?;
            writeln!(
                f,
                "trig_sup_error {}",
                fmt_opt(r.trig_sup_error.map(|e| format!("{e:.16e}")))
            )?;
        }
        writeln!(f, "[entropy]")?;
        for row in &self.entropy {
            writeln!(f, "{}", fmt_floats(row))?;
        }
        writeln!(f, "[moments]")?;
        for row in &self.moments {
            let flat: Vec<f64> = row.iter().flat_map(|c| [c.re, c.im]).collect();
            writeln!(f, "{}", fmt_floats(&flat))?;
        }
        writeln!(f, "[mu1]")?;
        writeln!(f, "log_kappa {:.16e}", self.log_kappa)?;
        for g in self.mu1.iter() {
            writeln!(f, "{g:.16e}")?;
        }
        Ok(())
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(format!("cannot parse number {s:?}")))
}

fn parse_nums<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split_whitespace().map(parse_num).collect()
}

fn parse_opt<T: FromStr>(s: &str) -> Result<Option<T>> {
    if s == "none" {
        Ok(None)
    } else {
        parse_num(s).map(Some)
    }
}

/// `key value` lines of one section.
struct Fields<'a>(Vec<(&'a str, &'a str)>);

impl<'a> Fields<'a> {
    fn new(lines: &[&'a str]) -> Self {
        Self(
            lines
                .iter()
                .map(|l| l.split_once(' ').unwrap_or((l, "")))
                .collect(),
        )
    }

    fn get(&self, key: &str) -> Result<&'a str> {
        self.0
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| parse_err(format!("missing field {key}")))
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T> {
        parse_num(self.get(key)?)
    }
}

impl FromStr for ConstructionState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut sections: Vec<(&str, Vec<&str>)> = Vec::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                sections.push((name, Vec::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push(line);
            } else {
                return Err(parse_err("content before the first section"));
            }
        }
        let section = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, b)| b.as_slice())
                .ok_or_else(|| parse_err(format!("missing section [{name}]")))
        };

        let cf = Fields::new(section("config")?);
        let config = DriverConfig {
            ls: parse_nums(cf.get("ls")?)?,
            deltas: parse_nums(cf.get("deltas")?)?,
            eps: cf.num("eps")?,
            c: cf.num("c")?,
            c_growth: cf.num("c_growth")?,
            even_checkpoints: cf.num("even_checkpoints")?,
            trig_relative: cf.num("trig_relative")?,
            grid_factor: cf.num("grid_factor")?,
            kappa_budget: cf.num("kappa_budget")?,
            moment_count: cf.num("moment_count")?,
            max_n: cf.num("max_n")?,
        };

        let mut records = Vec::new();
        for (_, body) in sections.iter().filter(|(n, _)| *n == "stage") {
            let f = Fields::new(body);
            records.push(StageRecord {
                stage: f.num("stage")?,
                l: f.num("l")?,
                delta: f.num("delta")?,
                m_prime: f.num("m_prime")?,
                n_prime: f.num("n_prime")?,
                checkpoint: f.num("checkpoint")?,
                block: LemmaBlockSpec {
                    l: f.num("block_l")?,
                    c: f.num("block_c")?,
                    breakpoints: parse_nums(f.get("block_breakpoints")?)?,
                },
                log_a: f.num("log_a")?,
                log_kappa_choice: f.num("log_kappa_choice")?,
                log_kappa: f.num("log_kappa")?,
                halvings: f.num("halvings")?,
                grid_size: f.num("grid_size")?,
                log_phi_at_one: f.num("log_phi_at_one")?,
                log_monic_at_one: f.num("log_monic_at_one")?,
                trig_degree: parse_opt(f.get("trig_degree")?)?,
                trig_sup_error: parse_opt(f.get("trig_sup_error")?)?,
            });
        }

        let entropy = section("entropy")?
            .iter()
            .map(|l| parse_nums(l))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let moments = section("moments")?
            .iter()
            .map(|l| {
                let flat: Vec<f64> = parse_nums(l)?;
                if flat.len() % 2 == 1 {
                    return Err(parse_err("moment row has an odd number of values"));
                }
                Ok(flat
                    .chunks(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect())
            })
            .collect::<Result<Vec<Vec<Complex64>>>>()?;

        let body = section("mu1")?;
        let (head, rest) = body
            .split_first()
            .ok_or_else(|| parse_err("empty [mu1] section"))?;
        let log_kappa = match head.split_once(' ') {
            Some(("log_kappa", v)) => parse_num(v)?,
            _ => return Err(parse_err("[mu1] must start with log_kappa")),
        };
        let mu1 = SchurSequence::new(rest.iter().map(|l| parse_num(l)).collect::<Result<_>>()?)?;

        if entropy.len() != records.len() || moments.len() != records.len() + 1 {
            return Err(parse_err("section sizes disagree with the number of stages"));
        }
        if entropy.iter().enumerate().any(|(i, row)| row.len() != i + 1) {
            return Err(parse_err("entropy matrix is not lower triangular"));
        }
        Ok(Self {
            config,
            records,
            mu1,
            log_kappa,
            entropy,
            moments,
        })
    }
}
