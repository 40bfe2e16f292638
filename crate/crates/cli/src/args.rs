//! Flags, subcommands and the optional `key=value` config file. Config
//! entries become extra flags appended after the command line, for keys the
//! command line does not already set.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "opuc", version, about = "Entropy growth of orthogonal polynomials on the unit circle")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// File of `key=value` lines supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid oversampling factor (nodes per unit of degree).
    #[arg(long = "grid-factor", global = true, default_value_t = opuc_core::grid::DEFAULT_OVERSAMPLING)]
    pub grid_factor: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Breakpoints of a lemma sequence with Γ, Ψ and their bounds.
    Lemma(LemmaArgs),
    /// Run the multi-stage construction.
    Construct(ConstructArgs),
    /// Run the invariant suite on fixtures.
    Verify(VerifyArgs),
    /// Compare interval and circle polynomials at z = 1.
    Realline(RealLineArgs),
    /// Entropy integrals of a stored measure at chosen degrees.
    EntropyTable(EntropyTableArgs),
    /// Measure the growth constants and write a calibration file.
    Calibrate,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    #[arg(long = "L", default_value_t = 0.25)]
    pub l: f64,
    #[arg(long = "C", default_value_t = 10.0)]
    pub c: f64,
    #[arg(long = "kmax", default_value_t = 4)]
    pub k_max: usize,
    /// Skip the gap condition and keep C fixed.
    #[arg(long)]
    pub raw: bool,
    /// Factor applied to C each time the gap condition fails.
    #[arg(long = "c-growth", default_value_t = opuc_core::construction::lemma::DEFAULT_C_GROWTH)]
    pub c_growth: f64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    /// Number of stages.
    #[arg(long = "K", default_value_t = 2)]
    pub stages: usize,
    /// Per-stage L, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    pub l: Vec<f64>,
    /// Per-stage δ, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<f64>,
    /// Sup-norm tolerance of the trigonometric approximations.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Measure the approximation error relative to the target's peak.
    #[arg(long = "trig-relative")]
    pub trig_relative: bool,
    #[arg(long = "C", default_value_t = opuc_core::construction::lemma::DEFAULT_C)]
    pub c: f64,
    #[arg(long = "c-growth", default_value_t = opuc_core::construction::lemma::DEFAULT_C_GROWTH)]
    pub c_growth: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Fixture file; the built-in fixtures when absent.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Number of random sequences for the oracle sweep.
    #[arg(long, default_value_t = 50)]
    pub random: usize,
}

#[derive(Debug, Args)]
pub struct RealLineArgs {
    /// Serialized construction state.
    #[arg(long, conflicts_with = "chebyshev", required_unless_present = "chebyshev")]
    pub state: Option<PathBuf>,
    /// Degrees M for the Chebyshev case (all parameters zero).
    #[arg(long, value_delimiter = ',')]
    pub chebyshev: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EntropyTableArgs {
    /// Serialized construction state.
    #[arg(long, conflicts_with = "measure", required_unless_present = "measure")]
    pub state: Option<PathBuf>,
    /// Serialized measure.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Degrees; the state's checkpoints when absent.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
}

/// `argv` with config-file entries appended for keys the command line leaves
/// unset.
pub fn merge_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let path = argv.iter().enumerate().find_map(|(i, a)| {
        a.strip_prefix("--config=")
            .map(str::to_string)
            .or_else(|| (a == "--config").then(|| argv.get(i + 1).cloned()).flatten())
    });
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut out = argv.clone();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{path}:{}: expected key=value, got {line:?}", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let flag = format!("--{key}");
        let given = argv
            .iter()
            .any(|a| a == &flag || a.starts_with(&format!("{flag}=")));
        if given || key == "config" {
            continue;
        }
        match value {
            "true" => out.push(flag),
            "false" => {}
            v => out.push(format!("{flag}={v}")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_win_over_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nkmax = 2\nL=0.2\nraw=true\n").unwrap();
        let p = path.to_str().unwrap();
        let merged = merge_config(args(&["opuc", "lemma", "--config", p, "--L", "0.1"])).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        match cli.command {
            Command::Lemma(a) => {
                assert_eq!(a.l, 0.1);
                assert_eq!(a.k_max, 2);
                assert!(a.raw);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_config_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "kmax 2\n").unwrap();
        let err = merge_config(args(&["opuc", "lemma", "--config", path.to_str().unwrap()])).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let missing = merge_config(args(&["opuc", "lemma", "--config=/nonexistent/x"])).unwrap_err();
        assert_eq!(missing.exit_code(), 3);
    }
}
