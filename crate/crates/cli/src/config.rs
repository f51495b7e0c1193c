//! Command-line arguments, run configuration and exit codes.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use hopdof::Error;

pub const OK: u8 = 0;
pub const INVARIANT: u8 = 2;
pub const DECODE: u8 = 3;
pub const USAGE: u8 = 64;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: USAGE, message: message.into() }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self { code: INVARIANT, message: message.into() }
    }

    pub fn decode(message: impl Into<String>) -> Self {
        Self { code: DECODE, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::Dimension(_) | Error::Index(_) => USAGE,
            Error::DecodeFailure { .. } | Error::CountMismatch { .. } => DECODE,
            _ => INVARIANT,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimVariant {
    /// 3-user 3-hop X network.
    X3,
    /// 3-user 6-hop interference network built from two X stages.
    Ic6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    PsinRank,
    Causality,
    GammaVsSum,
    AppendixB,
    TwoHop,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::PsinRank => "psin-rank",
            Suite::Causality => "causality",
            Suite::GammaVsSum => "gamma-vs-sum",
            Suite::AppendixB => "appendix-b",
            Suite::TwoHop => "two-hop",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hopdof", version, about = "Delayed-CSI multi-hop network simulator and exact DoF accounting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Number of users.
    #[arg(long = "k", global = true)]
    pub k: Option<usize>,
    /// Scheduled transmitters per PSIN batch (3 ≤ L ≤ K).
    #[arg(long = "l", global = true, conflicts_with = "q")]
    pub l: Option<usize>,
    /// L − 1; alternative to --l.
    #[arg(long = "q", global = true)]
    pub q: Option<usize>,
    /// Information symbols per round.
    #[arg(long = "n1", global = true)]
    pub n1: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo trials or seeds.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Tolerance: decode residual, or relative gap for the gamma check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the result to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Achievable DoF, best q and MISO upper bound per K.
    DofTable {
        /// Comma-separated K values, e.g. 3,5,10,20.
        k_list: String,
    },
    /// Normalized slot total of every hop for one (K, L).
    Hops,
    /// DoF against the inverse of x^x.
    Scaling {
        /// Comma-separated K values.
        #[arg(default_value = "10,100,1000,10000")]
        k_list: String,
    },
    /// Runs the scheme end to end on random symbols.
    Simulate {
        #[arg(value_enum)]
        variant: SimVariant,
    },
    /// Runs a property suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub n1: Option<usize>,
    pub seed: u64,
    pub trials: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> CliResult<Self> {
        let command = match &cli.command {
            Command::DofTable { .. } => "dof-table",
            Command::Hops => "hops",
            Command::Scaling { .. } => "scaling",
            Command::Simulate { .. } => "simulate",
            Command::Verify { suite } => suite.name(),
        };
        let l = match (cli.l, cli.q) {
            (Some(l), None) => Some(l),
            (None, Some(q)) => Some(q + 1),
            (None, None) => None,
            (Some(_), Some(_)) => return Err(CliError::usage("give either --l or --q, not both")),
        };
        if let Some(t) = cli.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::usage(format!("--tol must be positive, got {t}")));
            }
        }
        if cli.trials == Some(0) {
            return Err(CliError::usage("--trials must be at least 1"));
        }
        Ok(Self {
            command: command.into(),
            k: cli.k,
            l,
            n1: cli.n1,
            seed: cli.seed,
            trials: cli.trials,
            tol: cli.tol,
            out: cli.out.clone(),
            format: cli.format,
        })
    }
}

/// Parses `"3,5,10"` into sorted, deduplicated K values, each at least 3.
pub fn parse_k_list(s: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: usize = part.parse().map_err(|_| CliError::usage(format!("not a user count: {part:?}")))?;
        if k < 3 {
            return Err(CliError::usage(format!("K must be at least 3, got {k}")));
        }
        out.push(k);
    }
    if out.is_empty() {
        return Err(CliError::usage("the K list is empty"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_list_parsing() {
        assert_eq!(parse_k_list("20,3, 5,3").unwrap(), vec![3, 5, 20]);
        assert_eq!(parse_k_list("").unwrap_err().code, USAGE);
        assert_eq!(parse_k_list("2").unwrap_err().code, USAGE);
        assert_eq!(parse_k_list("x").unwrap_err().code, USAGE);
    }

    #[test]
    fn q_maps_to_l() {
        let cli = Cli::try_parse_from(["hopdof", "hops", "--k", "5", "--q", "2"]).unwrap();
        assert_eq!(RunConfig::from_cli(&cli).unwrap().l, Some(3));
        assert!(Cli::try_parse_from(["hopdof", "hops", "--l", "3", "--q", "2"]).is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Domain("x".into())).code, USAGE);
        assert_eq!(CliError::from(Error::DecodeFailure { destination: 1, residual: 1.0 }).code, DECODE);
        assert_eq!(CliError::from(Error::Inconsistent("x".into())).code, INVARIANT);
    }
}
