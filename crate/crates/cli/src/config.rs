use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matryoshka::hilbert::{all_contents, SECTOR_CAP};
use matryoshka::simplex_spectrum::SpectrumVariant;
use matryoshka::{build_lattice, multinomial, Error, Result, SimplexLattice, Solver, SolverOptions};

/// Worker-count override for sweeps and parallel matvecs.
pub const WORKERS_ENV: &str = "MATRYOSHKA_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "matryoshka",
    version,
    about = "SU(k+1) antiferromagnet on nested k-simplices: lattices, spectra, RG steps, entanglement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit sites, bonds and couplings (optionally with coordinates).
    Lattice(LatticeArgs),
    /// Single-simplex analytic table, or the low-energy spectrum of a lattice.
    Spectrum(SpectrumArgs),
    /// Second-order Schrieffer-Wolff step for every layer.
    Sdrg(SdrgArgs),
    /// Entanglement entropies and ground-state fidelities.
    Entropy(EntropyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Permutation,
    OffDiagonal,
}

impl From<Variant> for SpectrumVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Permutation => SpectrumVariant::Permutation,
            Variant::OffDiagonal => SpectrumVariant::OffDiagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    /// Natural logarithm.
    E,
    /// Logarithm base k + 1.
    #[value(name = "k+1")]
    Colors,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// dense, iterative (Lanczos) or auto.
    #[arg(long, default_value = "auto")]
    pub solver: Solver,
    /// Eigensolver residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Seed of the Lanczos start vector.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Write here instead of stdout. Nothing is written on error.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub layers: usize,
    #[arg(long)]
    pub alpha: f64,
    /// Include site coordinates.
    #[arg(long)]
    pub embed: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub k: usize,
    /// Tabulate a single simplex instead of a lattice.
    #[arg(long, conflicts_with_all = ["layers", "alpha", "lowest", "sector"])]
    pub simplex: bool,
    #[arg(long, value_enum, default_value = "permutation")]
    pub variant: Variant,
    /// Skip the dense cross-check of the analytic table.
    #[arg(long)]
    pub no_verify: bool,
    #[arg(long)]
    pub layers: Option<usize>,
    /// One value or a comma-separated sweep.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub lowest: usize,
    /// balanced, all, or an explicit color content such as 2,2,2.
    #[arg(long, default_value = "balanced")]
    pub sector: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SdrgArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub layers: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct EntropyArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub layers: usize,
    /// Required unless --analytic.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// even-odd, radial:m1,..,mN, concentric:b or sites:i,j,..; repeatable.
    #[arg(long = "cut", required = true)]
    pub cuts: Vec<String>,
    /// Use the layer-singlet product state instead of the exact ground state.
    #[arg(long)]
    pub analytic: bool,
    #[arg(long, value_enum, default_value = "e")]
    pub base: LogBase,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SectorPolicy {
    Balanced,
    All,
    Content(Vec<usize>),
}

impl SectorPolicy {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "balanced" => Ok(Self::Balanced),
            "all" => Ok(Self::All),
            _ => text
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::ParameterDomain(format!("bad sector '{text}'")))
                })
                .collect::<Result<Vec<usize>>>()
                .map(Self::Content),
        }
    }

    /// Contents to diagonalize, each checked against the size cap.
    pub fn contents(&self, k: usize, n_sites: usize) -> Result<Vec<Vec<usize>>> {
        let contents = match self {
            Self::Balanced => {
                if n_sites % (k + 1) != 0 {
                    return Err(Error::ParameterDomain("no balanced sector".into()));
                }
                vec![vec![n_sites / (k + 1); k + 1]]
            }
            Self::All => all_contents(k, n_sites),
            Self::Content(c) => {
                if c.len() != k + 1 || c.iter().sum::<usize>() != n_sites {
                    return Err(Error::ContentMismatch {
                        content: c.clone(),
                        n_sites,
                    });
                }
                vec![c.clone()]
            }
        };
        for c in &contents {
            if multinomial(c) > SECTOR_CAP as u128 {
                return Err(Error::CapExceeded(format!("sector {c:?} exceeds {SECTOR_CAP} states")));
            }
        }
        Ok(contents)
    }
}

/// Validated parameters shared by every command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub k: usize,
    pub layers: usize,
    pub alphas: Vec<f64>,
    pub solver: SolverOptions,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(k: usize, layers: usize, alphas: Vec<f64>, common: &Common, default: Format) -> Result<Self> {
        if !(common.tol.is_finite() && common.tol > 0.0) {
            return Err(Error::ParameterDomain(format!("tol must be positive, got {}", common.tol)));
        }
        Ok(Self {
            k,
            layers,
            alphas,
            solver: SolverOptions {
                solver: common.solver,
                tol: common.tol,
                seed: common.seed,
                ..SolverOptions::default()
            },
            out: common.out.clone(),
            format: common.format.unwrap_or(default),
        })
    }

    /// One lattice per sweep point; fails on the first invalid one.
    pub fn lattices(&self) -> Result<Vec<SimplexLattice>> {
        if self.alphas.is_empty() {
            return Err(Error::ParameterDomain("--alpha is required".into()));
        }
        self.alphas
            .iter()
            .map(|&a| build_lattice(self.k, self.layers, a))
            .collect()
    }
}

pub fn worker_count() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::ParameterDomain(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}
