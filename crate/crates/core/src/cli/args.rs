//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::cubature::{MzMode, SolverMode};
use crate::error::{Error, Result};
use crate::geometry::ManifoldId;
use crate::space::SpaceKind;
use crate::weights::{gen_adversarial_ex1, gen_random_band, uniform, validate, validate_fitted, WeightVector};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "WCUBATURE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "wcubature", version, about = "Cubature with prescribed weights on model manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a weighted area partition and check it.
    Partition(PartitionArgs),
    /// Place points for the given weights and write the rule.
    Solve(SolveArgs),
    /// Re-check a rule file.
    Verify(VerifyArgs),
    /// Sweep N and tabulate Marcinkiewicz–Zygmund ratio failures.
    Mz(MzArgs),
    /// Restriction-fit curves and arc-length diagnostics on an ellipse.
    Ellipse(EllipseArgs),
    /// Generate, validate or aggregate weight vectors.
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `circle`, `torus2`, `sphere2` or `ellipse:A:B`.
    #[arg(long, default_value = "circle", value_parser = parse_manifold)]
    pub manifold: ManifoldId,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to $WCUBATURE_OUT_DIR, then the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// `uniform`, `band:A:B:SEED`, `ex1` or `file:PATH` (JSON array).
    #[arg(long, default_value = "uniform", value_parser = parse_source)]
    pub weights: WeightSource,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub w: WeightArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub w: WeightArgs,
    /// Band of the diffusion space, or degree of the algebraic one.
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long, default_value = "diffusion", value_parser = parse_space)]
    pub space: SpaceKind,
    /// `hybrid`, `residual-descent` or `paper-flow`.
    #[arg(long, default_value = "hybrid", value_parser = parse_mode)]
    pub mode: SolverMode,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1)]
    pub flow_rounds: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Aggregate the weights into blocks of mass at least 1/N first.
    #[arg(long)]
    pub aggregate: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Rule JSON written by `solve`.
    pub rule: PathBuf,
    /// Defaults to the tolerance stored in the rule.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MzArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "L")]
    pub l: f64,
    #[arg(long, default_value = "diffusion", value_parser = parse_space)]
    pub space: SpaceKind,
    /// `value` or `gradient`; diffusion spaces only support `gradient`.
    #[arg(long, default_value = "gradient", value_parser = parse_mz_mode)]
    pub mz_mode: MzMode,
    /// Comma-separated N grid.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512,1024,2048,4096")]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct EllipseArgs {
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Mode number of the fitted eigenfunction.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 12)]
    pub max_deg: usize,
    /// Samples of `h` over one period.
    #[arg(long, default_value_t = 256)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Shorthand for `--weights ex1`.
    #[arg(long, conflicts_with = "weights")]
    pub ex1: bool,
    #[arg(long, value_parser = parse_source)]
    pub weights: Option<WeightSource>,
    /// Check the weights against the band `A:B` instead of the fitted one.
    #[arg(long, value_parser = parse_band)]
    pub validate: Option<(f64, f64)>,
    /// Print the block aggregation instead of the weights.
    #[arg(long)]
    pub aggregate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Uniform,
    Band { a: f64, b: f64, seed: u64 },
    Ex1,
    File(PathBuf),
}

impl WeightSource {
    /// Raw values, before any band check; `file:` sources ignore `n`.
    pub fn values(&self, n: Option<usize>) -> Result<Vec<f64>> {
        let need = || n.ok_or_else(|| Error::Unsupported("this weight source needs --N".into()));
        Ok(match self {
            WeightSource::Uniform => uniform(need()?)?.values().to_vec(),
            WeightSource::Band { a, b, seed } => gen_random_band(need()?, *a, *b, *seed)?.values().to_vec(),
            WeightSource::Ex1 => gen_adversarial_ex1(need()?)?.values().to_vec(),
            WeightSource::File(p) => {
                let text = std::fs::read_to_string(p)?;
                let v: Vec<f64> = serde_json::from_str(&text)?;
                if let Some(n) = n {
                    if n != v.len() {
                        return Err(Error::Length(format!("--N {n} but {} weights in {}", v.len(), p.display())));
                    }
                }
                v
            }
        })
    }

    pub fn load(&self, n: Option<usize>) -> Result<WeightVector> {
        let v = self.values(n)?;
        match self {
            WeightSource::Band { a, b, .. } => validate(&v, *a, *b),
            _ => validate_fitted(&v),
        }
    }
}

fn parse_manifold(s: &str) -> std::result::Result<ManifoldId, String> {
    ManifoldId::parse(s).map_err(|e| e.to_string())
}

fn parse_space(s: &str) -> std::result::Result<SpaceKind, String> {
    match s {
        "diffusion" => Ok(SpaceKind::Diffusion),
        "algebraic" => Ok(SpaceKind::Algebraic),
        _ => Err(format!("unknown space '{s}' (diffusion | algebraic)")),
    }
}

fn parse_mode(s: &str) -> std::result::Result<SolverMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mz_mode(s: &str) -> std::result::Result<MzMode, String> {
    match s {
        "value" => Ok(MzMode::Value),
        "gradient" => Ok(MzMode::Gradient),
        _ => Err(format!("unknown MZ mode '{s}' (value | gradient)")),
    }
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("band '{s}' is not A:B"))?;
    let a = a.parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

pub fn parse_source(s: &str) -> std::result::Result<WeightSource, String> {
    if let Some(p) = s.strip_prefix("file:") {
        return Ok(WeightSource::File(PathBuf::from(p)));
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["uniform"] => Ok(WeightSource::Uniform),
        ["ex1"] => Ok(WeightSource::Ex1),
        ["band", a, b, seed] => Ok(WeightSource::Band {
            a: a.parse().map_err(|_| format!("bad band bound '{a}'"))?,
            b: b.parse().map_err(|_| format!("bad band bound '{b}'"))?,
            seed: seed.parse().map_err(|_| format!("bad seed '{seed}'"))?,
        }),
        _ => Err(format!("unknown weight source '{s}' (uniform | band:A:B:SEED | ex1 | file:PATH)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_parse() {
        assert_eq!(parse_source("uniform").unwrap(), WeightSource::Uniform);
        assert_eq!(parse_source("band:0.5:2:42").unwrap(), WeightSource::Band { a: 0.5, b: 2.0, seed: 42 });
        assert_eq!(parse_source("file:w.json").unwrap(), WeightSource::File("w.json".into()));
        assert!(parse_source("band:0.5:2").is_err());
    }

    #[test]
    fn ex1_conflicts_with_a_source() {
        assert!(Cli::try_parse_from(["wcubature", "weights", "--ex1", "--weights", "band:0.5:2:1", "--N", "4"]).is_err());
        assert!(Cli::try_parse_from(["wcubature", "weights", "--ex1", "--N", "4"]).is_ok());
    }
}
