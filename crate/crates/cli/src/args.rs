use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sparsact", version, about = "Row-sparse actuator/sensor selection and covariance completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated problem file to OUT/problem.json.
    Gen(GenArgs),
    /// γ sweep for actuator selection: sweep CSV, iteration CSVs, gains.
    Actuator(SweepArgs),
    /// Covariance completion by the method of multipliers.
    Complete(CompleteArgs),
    /// Sensor selection through the dual actuator problem.
    Sensor(SweepArgs),
    /// Greedy actuator removal baseline.
    Greedy(GreedyArgs),
    /// Per-iteration timing of the PG solver on Swift–Hohenberg models.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    SwiftHohenberg,
    Random,
    Completion,
    Sensor,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub family: Family,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Inputs (random models).
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Outputs (random and sensor models).
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swift–Hohenberg bifurcation parameter.
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    pub c: f64,
    /// Swift–Hohenberg modulation amplitude.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Swift–Hohenberg modulation frequency.
    #[arg(long, default_value_t = 1.25, allow_hyphen_values = true)]
    pub omega: f64,
    /// Swift–Hohenberg control weight.
    #[arg(long, default_value_t = 10.0)]
    pub r: f64,
    /// Completion mask: `diagonal`, `full`, or an off-diagonal density in [0, 1].
    #[arg(long, default_value = "diagonal")]
    pub mask: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    /// Regularization weights, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "gamma_grid")]
    pub gamma: Vec<f64>,
    /// Log-spaced grid `LO:HI:COUNT`.
    #[arg(long)]
    pub gamma_grid: Option<String>,
}

impl GammaArgs {
    /// Sorted ascending.
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let mut gammas = match &self.gamma_grid {
            Some(spec) => parse_grid(spec)?,
            None if self.gamma.is_empty() => return Err(CliError::input("one of --gamma or --gamma-grid is required")),
            None => self.gamma.clone(),
        };
        if let Some(bad) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(CliError::input(format!("--gamma values must be finite and non-negative, got {bad}")));
        }
        gammas.sort_by(f64::total_cmp);
        Ok(gammas)
    }
}

/// `LO:HI:COUNT` → `COUNT` log-spaced points from `LO` to `HI`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::input(format!("--gamma-grid expects LO:HI:COUNT with 0 < LO <= HI and COUNT >= 1, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect())
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub problem: PathBuf,
    #[command(flatten)]
    pub gamma: GammaArgs,
    /// PG stopping tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Reweighted solves after the first.
    #[arg(long, default_value_t = 3)]
    pub reweight: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_rw: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Worker threads; the γ grid is split into this many contiguous chunks.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    pub problem: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Primal feasibility tolerance on ‖Δ_p‖/‖G‖.
    #[arg(long, default_value_t = 1e-2)]
    pub eps_p: f64,
    /// Dual feasibility tolerance.
    #[arg(long, default_value_t = 1e-2)]
    pub eps_d: f64,
    /// PG tolerance when the mask is empty and no multipliers are needed.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GreedyArgs {
    pub problem: PathBuf,
    /// Stop once this many actuators remain.
    #[arg(long)]
    pub stop_at: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub sizes: Vec<usize>,
    /// PG iterations timed per size.
    #[arg(long, default_value_t = 15)]
    pub iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_log_spaced() {
        let g = parse_grid("1e-2:1e2:5").unwrap();
        let expect = [1e-2, 1e-1, 1.0, 1e1, 1e2];
        assert!(g.iter().zip(expect).all(|(a, b)| (a - b).abs() <= 1e-12 * b));
        assert_eq!(parse_grid("3:3:1").unwrap(), vec![3.0]);
        for bad in ["1:2", "0:1:3", "2:1:3", "1:2:0", "a:b:c"] {
            assert_eq!(parse_grid(bad).unwrap_err().exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn gamma_list_is_sorted() {
        let g = GammaArgs { gamma: vec![1.0, 0.0, 0.5], gamma_grid: None };
        assert_eq!(g.values().unwrap(), vec![0.0, 0.5, 1.0]);
        let neg = GammaArgs { gamma: vec![-1.0], gamma_grid: None };
        assert!(neg.values().is_err());
    }
}
