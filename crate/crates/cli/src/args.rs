use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evpca_core::{CriterionKind, KSpec};
use serde::Serialize;

/// Number of significant principal components in the extremes of a sample.
#[derive(Debug, Parser)]
#[command(name = "evpca", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the spike location from a CSV sample.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment on a generative model.
    Simulate(SimulateArgs),
    /// Scaled eigenvalues and their increments for a scree plot.
    Scree(ScreeArgs),
    /// Marčenko–Pastur density, CDF and quantiles, and spike forecasts.
    Mp(MpArgs),
    /// Gap-condition margins over a grid of spikes and aspect ratios.
    Gap(GapArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Numeric CSV, one observation per row. A non-numeric first row is a header.
    #[arg(long)]
    #[serde(skip)]
    pub input: PathBuf,
    /// Field delimiter of the input file.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,
    /// Map every column to standard Fréchet margins by ranks first.
    #[arg(long)]
    pub frechet_margins: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Number of extremes: a count (`76`), a fraction (`0.03`) or a percentage (`3%`).
    #[arg(long, value_parser = parse_k, required_unless_present = "k_grid", conflicts_with = "k_grid")]
    pub k: Option<KSpec>,
    /// Comma-separated list of `--k` values; one report row per entry.
    #[arg(long, value_parser = parse_k_grid)]
    pub k_grid: Option<KGrid>,
    /// Largest candidate p. Defaults to d − 2 (k > d) or min(k − 2, ⌈d/2⌉) (d > k).
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum, default_value_t = CriterionArg::Auto)]
    pub criterion: CriterionArg,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Model specification: a JSON file or an inline JSON object.
    #[arg(long)]
    #[serde(skip)]
    pub model_spec: String,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub q: Option<usize>,
    /// `auto` runs every criterion of the regime.
    #[arg(long, value_enum, default_value_t = CriterionArg::Auto)]
    pub criterion: CriterionArg,
    /// Overrides the seed in the model specification.
    #[arg(long, env = "EVPCA_SEED")]
    pub seed: Option<u64>,
    /// Worker threads; the output does not depend on this.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory for `replications.csv` and `summary.json`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScreeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_k)]
    pub k: KSpec,
    /// Output directory for `scaled.csv`, `increments.csv` and `spectrum.csv`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MpArgs {
    /// Aspect ratio c = d/k (c ≠ 1).
    #[arg(long)]
    pub c: f64,
    /// Points at which to evaluate the density and CDF.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// Number of evenly spaced support points used when `--x` is absent.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Probabilities for the quantile table.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Population spikes to forecast through φ_c.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xi: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GapArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub xi: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub c: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionArg {
    Auto,
    Aic,
    Bic,
    AicStar,
    BicStar,
    AicCirc,
    BicCirc,
}

impl CriterionArg {
    /// The AIC/BIC pair the explicit choice belongs to.
    pub fn pair(self) -> Option<(CriterionKind, CriterionKind)> {
        use CriterionKind::*;
        match self {
            CriterionArg::Auto => None,
            CriterionArg::Aic | CriterionArg::Bic => Some((AicFixed, BicFixed)),
            CriterionArg::AicCirc | CriterionArg::BicCirc => Some((AicCirc, BicCirc)),
            CriterionArg::AicStar | CriterionArg::BicStar => Some((AicStar, BicStar)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct KGrid(pub Vec<KSpec>);

/// Parses `76`, `0.03` or `3%`. Fractions must lie in (0, 1).
pub fn parse_k(s: &str) -> Result<KSpec, String> {
    let s = s.trim();
    if let Some(pct) = s.strip_suffix('%') {
        let v: f64 = pct
            .trim()
            .parse()
            .map_err(|_| format!("bad percentage `{s}`"))?;
        return fraction(v / 100.0, s);
    }
    if let Ok(count) = s.parse::<usize>() {
        if count == 0 {
            return Err("k must be positive".into());
        }
        return Ok(KSpec::Count(count));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is neither a count nor a fraction"))?;
    fraction(v, s)
}

fn fraction(v: f64, raw: &str) -> Result<KSpec, String> {
    if v > 0.0 && v < 1.0 {
        Ok(KSpec::Fraction(v))
    } else {
        Err(format!("fraction `{raw}` must lie in (0, 1)"))
    }
}

pub fn parse_k_grid(s: &str) -> Result<KGrid, String> {
    let grid = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_k)
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err("empty k grid".into());
    }
    Ok(KGrid(grid))
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!(
            "delimiter must be a single ASCII character, got `{s}`"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_forms() {
        assert_eq!(parse_k("76").unwrap(), KSpec::Count(76));
        assert_eq!(parse_k("0.03").unwrap(), KSpec::Fraction(0.03));
        assert_eq!(parse_k("3%").unwrap(), KSpec::Fraction(0.03));
        assert!(parse_k("0").is_err());
        assert!(parse_k("1.5").is_err());
        assert!(parse_k("-0.1").is_err());
        assert!(parse_k("abc").is_err());
    }

    #[test]
    fn grid_and_delimiter() {
        let g = parse_k_grid("1%,2%, 76").unwrap();
        assert_eq!(g.0.len(), 3);
        assert!(parse_k_grid(",").is_err());
        assert_eq!(parse_delimiter(";").unwrap(), b';');
        assert_eq!(parse_delimiter("tab").unwrap(), b'\t');
        assert!(parse_delimiter("ab").is_err());
    }

    #[test]
    fn parser_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
