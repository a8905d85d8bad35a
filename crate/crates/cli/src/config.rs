//! Command-line arguments and the plain-text config file.
//!
//! A config file holds one `key = value` per line, where `key` is any long flag
//! of the chosen subcommand without the leading dashes. Blank lines and lines
//! starting with `#` are ignored. A boolean flag is enabled by `key = true`.
//! Flags given on the command line win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trifree::defect::{default_alpha, HighDensityConfig, MarginalEstimator};
use trifree::glauber_low::LowDensityConfig;
use trifree::hardcore::HardcoreConfig;
use trifree::pipeline::PipelineConfig;

/// Overrides the output directory of every subcommand.
pub const OUT_DIR_ENV: &str = "TRIFREE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "trifree",
    version,
    about = "Sample and count triangle-free graphs from G(n,p) conditioned on triangle-freeness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Glauber dynamics samples at low density.
    #[command(args_override_self = true)]
    SampleLow(SampleLowArgs),
    /// Samples from the weak high-density pipeline.
    #[command(args_override_self = true)]
    SampleHigh(SampleHighArgs),
    /// Samples of the defect law for one partition.
    #[command(args_override_self = true)]
    SampleDefects(SampleDefectsArgs),
    /// Approximate `μ_p(triangle-free)`.
    #[command(args_override_self = true)]
    Count(CountArgs),
    /// Empirical total-variation decay or coupling times.
    #[command(args_override_self = true)]
    MixTime(MixTimeArgs),
    /// Cut-alignment traces for the slow-mixing demonstration.
    #[command(args_override_self = true)]
    SlowMix(SlowMixArgs),
    /// Exact values by enumeration.
    #[command(args_override_self = true)]
    Oracle(OracleArgs),
    /// The acceptance suite.
    #[command(args_override_self = true)]
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SampleLow(_) => "sample-low",
            Command::SampleHigh(_) => "sample-high",
            Command::SampleDefects(_) => "sample-defects",
            Command::Count(_) => "count",
            Command::MixTime(_) => "mix-time",
            Command::SlowMix(_) => "slow-mix",
            Command::Oracle(_) => "oracle",
            Command::Selftest(_) => "selftest",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::SampleLow(a) => &a.common,
            Command::SampleHigh(a) => &a.common,
            Command::SampleDefects(a) => &a.common,
            Command::Count(a) => &a.common,
            Command::MixTime(a) => &a.common,
            Command::SlowMix(a) => &a.common,
            Command::Oracle(a) => &a.common,
            Command::Selftest(a) => &a.common,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory, overridden by TRIFREE_OUT_DIR.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Config file of `key = value` lines.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.out.clone(),
        }
    }
}

/// Tunable constants shared by the samplers.
#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct Constants {
    /// `K` in the burn-in `K n² ln(n/ε)`.
    #[arg(long, default_value_t = 6.0)]
    pub burn_in_k: f64,
    /// `c` in the low-density regime `p ≤ c/√n`.
    #[arg(long, default_value_t = 0.7)]
    pub low_c: f64,
    /// `C` in the high-density regime `λ ≥ C/√n`.
    #[arg(long, default_value_t = 1.0)]
    pub regime_c: f64,
    /// `α` in the degree cap `⌊α/λ⌋`; default `1/(96e³)`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Overrides the degree cap.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Truncation order of the cluster series.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, default_value_t = MarginalEstimator::ClusterRatio)]
    pub estimator: MarginalEstimator,
    /// Never replace an uncertified cluster marginal by the MCMC ratio.
    #[arg(long)]
    pub no_fallback: bool,
    /// Hard-core components up to this size are summed exactly.
    #[arg(long, default_value_t = 16)]
    pub exact_limit: usize,
    /// Largest `||A|−|B||`; default `⌊n/10⌋`.
    #[arg(long)]
    pub max_imbalance: Option<usize>,
}

impl Constants {
    pub fn low(&self, n: usize, p: f64) -> LowDensityConfig {
        LowDensityConfig {
            burn_in_k: self.burn_in_k,
            c: self.low_c,
            ..LowDensityConfig::new(n, p)
        }
    }

    pub fn high(&self, n: usize, lambda: f64) -> HighDensityConfig {
        HighDensityConfig {
            alpha: self.alpha.unwrap_or_else(default_alpha),
            cap: self.cap,
            regime_c: self.regime_c,
            burn_in_k: self.burn_in_k,
            order: self.order,
            estimator: self.estimator,
            fallback: !self.no_fallback,
            hardcore: HardcoreConfig {
                exact_component_limit: self.exact_limit,
            },
            ..HighDensityConfig::new(n, lambda)
        }
    }

    pub fn pipeline(&self, n: usize, lambda: f64) -> PipelineConfig {
        PipelineConfig {
            defect: self.high(n, lambda),
            max_imbalance: self.max_imbalance,
        }
    }
}

/// Edge density as `p` or activity `λ = p/(1−p)`.
#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct Density {
    #[arg(long, conflicts_with = "lambda")]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

impl Density {
    pub fn p(&self) -> Result<f64> {
        match (self.p, self.lambda) {
            (Some(p), _) => Ok(p),
            (None, Some(l)) => Ok(l / (1.0 + l)),
            (None, None) => bail!("one of --p or --lambda is required"),
        }
    }

    pub fn lambda(&self) -> Result<f64> {
        match (self.p, self.lambda) {
            (_, Some(l)) => Ok(l),
            (Some(p), None) if p < 1.0 => Ok(p / (1.0 - p)),
            (Some(_), None) => bail!("p must be below 1"),
            (None, None) => bail!("one of --p or --lambda is required"),
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleLowArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub density: Density,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleHighArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub density: Density,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Failure probability of each imbalance-table entry.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Set pairs checked per sample in the expander report.
    #[arg(long, default_value_t = 1000)]
    pub expander_pairs: usize,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleDefectsArgs {
    #[arg(long)]
    pub n: usize,
    /// `|A|`; default `⌈n/2⌉`.
    #[arg(long)]
    pub size_a: Option<usize>,
    #[command(flatten)]
    pub density: Density,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Low,
    High,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CountArgs {
    #[arg(long, value_enum)]
    pub regime: Regime,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub density: Density,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Overall failure probability.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MixTimeArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub density: Density,
    /// Independent chains per grid point (oracle mode) or coupled pairs.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Comma-separated step counts; default a geometric grid up to `2Kn² ln n`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<u64>,
    /// Coupled pairs give up after this many steps.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: u64,
    /// Adjacent pairs per `p` in the contraction sweep; zero skips it.
    #[arg(long, default_value_t = 0)]
    pub contraction_trials: usize,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SlowMixArgs {
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Activity of the demonstration chain; default `5/√n`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Edge probability of the control chain; default `0.3/√n`.
    #[arg(long)]
    pub control_p: Option<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Steps between trace points.
    #[arg(long, default_value_t = 10_000)]
    pub interval: u64,
    #[arg(long, default_value_t = 4_000_000)]
    pub control_steps: u64,
    #[arg(long, default_value_t = 1000)]
    pub control_interval: u64,
    /// Start from the empty graph instead of a pipeline sample.
    #[arg(long)]
    pub empty_start: bool,
    #[arg(long, default_value_t = 1000)]
    pub expander_pairs: usize,
    #[command(flatten)]
    pub constants: Constants,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// `μ_p(triangle-free)`.
    Mu,
    /// Coefficients of `Z(λ) = Σ_{G triangle-free} λ^{|G|}`.
    Z,
    /// The defect law and its normalizer for one partition.
    Nu,
    /// `Σ_{(A,B)} Zʷ_{A,B}` over weakly balanced ordered partitions.
    Weak,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    #[arg(long)]
    pub n: usize,
    /// Edge probability or activity as a decimal or fraction such as `3/20`.
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub size_a: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub cap: usize,
    #[arg(long, default_value_t = 0)]
    pub max_imbalance: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Criterion sizes as specified.
    Full,
    /// Reduced sizes for smoke runs; thresholds are unchanged.
    Quick,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SelftestArgs {
    #[arg(long, value_enum, default_value_t = Scale::Full)]
    pub scale: Scale,
    /// Criteria to run, comma-separated; all when empty.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    #[command(flatten)]
    pub common: Common,
}

/// Reads `key = value` lines into `--key value` arguments.
pub fn config_file_args(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), i + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key == "config" {
            bail!("{}:{}: bad key {key:?}", path.display(), i + 1);
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices the contents of a `--config` file in right after the subcommand
/// so that explicit flags override it.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let extra = config_file_args(Path::new(&path))?;
    let mut out = Vec::with_capacity(args.len() + extra.len());
    let mut iter = args.into_iter();
    out.extend(iter.next());
    out.extend(iter.next());
    out.extend(extra);
    out.extend(iter);
    Ok(out)
}

/// Parses the process arguments, config file included.
pub fn parse_args<I: IntoIterator<Item = String>>(args: I) -> Result<Cli> {
    let args = expand_config(args.into_iter().collect())?;
    Ok(Cli::try_parse_from(args)?)
}
