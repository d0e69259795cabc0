//! Command-line front end. Stages exchange files: `synth` writes descriptors, `partition`
//! a pair partition, `fit` a model, `project` embedded descriptors, `eval` a JSON report,
//! and `plot` an SVG of a report.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or numerical errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Result;
use crate::evaluation::{self, Balance, EvalReport, DEFAULT_BINS, DEFAULT_MATCHES};
use crate::io::{self, DescriptorFormat};
use crate::pairing::{self, PairPartition, PartitionConfig, DEFAULT_K};
use crate::plot;
use crate::scatter::BetaWeights;
use crate::solver::{self, Preset, SolverConfig, SolverMode};
use crate::solver::{DEFAULT_EPSILON_SCALE, DEFAULT_MAX_ITERS, DEFAULT_RATIO, DEFAULT_TOL};
use crate::synthesis::{self, Scenario, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rde", version, about = "Learn and evaluate linear embeddings of local descriptors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic descriptor set.
    Synth(SynthArgs),
    /// Split matching and non-matching pairs into near and far subsets.
    Partition(PartitionArgs),
    /// Learn a projection from a descriptor set and its partition.
    Fit(FitArgs),
    /// Map descriptors through a fitted model.
    Project(ProjectArgs),
    /// Measure per-subset distance overlaps, optionally with closest-pair matching.
    Eval(EvalArgs),
    /// Render an evaluation report as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    DiagonalIntra,
    BoundaryShape,
    GaussianGroups,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::DiagonalIntra => Scenario::DiagonalIntra,
            ScenarioArg::BoundaryShape => Scenario::BoundaryShape,
            ScenarioArg::GaussianGroups => Scenario::GaussianGroups,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Output path; `.bin` or `.rde` selects the binary format, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_per_group: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long)]
    pub n_groups: Option<usize>,
    #[arg(long)]
    pub between_spread: Option<f64>,
    #[arg(long)]
    pub within_spread: Option<f64>,
    #[arg(long)]
    pub nuisance_dims: Option<usize>,
    #[arg(long)]
    pub nuisance_spread: Option<f64>,
    /// Clusters per class for diagonal-intra.
    #[arg(long)]
    pub clusters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Descriptor set (CSV or binary, detected from content).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Per-point cap on sampled non-matching partners (all pairs when absent).
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Lde,
    Lfda,
    Rde,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    RatioTrace,
    TraceRatio,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, conflicts_with = "betas")]
    pub preset: Option<PresetArg>,
    /// Explicit weights `rn,rf,in,if`.
    #[arg(long, value_parser = parse_betas)]
    pub betas: Option<BetaWeights>,
    /// Weight ratio used by the presets.
    #[arg(long, default_value_t = DEFAULT_RATIO)]
    pub ratio: f64,
    /// Embedding dimension (defaults to the input dimension).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum, default_value = "ratio-trace")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_EPSILON_SCALE)]
    pub epsilon_scale: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Fold near and far subsets together before fitting.
    #[arg(long)]
    pub merge_near_far: bool,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    /// Fitted model; the identity embedding when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// `off`, `auto`, or a per-subset sample size.
    #[arg(long, default_value = "auto", value_parser = parse_balance)]
    pub balance: Balance,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Second descriptor set for closest cross-pair matching against `--in`.
    #[arg(long)]
    pub match_with: Option<PathBuf>,
    /// Number of closest cross pairs to report.
    #[arg(long, default_value_t = DEFAULT_MATCHES)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Evaluation report (JSON).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "Distance distribution per subset")]
    pub title: String,
}

fn parse_betas(s: &str) -> std::result::Result<BetaWeights, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected four comma-separated weights rn,rf,in,if, got {s:?}"));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("invalid weight {p:?}: {e}"))?;
    }
    BetaWeights::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_balance(s: &str) -> std::result::Result<Balance, String> {
    match s {
        "off" => Ok(Balance::Off),
        "auto" => Ok(Balance::Auto),
        n => match n.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("balance must be off, auto, or a positive size, got {s:?}")),
            Ok(n) => Ok(Balance::PerSubset(n)),
        },
    }
}

/// Parses `argv` (program name first) and runs the selected stage.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Partition(a) => partition(a),
        Command::Fit(a) => fit(a),
        Command::Project(a) => project(a),
        Command::Eval(a) => eval(a),
        Command::Plot(a) => plot_report(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = ScenarioSpec::default_for(a.scenario.into(), a.seed);
    macro_rules! set {
        ($($field:ident <- $arg:expr),* $(,)?) => {
            $(if let Some(v) = $arg { spec.$field = v; })*
        };
    }
    set!(
        n_per_group <- a.n_per_group,
        dim <- a.dim,
        noise_scale <- a.noise_scale,
        n_groups <- a.n_groups,
        between_spread <- a.between_spread,
        within_spread <- a.within_spread,
        nuisance_dims <- a.nuisance_dims,
        nuisance_spread <- a.nuisance_spread,
        clusters_per_class <- a.clusters,
    );
    let set = synthesis::generate(&spec)?;
    io::save_descriptors(&set, &a.out, DescriptorFormat::from_path(&a.out))
}

fn partition(a: PartitionArgs) -> Result<()> {
    let set = io::load_descriptors_auto(&a.input)?;
    let config = PartitionConfig {
        k: a.k,
        max_irrelevant_per_point: a.cap,
        seed: a.seed,
    };
    pairing::build_partition(&set, &config)?.save(&a.out)
}

fn fit(a: FitArgs) -> Result<()> {
    let set = io::load_descriptors_auto(&a.input)?;
    let mut part = PairPartition::load(&a.partition)?;
    part.validate(&set)?;
    if a.merge_near_far {
        part = part.merge_near_far();
    }
    let betas = match (a.betas, a.preset) {
        (Some(b), _) => b,
        (None, Some(PresetArg::Lde)) => Preset::Lde.betas(a.ratio)?,
        (None, Some(PresetArg::Lfda)) => Preset::LfdaLike.betas(a.ratio)?,
        (None, Some(PresetArg::Rde)) | (None, None) => Preset::Rde.betas(a.ratio)?,
    };
    let config = SolverConfig {
        mode: match a.mode {
            ModeArg::RatioTrace => SolverMode::RatioTrace,
            ModeArg::TraceRatio => SolverMode::TraceRatio,
        },
        output_dim: a.dim,
        epsilon_scale: a.epsilon_scale,
        max_iters: a.max_iters,
        tol: a.tol,
    };
    let model = solver::fit(&set, &part, &betas, &config)?;
    io::save_model(&model, &a.out)
}

fn project(a: ProjectArgs) -> Result<()> {
    let set = io::load_descriptors_auto(&a.input)?;
    let model = io::load_model(&a.model)?;
    let out = solver::project(&model, &set)?;
    io::save_descriptors(&out, &a.out, DescriptorFormat::from_path(&a.out))
}

fn eval(a: EvalArgs) -> Result<()> {
    let set = io::load_descriptors_auto(&a.input)?;
    let part = PairPartition::load(&a.partition)?;
    part.validate(&set)?;
    let model = a.model.as_ref().map(io::load_model).transpose()?;
    let mut report = evaluation::eval_report(&set, &part, model.as_ref(), a.bins, a.balance, a.seed)?;
    if let Some(path) = &a.match_with {
        let other = io::load_descriptors_auto(path)?;
        report.matching = Some(evaluation::closest_cross_pairs(
            &set,
            &other,
            model.as_ref().map(|m| &m.projection),
            a.m,
        )?);
    }
    report.save(&a.out)
}

fn plot_report(a: PlotArgs) -> Result<()> {
    let report = EvalReport::load(&a.input)?;
    plot::save_svg(&report, &a.title, &a.out)
}
