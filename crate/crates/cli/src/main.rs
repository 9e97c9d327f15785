//! `bayesgeo` command-line runner.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad config or arguments,
//! 3 I/O error.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Bad configuration or arguments detected outside clap.
#[derive(Debug)]
pub struct BadConfig(pub String);

impl std::fmt::Display for BadConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadConfig {}

/// The command ran but its input failed validation.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

#[derive(Parser)]
#[command(name = "bayesgeo", version, about = "Geometry of Bayesian inference in activation bundles")]
struct Cli {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sequential uncertain-label task: corpora and exact posteriors.
    #[command(subcommand)]
    Sula(SulaCmd),
    /// Activation bundle checks.
    #[command(subcommand)]
    Bundle(BundleCmd),
    /// Geometric analyses of one bundle.
    Analyze(AnalyzeArgs),
    /// Entropy-axis estimation.
    #[command(subcommand)]
    Axis(AxisCmd),
    /// Intervention specs.
    #[command(subcommand)]
    Spec(SpecCmd),
    /// Compare a baseline bundle with an intervened one.
    Evaluate(EvaluateArgs),
    /// Summarize a run directory, or diff two.
    Report(ReportArgs),
    /// Synthetic fixtures with planted geometry.
    #[command(subcommand)]
    Synth(SynthCmd),
}

#[derive(Subcommand)]
enum SulaCmd {
    /// Generate a corpus as corpus.jsonl.
    Gen(SulaGenArgs),
    /// Exact posterior for one label sequence.
    Oracle(SulaOracleArgs),
    /// Expected predictive entropy as a function of k.
    Curve(SulaCurveArgs),
}

#[derive(Args, Serialize)]
struct SulaGenArgs {
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    /// Prompts per k for k in {0, 1, 2, 4, 8}.
    #[arg(long, default_value_t = 100, conflicts_with = "counts")]
    per_k: usize,
    /// Explicit counts, e.g. `0:50,3:20`.
    #[arg(long)]
    counts: Option<String>,
    #[arg(long, default_value_t = 0.7)]
    consistency: f64,
    /// main, lexical_remap, shuffled_labels or evidence_ablation.
    #[arg(long, default_value = "main")]
    condition: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory with positive.txt, negative.txt and nonsense.txt.
    #[arg(long)]
    #[serde(skip)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SulaOracleArgs {
    /// Label sequence such as `++-` or `pos,neg`.
    #[arg(long, allow_hyphen_values = true)]
    labels: String,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Serialize)]
struct SulaCurveArgs {
    #[arg(long, default_value_t = 0.7)]
    consistency: f64,
    #[arg(long, default_value = "0,1,2,4,8")]
    k: String,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum BundleCmd {
    /// Check every invariant; exits 1 when any is violated.
    Validate(ValidateArgs),
}

#[derive(Args, Serialize)]
struct ValidateArgs {
    #[serde(skip)]
    bundle: PathBuf,
    /// Also write violations.json here.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Analysis {
    Manifold,
    Keys,
    Attention,
    All,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    analysis: Analysis,
    #[arg(long)]
    #[serde(skip)]
    bundle: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.30)]
    manifold_threshold: f64,
    #[arg(long, default_value_t = 0.20)]
    orthogonality_threshold: f64,
    #[arg(long, default_value_t = 0.50)]
    orthogonality_layer_fraction: f64,
    #[arg(long, default_value_t = 0.30)]
    focusing_threshold: f64,
}

#[derive(Subcommand)]
enum AxisCmd {
    /// Estimate one entropy axis per layer on a seeded estimation split.
    Estimate(AxisEstimateArgs),
}

#[derive(Args, Serialize)]
struct AxisEstimateArgs {
    #[arg(long)]
    #[serde(skip)]
    bundle: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    /// `all` or a comma-separated list.
    #[arg(long, default_value = "all")]
    layers: String,
    #[arg(long, default_value_t = 200)]
    n_estimation: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum SpecCmd {
    /// Write intervention_spec.json and axes.bin.
    Build(SpecBuildArgs),
    /// Apply a spec to a bundle offline.
    Apply(SpecApplyArgs),
}

#[derive(Args, Serialize)]
struct SpecBuildArgs {
    #[arg(long)]
    #[serde(skip)]
    bundle: PathBuf,
    /// Axis file, or the directory written by `axis estimate`.
    #[arg(long)]
    #[serde(skip)]
    axes: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long, default_value = "8,12,16,20,23")]
    layers: String,
    /// cut, only or shift.
    #[arg(long, default_value = "cut")]
    mode: String,
    /// true or random.
    #[arg(long, default_value = "true")]
    axis_source: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    shift_sigmas: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct SpecApplyArgs {
    #[arg(long)]
    #[serde(skip)]
    bundle: PathBuf,
    /// Spec file, or the directory holding it.
    #[arg(long)]
    #[serde(skip)]
    spec: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    baseline: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    intervened: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    spec: PathBuf,
    /// Reference (true) axes from `axis estimate`.
    #[arg(long)]
    #[serde(skip)]
    axes: PathBuf,
    /// SULA corpus for behavioral metrics.
    #[arg(long)]
    #[serde(skip)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    /// Run directory to summarize.
    #[arg(long, required_unless_present = "diff")]
    #[serde(skip)]
    run: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Compare two run directories; exits 1 when they differ.
    #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"], conflicts_with = "run")]
    #[serde(skip)]
    diff: Option<Vec<PathBuf>>,
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Bundle with planted manifold, key orthogonality and attention focusing.
    Fixture(SynthFixtureArgs),
    /// Simulated model answering a SULA corpus.
    Simulate(SynthSimulateArgs),
}

#[derive(Args, Serialize)]
struct SynthFixtureArgs {
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    /// JSON fixture config; missing keys take defaults.
    #[arg(long)]
    #[serde(skip)]
    fixture_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_prompts: Option<usize>,
    #[arg(long)]
    alignment: Option<f64>,
}

#[derive(Args, Serialize)]
struct SynthSimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    corpus: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    fixture_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    fidelity: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alignment: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use bayesgeo::Error as E;
    for cause in err.chain() {
        if cause.is::<ValidationFailed>() {
            return 1;
        }
        if cause.is::<BadConfig>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } => 3,
                E::Checksum { .. }
                | E::Version { .. }
                | E::Format(_)
                | E::Invariant(_)
                | E::Degenerate(_)
                | E::Shape(_)
                | E::Json(_) => 1,
                E::InvalidInput(_) | E::Misaligned(_) | E::Leak(_) | E::Vocabulary(_) | E::Unknown { .. } => 2,
            };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
        if cause.is::<serde_json::Error>() {
            return 1;
        }
    }
    2
}

fn run(argv: Vec<OsString>) -> anyhow::Result<()> {
    let argv = config::merge(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(BadConfig(e.render().to_string()).into());
        }
    };
    commands::dispatch(cli.cmd)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(b) = e.downcast_ref::<BadConfig>() {
                eprintln!("{b}");
            } else {
                // bayesgeo errors embed their source in the message; skip repeats
                let mut msg = String::from("error");
                let mut last = String::new();
                for cause in e.chain() {
                    let c = cause.to_string();
                    if !last.ends_with(&c) {
                        msg.push_str(": ");
                        msg.push_str(&c);
                    }
                    last = c;
                }
                eprintln!("{msg}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let io: anyhow::Error = bayesgeo::Error::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        }
        .into();
        assert_eq!(exit_code(&io), 3);
        let leak: anyhow::Error = bayesgeo::Error::Leak("x".into()).into();
        assert_eq!(exit_code(&leak), 2);
        let crc: anyhow::Error = bayesgeo::Error::Checksum {
            file: "v".into(),
            offset: 0,
            stored: 1,
            computed: 2,
        }
        .into();
        assert_eq!(exit_code(&crc.context("loading")), 1);
        assert_eq!(exit_code(&anyhow::Error::new(ValidationFailed("v".into()))), 1);
        assert_eq!(exit_code(&anyhow::Error::new(BadConfig("c".into()))), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
