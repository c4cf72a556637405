mod commands;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latent_debias::store::{BiasType, LanguageId, SpaceTag};

/// Cross-lingual latent-space debiasing pipeline.
#[derive(Parser, Debug)]
#[command(name = "latent-debias", version, propagate_version = true)]
pub struct Cli {
    /// Print machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate embedding, pair, score, debias and attribute files and add them to a workspace.
    Ingest(IngestArgs),
    /// Train the shared-encoder autoencoder on the workspace's parallel train/dev sets.
    TrainAe(TrainArgs),
    /// Fit a SentDebias bias subspace from the workspace's counterfactual groups.
    FitSentdebias(FitSentDebiasArgs),
    /// Fit an INLP nullspace projection from the workspace's labelled rows.
    FitInlp(FitInlpArgs),
    /// Write a fitted transform as a self-contained XLTF file.
    ExportTransform(ExportArgs),
    /// Score preference records and print the bias table.
    Evaluate(EvaluateArgs),
    /// Cross-lingual alignment metrics and 2-D PCA coordinates.
    Diagnose(DiagnoseArgs),
    /// Generate a synthetic workspace or score fixture.
    Synthetic(SyntheticArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, short = 'w')]
    pub workspace: PathBuf,
    /// XLEB embedding files; language and split come from the file header.
    #[arg(long = "embeddings", value_name = "FILE")]
    pub embeddings: Vec<PathBuf>,
    /// Pair manifest TSV (`lang_a lang_b id_a id_b`); ids align by equality when absent.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Preference-record TSVs.
    #[arg(long = "scores", value_name = "FILE")]
    pub scores: Vec<PathBuf>,
    /// Debias data as `LANG:TYPE:EMBEDDINGS.xleb:ANNOTATIONS.tsv`.
    #[arg(long = "debias", value_name = "SPEC")]
    pub debias: Vec<String>,
    /// Attribute lists as `LANG:TYPE:LIST.txt[:PAIRING.tsv]`.
    #[arg(long = "attributes", value_name = "SPEC")]
    pub attributes: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, short = 'w')]
    pub workspace: PathBuf,
    /// Comma-separated languages; all workspace languages when omitted.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    #[arg(long, default_value_t = latent_debias::autoencoder::DEFAULT_LATENT_DIM)]
    pub latent: usize,
    /// Hidden widths of the encoder; decoders mirror them.
    #[arg(long, value_delimiter = ',', default_values_t = latent_debias::autoencoder::DEFAULT_HIDDEN_DIMS.to_vec())]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f32,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SpaceArg {
    Original,
    Latent,
}

impl From<SpaceArg> for SpaceTag {
    fn from(s: SpaceArg) -> SpaceTag {
        match s {
            SpaceArg::Original => SpaceTag::Original,
            SpaceArg::Latent => SpaceTag::Latent,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitCommon {
    #[arg(long, short = 'w')]
    pub workspace: PathBuf,
    #[arg(long, value_enum)]
    pub space: SpaceArg,
    #[arg(long, value_parser = parse_bias)]
    pub bias_type: BiasType,
    #[arg(long, value_parser = parse_lang)]
    pub lang: LanguageId,
    /// Name under which the transform is stored; defaults to `technique-space-lang-type`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug)]
pub struct FitSentDebiasArgs {
    #[command(flatten)]
    pub common: FitCommon,
    #[arg(long, default_value_t = latent_debias::sentdebias::DEFAULT_K)]
    pub k: usize,
}

#[derive(Args, Debug)]
pub struct FitInlpArgs {
    #[command(flatten)]
    pub common: FitCommon,
    #[arg(long, default_value_t = latent_debias::inlp::DEFAULT_ITERATIONS)]
    pub iters: usize,
    /// Stop once held-out probe accuracy is within this of the majority rate.
    #[arg(long, default_value_t = latent_debias::inlp::DEFAULT_STOP_MARGIN)]
    pub margin: f64,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long, short = 'w')]
    pub workspace: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Score TSVs; the workspace's ingested scores are used when none are given.
    #[arg(long = "scores", value_name = "FILE", num_args = 1..)]
    pub scores: Vec<PathBuf>,
    #[arg(long, short = 'w')]
    pub workspace: Option<PathBuf>,
    #[arg(long, default_value_t = latent_debias::evaluation::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Debiasing language whose columns the table shows.
    #[arg(long, value_parser = parse_lang, default_value = "en")]
    pub debias_lang: LanguageId,
    /// Directory for `report.json` and `plot.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// XLEB files, one per language; the workspace dev sets when omitted.
    #[arg(long = "sets", value_name = "FILE", num_args = 1..)]
    pub sets: Vec<PathBuf>,
    #[arg(long, short = 'w')]
    pub workspace: Option<PathBuf>,
    /// Pair manifest; ids align by equality when absent.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Measure in the latent space of this checkpoint (or the workspace model with --latent).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub latent: bool,
    /// Write the 2-D PCA coordinates here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// Parallel sets under large per-language affine offsets.
    OffsetLangs,
    /// offset-langs plus counterfactual debias pairs carrying a planted attribute.
    PlantedBias,
    /// Score records reproducing the published English-debiasing table.
    ReferenceTable,
}

#[derive(Args, Debug)]
pub struct SyntheticArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub train: usize,
    #[arg(long, default_value_t = 100)]
    pub dev: usize,
    /// Counterfactual pairs per language (planted-bias).
    #[arg(long, default_value_t = 200)]
    pub debias_pairs: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub semantic_dim: usize,
}

fn parse_lang(s: &str) -> Result<LanguageId, String> {
    LanguageId::new(s).map_err(|e| e.to_string())
}

fn parse_bias(s: &str) -> Result<BiasType, String> {
    s.parse().map_err(|e: latent_debias::Error| e.to_string())
}

const EXIT_DATA: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_USAGE: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<latent_debias::Error>() {
            return match e {
                latent_debias::Error::Divergence { .. } => EXIT_DIVERGENCE,
                latent_debias::Error::Parameter(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn configure_threads() {
    if let Ok(v) = std::env::var("LATENT_DEBIAS_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring LATENT_DEBIAS_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
