//! Argument structures for all subcommands.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "iovpr", version, about = "Inside-out visual place recognition pipeline")]
pub struct Cli {
    /// Root seed; stage seeds are derived from it by stage-name hashing.
    /// Overrides the config file's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Pipeline config JSON providing defaults for every stage.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cut 2000x4000 equirectangular panoramas into 24 overlapping
    /// 480x640 perspective tiles.
    #[command(name = "pano-cut")]
    PanoCut(PanoCutArgs),
    /// Select panorama representatives so the area is covered about every
    /// `eps` meters (DBSCAN + smallest-id representative per cluster).
    #[command(name = "coverage-select")]
    CoverageSelect(CoverageSelectArgs),
    /// Composite query images with indoor layouts (offline preview of the
    /// training-time augmentation).
    Augment(AugmentArgs),
    /// Mine one round of training triplets under the geo constraints.
    Mine(MineArgs),
    /// Train the embedder with the margin ranking loss.
    Train(TrainArgs),
    /// Offline feature extraction: embed the gallery into a store file.
    Index(IndexArgs),
    /// Recall@K-within-radius evaluation against an embedding store.
    Eval(EvalArgs),
    /// Build a distractor subset of the gallery (positives always kept).
    Subset(SubsetArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum LayoutKindArg {
    Real,
    Gray,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum IndexModeArg {
    Exact,
    Pruned,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct PanoCutArgs {
    /// Directory of `<pano_id>.png` panoramas with `<pano_id>.json`
    /// sidecars ({"lat":..,"lon":..,"year":..}).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output manifest (JSON-Lines).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for tiles.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CoverageSelectArgs {
    /// Tile manifest with pano ids and locations.
    #[arg(long)]
    pub manifest: PathBuf,
    /// DBSCAN neighborhood in meters (strictly-less-than semantics).
    #[arg(long, default_value_t = 5.0)]
    pub eps: f64,
    /// Output file: one selected pano id per line.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    /// Queries manifest; falls back to the config's paths.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Layouts manifest; falls back to the config's paths.
    #[arg(long)]
    pub layouts: Option<PathBuf>,
    /// Output directory; also receives `augmented.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep layouts with window proportion strictly above this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<LayoutKindArg>,
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Queries manifest; falls back to the config's paths.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Gallery manifest; falls back to the config's paths.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    /// Layouts manifest; falls back to the config's paths.
    #[arg(long)]
    pub layouts: Option<PathBuf>,
    /// Embedder params file.
    #[arg(long)]
    pub params: PathBuf,
    /// Output triplets (JSON-Lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<LayoutKindArg>,
    /// Mine on raw queries without layout compositing.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Queries manifest; falls back to the config's paths.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Gallery manifest; falls back to the config's paths.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    /// Layouts manifest; falls back to the config's paths.
    #[arg(long)]
    pub layouts: Option<PathBuf>,
    /// Output params file.
    #[arg(long)]
    pub out_params: PathBuf,
    /// Optional per-epoch CSV report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<LayoutKindArg>,
    /// Train on raw queries without layout compositing.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// Gallery manifest; falls back to the config's paths.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    #[arg(long)]
    pub params: PathBuf,
    /// Output embedding store.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = IndexModeArg::Exact)]
    pub mode: IndexModeArg,
    /// Partition count for pruned mode.
    #[arg(long, default_value_t = 16)]
    pub partitions: usize,
    /// Partitions probed per query in pruned mode.
    #[arg(long, default_value_t = 4)]
    pub probes: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Queries manifest; falls back to the config's paths.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Gallery manifest for ground-truth locations; falls back to the
    /// config's paths.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    /// Embedding store produced by `index`.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    /// Report output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Csv)]
    pub format: ReportFormatArg,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated K values, e.g. "1,5,10,15,20,25".
    #[arg(long)]
    pub k_set: Option<String>,
    /// `real`: embed queries as-is; `gray`: predict a window mask and gray
    /// out everything else before embedding.
    #[arg(long, value_enum, default_value_t = LayoutKindArg::Real)]
    pub layout_kind: LayoutKindArg,
    /// Directory of `<query_id>.png` window masks (required for gray).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Optional rankings dump (JSON-Lines).
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    /// Restrict the gallery to the ids in this file (one per line).
    #[arg(long)]
    pub subset: Option<PathBuf>,
    /// Model label for the report.
    #[arg(long, default_value = "iovpr")]
    pub model: String,
}

#[derive(Args, Debug)]
pub struct SubsetArgs {
    /// Gallery manifest; falls back to the config's paths.
    #[arg(long)]
    pub gallery: Option<PathBuf>,
    /// Queries manifest; falls back to the config's paths.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub size: usize,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Output file: one gallery id per line.
    #[arg(long)]
    pub out: PathBuf,
}
