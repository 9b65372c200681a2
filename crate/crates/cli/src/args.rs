use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decurtain_core::io::SliceSelection;
use decurtain_core::Dims;

#[derive(Parser, Debug)]
#[command(name = "decurtain", version, about = "Curtaining and stripe removal for 3D tomography volumes")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DECURTAIN_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Split a volume into clean image, stripes and laminar part (IC / ICREV).
    Decurtain(DecurtainArgs),
    /// Median prefilter plus variational destriping (M1 baseline).
    DestripeM1(DestripeArgs),
    /// Generate a synthetic phantom.
    Phantom(PhantomArgs),
    /// Run IC, ICREV and M1 on one corrupted volume and tabulate errors.
    Compare(CompareArgs),
    /// PSNR, MSE and SSIM of a volume against a reference.
    Metrics(MetricsArgs),
    /// Write 16-bit PNG slices of a volume.
    ExportSlices(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ic,
    Icrev,
}

/// Parameter presets (`fib`, `modis`) and phantom presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Fib,
    Modis,
    HardEdge,
    SmoothLaminar,
}

impl PresetArg {
    pub fn phantom_name(self) -> Option<&'static str> {
        match self {
            PresetArg::HardEdge => Some("hard-edge"),
            PresetArg::SmoothLaminar => Some("smooth-laminar"),
            _ => None,
        }
    }
}

/// Where the input volume comes from.
#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Input volume (NPY, or raw float with a JSON sidecar).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Phantom spec JSON used instead of --input.
    #[arg(long, conflicts_with = "input")]
    pub spec: Option<PathBuf>,
    /// Phantom seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phantom size override: N or NXxNYxNZ.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    /// Clean reference volume for metrics.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Stopping {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Maximum iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Relative primal change below which the iteration stops.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct Outputs {
    /// Prefix for written files, e.g. `out/run1`.
    #[arg(long)]
    pub output_prefix: Option<PathBuf>,
    /// Slice export as PLANE:I[,I...]; repeatable.
    #[arg(long, value_parser = parse_slices)]
    pub slices: Vec<SliceSelection>,
    /// JSON report path (default: <output-prefix>_report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecurtainArgs {
    #[command(flatten)]
    pub source: Source,
    /// fib / modis select weights; hard-edge / smooth-laminar also generate the input.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, value_enum, default_value = "ic")]
    pub model: ModelArg,
    #[arg(long)]
    pub mu1: Option<f64>,
    #[arg(long)]
    pub mu2: Option<f64>,
    #[arg(long)]
    pub mu3: Option<f64>,
    #[command(flatten)]
    pub stopping: Stopping,
    #[command(flatten)]
    pub outputs: Outputs,
}

#[derive(Args, Debug)]
pub struct DestripeArgs {
    #[command(flatten)]
    pub source: Source,
    /// Phantom preset used as input.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long, default_value_t = 0.9)]
    pub nu1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub nu2: f64,
    /// Odd median filter length along z (1 disables the prefilter).
    #[arg(long, default_value_t = decurtain_core::pipeline::DEFAULT_MEDIAN_LEN)]
    pub median_len: usize,
    #[command(flatten)]
    pub stopping: Stopping,
    #[command(flatten)]
    pub outputs: Outputs,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[command(flatten)]
    pub outputs: Outputs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Phantom preset to generate and compare on.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Phantom spec JSON.
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Corrupted volume; requires --reference.
    #[arg(long, requires = "reference", conflicts_with_all = ["preset", "spec"])]
    pub input: Option<PathBuf>,
    /// Clean volume.
    #[arg(long, requires = "input")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub median_len: Option<usize>,
    /// Writes `<prefix>_table.csv` next to the JSON report.
    #[arg(long)]
    pub output_prefix: Option<PathBuf>,
    /// JSON table path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_slices, required = true)]
    pub slices: Vec<SliceSelection>,
    #[arg(long)]
    pub output_prefix: PathBuf,
}

pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("invalid size {p:?}")))
        .collect::<Result<_, _>>()?;
    let dims = match parts.as_slice() {
        [n] => Dims::cube(*n),
        [nx, ny, nz] => Dims::new(*nx, *ny, *nz),
        _ => return Err(format!("expected N or NXxNYxNZ, got {s:?}")),
    };
    dims.map_err(|e| e.to_string())
}

fn parse_slices(s: &str) -> Result<SliceSelection, String> {
    s.parse()
}
