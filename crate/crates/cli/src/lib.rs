//! The `ndf` command-line tool.
//!
//! Subcommands build datasets (`make-data`), fit models (`train`), and turn
//! learned or analytic distance fields into dense clouds (`extract`),
//! images (`render`), curve values (`regress`) and Chamfer reports (`eval`).
//! Each one is a pure function of its flags and seed.
//!
//! Flags can also come from a JSON file passed with `--config`, keyed by flag
//! name. Failures print `{"error": {"kind": ..., "message": ...}}` on stderr
//! and exit non-zero. `NDF_THREADS` caps the worker count.
//!
//! Flag defaults are the library defaults:
//!
//! ```
//! use clap::Parser;
//! use ndf::extract::ExtractConfig;
//! use ndf::neural::{Arch, TrainConfig};
//! use ndf::trace::{Camera, TraceConfig};
//! use ndf_cli::{Cli, Command};
//!
//! let cli = Cli::parse_from(["ndf", "train"]);
//! let Command::Train(t) = cli.command else { unreachable!() };
//! assert_eq!(t.train_config(), TrainConfig::default());
//! assert_eq!(t.arch(3), Arch::default_for(3));
//! assert_eq!(t.arch(2), Arch::default_for(2));
//!
//! let cli = Cli::parse_from(["ndf", "extract"]);
//! let Command::Extract(e) = cli.command else { unreachable!() };
//! assert_eq!(e.extract_config(), ExtractConfig::default());
//!
//! let cli = Cli::parse_from(["ndf", "render"]);
//! let Command::Render(r) = cli.command else { unreachable!() };
//! assert_eq!(r.trace.trace_config(), TraceConfig::default());
//! assert_eq!(r.camera(None).unwrap(), Camera::default());
//!
//! // and `--help` shows them
//! let help = ndf_cli::help_text(&["train"]);
//! assert!(help.contains(&format!("[default: {}]", TrainConfig::default().epochs)));
//! assert!(help.contains(&format!("[default: {}]", TrainConfig::default().lr)));
//! let help = ndf_cli::help_text(&["render"]);
//! assert!(help.contains(&format!("[default: {}]", TraceConfig::default().eps2)));
//! ```

mod commands;
pub mod config;
pub mod shapes;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ndf::data::{CurveKind, Curve2DSpec, DataError, SamplingPolicy};
use ndf::extract::{ExtractConfig, ExtractError};
use ndf::field::FieldError;
use ndf::geom::GeomError;
use ndf::neural::{Arch, Conditioning, NeuralError, TrainConfig};
use ndf::trace::{Camera, TraceConfig, TraceError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Training samples per surface when `--samples` is not given.
pub const SURFACE_SAMPLES: usize = 100_000;
/// Sparse input size per surface when `--sparse-k` is not given.
pub const SURFACE_SPARSE_K: usize = 300;
/// Ground-truth points drawn from a surface by `eval`.
pub const EVAL_SAMPLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("bad shape `{spec}`: {message}")]
    Shape { spec: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Config(_) => "config",
            Self::Shape { .. } => "shape",
            Self::Io { .. } => "io",
            Self::Geom(_) => "geometry",
            Self::Field(_) => "field",
            Self::Neural(_) => "model",
            Self::Extract(_) => "extract",
            Self::Trace(_) => "trace",
            Self::Data(_) => "data",
        }
    }

    /// 2 for bad invocations, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::Shape { .. } => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "ndf", version, about = "Neural unsigned distance fields")]
pub struct Cli {
    /// JSON file of flag values keyed by flag name; command-line flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample training data from surfaces or the 2D curve families
    MakeData(MakeDataArgs),
    /// Fit a model to a dataset and write a checkpoint
    Train(TrainArgs),
    /// Dense point cloud of a field's zero level set
    Extract(ExtractArgs),
    /// Sphere-trace a 3D field into depth, normal and shaded images
    Render(RenderArgs),
    /// All y with f(x, y) = 0 for each x, as JSON lines
    Regress(RegressArgs),
    /// Chamfer-L2 between a predicted cloud and ground truth
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MakeDataArgs {
    /// Surface to sample, e.g. `sphere:r=0.4` or `mesh:path=chair.obj`; repeat for more shapes
    #[arg(long, value_name = "SPEC")]
    pub shape: Vec<String>,
    /// Curve family for the 2D corpus: linear, parabola, sinusoid, spiral or all
    #[arg(long, value_name = "KIND")]
    pub curves: Option<String>,
    /// Curves per family
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Output dataset directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Points in each shape's sparse input [default: 300 for surfaces, 200 for curves]
    #[arg(long)]
    pub sparse_k: Option<usize>,
    /// Training points per shape [default: 100000 for surfaces, 4096 for curves]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Share of training points drawn near the surface
    #[arg(long, default_value_t = SamplingPolicy::default().surface_fraction)]
    pub surface_fraction: f64,
    /// Noise levels for the near-surface points
    #[arg(long, value_delimiter = ',', default_values_t = SamplingPolicy::default().sigmas)]
    pub sigmas: Vec<f64>,
    /// Share of curves held out for testing
    #[arg(long, default_value_t = Curve2DSpec::new(CurveKind::Linear).test_fraction)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Dataset directory written by make-data
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Metrics JSON [default: <out>.metrics.json]
    #[arg(long, value_name = "FILE")]
    pub metrics: Option<PathBuf>,
    /// Train on shapes of this split
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Clamp distance of the loss and the model output range
    #[arg(long, default_value_t = TrainConfig::default().delta)]
    pub delta: f64,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().beta1)]
    pub beta1: f64,
    #[arg(long, default_value_t = TrainConfig::default().beta2)]
    pub beta2: f64,
    /// Shapes per optimizer step
    #[arg(long, default_value_t = TrainConfig::default().batch_shapes)]
    pub batch_shapes: usize,
    /// Points per shape and step
    #[arg(long, default_value_t = TrainConfig::default().points_per_shape)]
    pub points_per_shape: usize,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    pub seed: u64,
    /// Share of each shape's points held out for validation
    #[arg(long, default_value_t = TrainConfig::default().val_fraction)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = TrainConfig::default().val_every)]
    pub val_every: usize,
    /// Grid resolution per scale, finest first [default: 32,16,8 in 3D; 64,32,16 in 2D]
    #[arg(long, value_delimiter = ',')]
    pub resolutions: Option<Vec<usize>>,
    /// Feature channels per scale
    #[arg(long, default_value_t = Arch::default_for(3).channels)]
    pub channels: usize,
    #[arg(long, default_value_t = Arch::default_for(3).convs_per_scale)]
    pub convs_per_scale: usize,
    /// Hidden layer widths of the decoder
    #[arg(long, value_delimiter = ',', default_values_t = Arch::default_for(3).decoder_hidden)]
    pub decoder_hidden: Vec<usize>,
    /// Feed the query coordinates to the decoder too
    #[arg(long)]
    pub concat_coords: bool,
    /// Learn one free feature grid per shape instead of encoding the input cloud
    #[arg(long)]
    pub auto_decoder: bool,
}

impl TrainArgs {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            delta: self.delta,
            batch_shapes: self.batch_shapes,
            points_per_shape: self.points_per_shape,
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epochs: self.epochs,
            seed: self.seed,
            val_fraction: self.val_fraction,
            val_every: self.val_every,
        }
    }

    /// Architecture for a `dim`-dimensional dataset. Auto-decoder shape
    /// counts are filled in once the data is known.
    pub fn arch(&self, dim: usize) -> Arch {
        let base = Arch::default_for(dim);
        Arch {
            dim,
            resolutions: self.resolutions.clone().unwrap_or(base.resolutions),
            channels: self.channels,
            convs_per_scale: self.convs_per_scale,
            decoder_hidden: self.decoder_hidden.clone(),
            concat_coords: self.concat_coords,
            delta: self.delta,
            conditioning: if self.auto_decoder {
                Conditioning::AutoDecoder { shapes: 0 }
            } else {
                Conditioning::Encoder
            },
        }
    }
}

/// Where the distance field comes from.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FieldArgs {
    /// Trained checkpoint
    #[arg(long, value_name = "FILE", conflicts_with = "analytic")]
    pub ckpt: Option<PathBuf>,
    /// Exact field of a shape spec, e.g. `sphere:r=0.4`, or a mesh/cloud file
    #[arg(long, value_name = "SPEC")]
    pub analytic: Option<String>,
    /// Point cloud the checkpoint is conditioned on (PLY or XYZ)
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Training shape index for auto-decoder checkpoints
    #[arg(long)]
    pub shape_index: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExtractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    /// Output cloud; `.ply` or `.xyz`
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Uniform seeds per round
    #[arg(long, default_value_t = ExtractConfig::default().m)]
    pub m: usize,
    /// Output points drawn around the projected seeds
    #[arg(long, default_value_t = ExtractConfig::default().n)]
    pub n: usize,
    #[arg(long, default_value_t = ExtractConfig::default().num_steps)]
    pub num_steps: usize,
    #[arg(long, default_value_t = ExtractConfig::default().grad_norm_floor)]
    pub grad_norm_floor: f64,
    /// Near-surface threshold
    #[arg(long, default_value_t = ExtractConfig::default().delta)]
    pub delta: f64,
    /// Resampling noise standard deviation [default: delta / 3]
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = ExtractConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = ExtractConfig::default().max_rounds)]
    pub max_rounds: usize,
    #[arg(long, default_value_t = ExtractConfig::default().normal_offset)]
    pub normal_offset: f64,
    /// Also estimate normals
    #[arg(long)]
    pub normals: bool,
}

impl ExtractArgs {
    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            m: self.m,
            n: self.n,
            num_steps: self.num_steps,
            grad_norm_floor: self.grad_norm_floor,
            delta: self.delta,
            sigma: self.sigma,
            seed: self.seed,
            max_rounds: self.max_rounds,
            normal_offset: self.normal_offset,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TraceArgs {
    /// Damping of sphere-tracing steps
    #[arg(long, default_value_t = TraceConfig::default().alpha)]
    pub alpha: f64,
    /// Damping of refinement steps
    #[arg(long, default_value_t = TraceConfig::default().beta)]
    pub beta: f64,
    /// Switch to refinement below this value
    #[arg(long, default_value_t = TraceConfig::default().eps1)]
    pub eps1: f64,
    /// Hit threshold
    #[arg(long, default_value_t = TraceConfig::default().eps2)]
    pub eps2: f64,
    /// Distance before a hit where normals are taken
    #[arg(long, default_value_t = TraceConfig::default().normal_offset)]
    pub normal_offset: f64,
    #[arg(long, default_value_t = TraceConfig::default().max_iters_phase1)]
    pub max_iters_phase1: usize,
    #[arg(long, default_value_t = TraceConfig::default().max_iters_phase2)]
    pub max_iters_phase2: usize,
    /// Upper bound on the ray parameter [default: exit from the unit box]
    #[arg(long)]
    pub lambda_max: Option<f64>,
}

impl TraceArgs {
    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            alpha: self.alpha,
            beta: self.beta,
            eps1: self.eps1,
            eps2: self.eps2,
            normal_offset: self.normal_offset,
            max_iters_phase1: self.max_iters_phase1,
            max_iters_phase2: self.max_iters_phase2,
            lambda_max: self.lambda_max,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RenderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub trace: TraceArgs,
    /// Camera JSON: position, look_at, up, fov_y (radians), width, height
    #[arg(long, value_name = "FILE")]
    pub camera: Option<PathBuf>,
    /// Image width [default: from the camera, 256]
    #[arg(long)]
    pub width: Option<usize>,
    /// Image height [default: from the camera, 256]
    #[arg(long)]
    pub height: Option<usize>,
    /// Output prefix; writes <out>.depth.pgm, .normals.ppm, .shaded.ppm and .stats.json
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
}

impl RenderArgs {
    /// Camera file (or the default camera) with size overrides applied.
    pub fn camera(&self, file: Option<Camera>) -> Result<Camera, CliError> {
        let mut cam = file.unwrap_or_default();
        cam.width = self.width.unwrap_or(cam.width);
        cam.height = self.height.unwrap_or(cam.height);
        cam.validate()?;
        Ok(cam)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RegressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub trace: TraceArgs,
    /// Comma-separated x values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// File of x values separated by whitespace
    #[arg(long, value_name = "FILE")]
    pub x_file: Option<PathBuf>,
    /// Minimum spacing of reported roots [default: 2 eps1]
    #[arg(long)]
    pub root_skip: Option<f64>,
    /// Write the JSON lines here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Predicted cloud (PLY or XYZ)
    #[arg(long, value_name = "FILE")]
    pub pred: Option<PathBuf>,
    /// Ground truth: a shape spec, a mesh file or a cloud file
    #[arg(long, value_name = "SPEC")]
    pub gt: Option<String>,
    /// Points sampled from a ground-truth surface (clouds are used as is)
    #[arg(long, default_value_t = EVAL_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the JSON report here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Rendered `--help` of a subcommand path, e.g. `&["train"]`.
pub fn help_text(path: &[&str]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let mut sub = &mut cmd;
    for name in path {
        sub = sub.find_subcommand_mut(name).expect("known subcommand");
    }
    sub.render_long_help().to_string()
}

fn apply_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NDF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Config(format!("NDF_THREADS must be a positive integer, got `{v}`")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns what
/// should go to stdout.
pub fn run_from<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(e.render().to_string()),
                _ => Err(CliError::Usage(e.render().to_string().trim_end().to_string())),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = cli.config.as_deref().map(config::read_config).transpose()?;
    apply_threads()?;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    let c = config.as_ref();
    match cli.command {
        Command::MakeData(a) => commands::make_data(&merged(a, sub, c)?),
        Command::Train(a) => commands::train(&merged(a, sub, c)?),
        Command::Extract(a) => commands::extract(&merged(a, sub, c)?),
        Command::Render(a) => commands::render(&merged(a, sub, c)?),
        Command::Regress(a) => commands::regress(&merged(a, sub, c)?),
        Command::Eval(a) => commands::eval(&merged(a, sub, c)?),
    }
}

fn merged<T: Serialize + DeserializeOwned>(
    args: T,
    matches: &ArgMatches,
    config: Option<&Map<String, Value>>,
) -> Result<T, CliError> {
    match config {
        Some(c) => config::merge(args, matches, c),
        None => Ok(args),
    }
}

fn require<'a, T: ?Sized>(v: Option<&'a T>, flag: &str) -> Result<&'a T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
