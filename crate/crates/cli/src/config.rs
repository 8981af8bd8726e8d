//! Run configuration: an optional JSON file overridden by command-line flags.

use std::path::{Path, PathBuf};

use corrdecay::analyze::AnalyzeOptions;
use corrdecay::exact::{ExactOptions, Method};
use corrdecay::green::CouplingMatrices;
use corrdecay::kspace::{GridEstimator, PolTag};
use corrdecay::lattice::{LatticeSpec, DEFAULT_SEED};
use corrdecay::rydberg::CollectiveMode;
use corrdecay::scaling::{DisorderPlan, Quantity, Spacing};
use corrdecay::sdp::{SdpOptions, SolverTag};
use corrdecay::{Error, Result};
use serde::{Deserialize, Serialize};

/// JSON emitted for reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Pretty,
}

/// Contents of a `--config` file. Every field is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output_format: Option<OutputFormat>,
    pub out_dir: Option<PathBuf>,
    pub lattice: Option<LatticeConfig>,
    pub source: Option<SourceConfig>,
    pub sdp: Option<SdpConfig>,
    pub exact: Option<ExactConfig>,
    pub scan: Option<ScanConfig>,
    pub kspace: Option<KSpaceConfig>,
    pub rydberg: Option<RydbergConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dimension: Option<u8>,
    pub n_per_axis: Option<usize>,
    pub spacing: Option<f64>,
    pub polarization: Option<PolInput>,
    pub disorder_eta: Option<f64>,
}

/// A polarization given as a name (`x`, `parallel`, ...) or as three components.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolInput {
    Name(String),
    Vector([f64; 3]),
}

impl PolInput {
    pub fn parse_flag(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() == 3 {
            let mut v = [0.0; 3];
            for (slot, p) in v.iter_mut().zip(parts) {
                *slot = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad polarization component {p:?}")))?;
            }
            return Ok(PolInput::Vector(v));
        }
        Ok(PolInput::Name(s.to_owned()))
    }

    pub fn tag(&self) -> Option<PolTag> {
        match self {
            PolInput::Name(n) if n == "parallel" => Some(PolTag::Parallel),
            PolInput::Name(n) if n == "perpendicular" => Some(PolTag::Perpendicular),
            _ => None,
        }
    }

    /// Unit vector for a lattice of the given dimension.
    pub fn vector(&self, dimension: u8) -> Result<[f64; 3]> {
        if let Some(tag) = self.tag() {
            return Ok(tag.vector(dimension));
        }
        let v = match self {
            PolInput::Name(n) => match n.as_str() {
                "x" => [1.0, 0.0, 0.0],
                "y" => [0.0, 1.0, 0.0],
                "z" => [0.0, 0.0, 1.0],
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown polarization {other:?}; use x, y, z, parallel, perpendicular or a,b,c"
                    )))
                }
            },
            PolInput::Vector(v) => *v,
        };
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput("polarization must be a nonzero vector".into()));
        }
        Ok(v.map(|c| c / norm))
    }

    fn required_tag(&self) -> Result<PolTag> {
        self.tag()
            .ok_or_else(|| Error::InvalidInput("this command takes polarization parallel or perpendicular".into()))
    }
}

/// Where a decay matrix comes from when no lattice is given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SourceConfig {
    Dicke(usize),
    Independent(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpConfig {
    pub solver: Option<SolverName>,
    pub rank: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub rank_escape: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Lowrank,
    Projection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub max_n: Option<usize>,
    pub dense_max_dim: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub force_lanczos: Option<bool>,
    pub haar_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub dimension: Option<u8>,
    pub spacing: Option<f64>,
    pub polarization: Option<PolInput>,
    pub n_values: Option<Vec<usize>>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub points: Option<usize>,
    pub point_spacing: Option<Spacing>,
    pub quantity: Option<Quantity>,
    pub disorder: Option<DisorderPlan>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSpaceConfig {
    pub dimension: Option<u8>,
    pub spacing: Option<f64>,
    pub polarization: Option<PolInput>,
    pub n_per_axis: Option<usize>,
    pub estimator: Option<GridEstimator>,
    pub reg_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RydbergConfig {
    pub table: Option<PathBuf>,
    pub n_atoms: Option<usize>,
    pub spacing_um: Option<f64>,
    pub c6_ghz_um6: Option<f64>,
    pub rabi_mhz: Option<f64>,
    pub dominant: Option<String>,
    pub collective: Option<CollectiveMode>,
    pub gamma_ind_2pi_hz: Option<f64>,
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to CORRDECAY_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub output_format: Option<OutputFormat>,
}

/// Settings common to every run after merging.
#[derive(Debug, Clone, Serialize)]
pub struct Common {
    pub seed: u64,
    pub threads: Option<usize>,
    pub output_format: OutputFormat,
    pub out_dir: PathBuf,
}

pub fn resolve_common(args: &GlobalArgs, file: &FileConfig) -> Result<Common> {
    let env_threads = match std::env::var("CORRDECAY_THREADS") {
        Ok(s) if !s.trim().is_empty() => Some(
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("CORRDECAY_THREADS={s:?} is not a count")))?,
        ),
        _ => None,
    };
    let threads = args.threads.or(file.threads).or(env_threads);
    if threads == Some(0) {
        return Err(Error::InvalidInput("thread count must be positive".into()));
    }
    Ok(Common {
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads,
        output_format: args.output_format.or(file.output_format).unwrap_or_default(),
        out_dir: args
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
    })
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct LatticeArgs {
    /// Lattice dimension (1, 2 or 3).
    #[arg(long)]
    pub dim: Option<u8>,
    /// Emitters per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Lattice constant in wavelengths.
    #[arg(long)]
    pub d: Option<f64>,
    /// Dipole orientation: x, y, z, parallel, perpendicular or a,b,c.
    #[arg(long)]
    pub pol: Option<String>,
    /// Position disorder as a fraction of the lattice constant.
    #[arg(long)]
    pub eta: Option<f64>,
}

impl LatticeArgs {
    fn any(&self) -> bool {
        self.dim.is_some() || self.n.is_some() || self.d.is_some() || self.pol.is_some() || self.eta.is_some()
    }
}

fn missing(what: &str) -> Error {
    Error::InvalidInput(format!("missing required setting: {what}"))
}

pub fn resolve_lattice(args: &LatticeArgs, file: Option<&LatticeConfig>, seed: u64) -> Result<LatticeSpec> {
    let empty = LatticeConfig::default();
    let file = file.unwrap_or(&empty);
    let dimension = args.dim.or(file.dimension).ok_or_else(|| missing("lattice dimension (--dim)"))?;
    let n = args.n.or(file.n_per_axis).ok_or_else(|| missing("emitters per axis (--n)"))?;
    let d = args.d.or(file.spacing).ok_or_else(|| missing("lattice constant (--d)"))?;
    let pol = match &args.pol {
        Some(s) => PolInput::parse_flag(s)?,
        None => file.polarization.clone().ok_or_else(|| missing("polarization (--pol)"))?,
    };
    let mut spec = LatticeSpec::new(dimension, n, d, pol.vector(dimension.clamp(1, 3))?);
    spec.disorder_eta = args.eta.or(file.disorder_eta).unwrap_or(0.0);
    spec.seed = seed;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SourceArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Read the decay matrix from a CSV or binary (.bin) file.
    #[arg(long, conflicts_with_all = ["dicke", "independent"])]
    pub input: Option<PathBuf>,
    /// Use the all-to-all surrogate with this many emitters.
    #[arg(long, conflicts_with = "independent")]
    pub dicke: Option<usize>,
    /// Use independent emitters.
    #[arg(long)]
    pub independent: Option<usize>,
}

/// Resolved origin of a decay matrix.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Lattice(LatticeSpec),
    Dicke(usize),
    Independent(usize),
    File(PathBuf),
}

pub fn resolve_source(args: &SourceArgs, file: &FileConfig, seed: u64) -> Result<Source> {
    if let Some(p) = &args.input {
        return Ok(Source::File(p.clone()));
    }
    if let Some(n) = args.dicke {
        return Ok(Source::Dicke(n));
    }
    if let Some(n) = args.independent {
        return Ok(Source::Independent(n));
    }
    if !args.lattice.any() {
        match &file.source {
            Some(SourceConfig::Dicke(n)) => return Ok(Source::Dicke(*n)),
            Some(SourceConfig::Independent(n)) => return Ok(Source::Independent(*n)),
            Some(SourceConfig::File(p)) => return Ok(Source::File(p.clone())),
            None => {}
        }
    }
    Ok(Source::Lattice(resolve_lattice(&args.lattice, file.lattice.as_ref(), seed)?))
}

impl Source {
    pub fn load(&self) -> Result<(CouplingMatrices, Option<LatticeSpec>)> {
        match self {
            Source::Lattice(spec) => {
                let array = corrdecay::lattice::build_array(spec)?;
                let mats = corrdecay::green::build_coupling_matrices(&array, &spec.polarization)?;
                Ok((mats, Some(spec.clone())))
            }
            Source::Dicke(n) | Source::Independent(n) => {
                if *n == 0 {
                    return Err(Error::InvalidInput("need at least one emitter".into()));
                }
                let m = if matches!(self, Source::Dicke(_)) {
                    CouplingMatrices::dicke(*n)
                } else {
                    CouplingMatrices::independent(*n)
                };
                Ok((m, None))
            }
            Source::File(p) => {
                let f = std::fs::File::open(p)
                    .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", p.display())))?;
                let reader = std::io::BufReader::new(f);
                let m = if p.extension().is_some_and(|e| e == "bin") {
                    CouplingMatrices::read_binary(reader)?
                } else {
                    CouplingMatrices::read_csv(reader)?
                };
                Ok((m, None))
            }
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SdpArgs {
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    /// Factor rank of the low-rank solver.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

/// Resolved solver settings.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSettings {
    pub solver: SolverTag,
    pub rank: Option<usize>,
    pub tol: f64,
    pub max_iters: usize,
    pub rank_escape: bool,
    pub seed: u64,
}

impl SdpSettings {
    pub fn options(&self) -> SdpOptions {
        SdpOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            rank: self.rank,
            rank_escape: self.rank_escape,
            gamma0: 1.0,
        }
    }
}

pub fn resolve_sdp(args: &SdpArgs, file: Option<&SdpConfig>, seed: u64) -> Result<SdpSettings> {
    let empty = SdpConfig::default();
    let file = file.unwrap_or(&empty);
    let def = SdpOptions::default();
    let solver = match args.solver.or(file.solver).unwrap_or(SolverName::Lowrank) {
        SolverName::Lowrank => SolverTag::Lowrank,
        SolverName::Projection => SolverTag::Projection,
    };
    let s = SdpSettings {
        solver,
        rank: args.rank.or(file.rank),
        tol: args.tol.or(file.tol).unwrap_or(def.tol),
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(def.max_iters),
        rank_escape: file.rank_escape.unwrap_or(def.rank_escape),
        seed,
    };
    if !(s.tol.is_finite() && s.tol > 0.0) || s.max_iters == 0 || s.rank == Some(0) {
        return Err(Error::InvalidInput("solver tolerance, iterations and rank must be positive".into()));
    }
    Ok(s)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ExactArgs {
    /// Largest emitter count for exact diagonalization.
    #[arg(long)]
    pub exact_max_n: Option<usize>,
    /// Use Lanczos for every sector.
    #[arg(long)]
    pub force_lanczos: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactSettings {
    pub max_n: usize,
    pub dense_max_dim: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub force_lanczos: bool,
    pub seed: u64,
}

impl ExactSettings {
    pub fn options(&self) -> ExactOptions {
        ExactOptions {
            dense_max_dim: self.dense_max_dim,
            lanczos_tol: self.tol,
            lanczos_max_iters: self.max_iters,
            seed: self.seed,
            force: self.force_lanczos.then_some(Method::Lanczos),
        }
    }
}

pub fn resolve_exact(args: &ExactArgs, file: Option<&ExactConfig>, seed: u64) -> Result<ExactSettings> {
    let empty = ExactConfig::default();
    let file = file.unwrap_or(&empty);
    let def = ExactOptions::default();
    let s = ExactSettings {
        max_n: args.exact_max_n.or(file.max_n).unwrap_or(corrdecay::exact::MAX_EXACT_ATOMS),
        dense_max_dim: file.dense_max_dim.unwrap_or(def.dense_max_dim),
        tol: file.tol.unwrap_or(def.lanczos_tol),
        max_iters: file.max_iters.unwrap_or(def.lanczos_max_iters),
        force_lanczos: args.force_lanczos || file.force_lanczos.unwrap_or(false),
        seed,
    };
    if !(s.tol.is_finite() && s.tol > 0.0) || s.max_iters == 0 {
        return Err(Error::InvalidInput("Lanczos tolerance and iterations must be positive".into()));
    }
    Ok(s)
}

pub fn analyze_options(sdp: &SdpSettings, exact: &ExactSettings, lattice: Option<&LatticeSpec>) -> AnalyzeOptions {
    AnalyzeOptions {
        sdp: sdp.options(),
        solver: sdp.solver,
        exact: exact.options(),
        exact_max_n: exact.max_n,
        lattice: lattice.map(|l| corrdecay::bounds::LatticeContext {
            dimension: l.dimension,
            spacing: l.spacing,
            omega_ratio: corrdecay::bounds::DEFAULT_OMEGA_RATIO,
        }),
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub dim: Option<u8>,
    #[arg(long)]
    pub d: Option<f64>,
    /// parallel or perpendicular.
    #[arg(long)]
    pub pol: Option<String>,
    /// Explicit emitters-per-axis values, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub n_values: Option<Vec<usize>>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Number of sweep points between --n-min and --n-max.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub point_spacing: Option<SpacingName>,
    #[arg(long, value_enum)]
    pub quantity: Option<QuantityName>,
    /// Disorder strength; enables ensemble averaging.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub realizations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SpacingName {
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum QuantityName {
    GammaMax,
    SdpEstimate,
    LbBest,
    Ub,
}

pub fn resolve_scan(args: &ScanArgs, file: Option<&ScanConfig>, seed: u64) -> Result<corrdecay::scaling::SweepPlan> {
    use corrdecay::scaling::{sweep_points, SweepPlan};
    let empty = ScanConfig::default();
    let file = file.unwrap_or(&empty);
    let dimension = args.dim.or(file.dimension).ok_or_else(|| missing("lattice dimension (--dim)"))?;
    let spacing = args.d.or(file.spacing).ok_or_else(|| missing("lattice constant (--d)"))?;
    let pol = match &args.pol {
        Some(s) => PolInput::parse_flag(s)?,
        None => file.polarization.clone().ok_or_else(|| missing("polarization (--pol)"))?,
    };
    let n_values = match args.n_values.clone().or_else(|| file.n_values.clone()) {
        Some(v) => v,
        None => {
            let lo = args.n_min.or(file.n_min).ok_or_else(|| missing("--n-values or --n-min/--n-max"))?;
            let hi = args.n_max.or(file.n_max).ok_or_else(|| missing("--n-max"))?;
            let points = args.points.or(file.points).unwrap_or(7);
            let mode = match args.point_spacing {
                Some(SpacingName::Geometric) => Spacing::Geometric,
                Some(SpacingName::Linear) => Spacing::Linear,
                None => file.point_spacing.unwrap_or_default(),
            };
            sweep_points(lo, hi, points, mode)?
        }
    };
    let quantity = match args.quantity {
        Some(QuantityName::GammaMax) => Quantity::GammaMax,
        Some(QuantityName::SdpEstimate) => Quantity::SdpEstimate,
        Some(QuantityName::LbBest) => Quantity::LbBest,
        Some(QuantityName::Ub) => Quantity::Ub,
        None => file.quantity.unwrap_or(Quantity::GammaMax),
    };
    let disorder = match (args.eta, args.realizations) {
        (None, None) => file.disorder.clone(),
        (eta, realizations) => Some(DisorderPlan {
            eta: eta.or(file.disorder.as_ref().map(|d| d.eta)).unwrap_or(0.0),
            n_realizations: realizations
                .or(file.disorder.as_ref().map(|d| d.n_realizations))
                .unwrap_or(1),
            seed,
        }),
    };
    let plan = SweepPlan {
        dimension,
        spacing,
        polarization: pol.required_tag()?,
        n_values,
        quantity,
        disorder,
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct KSpaceArgs {
    #[arg(long)]
    pub dim: Option<u8>,
    #[arg(long)]
    pub d: Option<f64>,
    /// parallel or perpendicular.
    #[arg(long)]
    pub pol: Option<String>,
    /// Emitters per axis of the finite array whose momentum grid is used.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    /// Cubic regularizer in units of the grid step.
    #[arg(long)]
    pub reg_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EstimatorName {
    CellAverage,
    PointSample,
    LightLineOffset,
}

#[derive(Debug, Clone, Serialize)]
pub struct KSpaceSettings {
    pub dimension: u8,
    pub spacing: f64,
    pub polarization: PolTag,
    pub n_per_axis: usize,
    pub estimator: GridEstimator,
    pub reg_scale: f64,
}

pub fn resolve_kspace(args: &KSpaceArgs, file: Option<&KSpaceConfig>) -> Result<KSpaceSettings> {
    let empty = KSpaceConfig::default();
    let file = file.unwrap_or(&empty);
    let pol = match &args.pol {
        Some(s) => PolInput::parse_flag(s)?,
        None => file.polarization.clone().ok_or_else(|| missing("polarization (--pol)"))?,
    };
    let s = KSpaceSettings {
        dimension: args.dim.or(file.dimension).ok_or_else(|| missing("lattice dimension (--dim)"))?,
        spacing: args.d.or(file.spacing).ok_or_else(|| missing("lattice constant (--d)"))?,
        polarization: pol.required_tag()?,
        n_per_axis: args.n.or(file.n_per_axis).ok_or_else(|| missing("emitters per axis (--n)"))?,
        estimator: match args.estimator {
            Some(EstimatorName::CellAverage) => GridEstimator::CellAverage,
            Some(EstimatorName::PointSample) => GridEstimator::PointSample,
            Some(EstimatorName::LightLineOffset) => GridEstimator::LightLineOffset,
            None => file.estimator.unwrap_or(GridEstimator::CellAverage),
        },
        reg_scale: args.reg_scale.or(file.reg_scale).unwrap_or(1.0),
    };
    if !(s.reg_scale.is_finite() && s.reg_scale > 0.0) {
        return Err(Error::InvalidInput("regularizer scale must be positive".into()));
    }
    Ok(s)
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct RydbergArgs {
    /// Transition table CSV: label,wavelength_um,gamma0_2pi_hz,nbar[,spontaneous].
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub n_atoms: Option<usize>,
    /// Pair separation in um.
    #[arg(long)]
    pub spacing_um: Option<f64>,
    /// Van der Waals coefficient in GHz um^6.
    #[arg(long)]
    pub c6: Option<f64>,
    /// Rabi frequency in MHz.
    #[arg(long)]
    pub rabi_mhz: Option<f64>,
    /// Label of the channel that carries the collective term.
    #[arg(long)]
    pub dominant: Option<String>,
    /// Largest collective rate of the dominant channel in Hz; omit for the
    /// all-within-a-wavelength estimate.
    #[arg(long)]
    pub gamma_max_hz: Option<f64>,
    /// Independent decay rate in Hz, replacing the table sum.
    #[arg(long)]
    pub gamma_ind_hz: Option<f64>,
}

pub fn resolve_rydberg(args: &RydbergArgs, file: Option<&RydbergConfig>) -> Result<corrdecay::rydberg::RydbergInput> {
    let empty = RydbergConfig::default();
    let file = file.unwrap_or(&empty);
    let table = args
        .table
        .clone()
        .or_else(|| file.table.clone())
        .ok_or_else(|| missing("transition table (--table)"))?;
    let f = std::fs::File::open(&table)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", table.display())))?;
    let transitions = corrdecay::rydberg::read_transition_table(std::io::BufReader::new(f))?;
    let collective = match args.gamma_max_hz {
        Some(g) => CollectiveMode::GammaMax(g),
        None => file.collective.clone().unwrap_or(CollectiveMode::Dicke),
    };
    Ok(corrdecay::rydberg::RydbergInput {
        n_atoms: args.n_atoms.or(file.n_atoms).ok_or_else(|| missing("--n-atoms"))?,
        spacing_um: args.spacing_um.or(file.spacing_um).ok_or_else(|| missing("--spacing-um"))?,
        c6_ghz_um6: args.c6.or(file.c6_ghz_um6).ok_or_else(|| missing("--c6"))?,
        rabi_mhz: args.rabi_mhz.or(file.rabi_mhz).ok_or_else(|| missing("--rabi-mhz"))?,
        transitions,
        dominant: args
            .dominant
            .clone()
            .or_else(|| file.dominant.clone())
            .ok_or_else(|| missing("--dominant"))?,
        collective,
        gamma_ind_2pi_hz: args.gamma_ind_hz.or(file.gamma_ind_2pi_hz),
    })
}
