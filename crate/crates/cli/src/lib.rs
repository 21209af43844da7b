//! Command implementations behind the `edgewit` binary.
//!
//! Every command takes a [`RunConfig`]; all randomness derives from its seed,
//! so identical inputs and flags give byte-identical output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edgewit::decomposition::decompose_edge;
use edgewit::family::{default_grid, rho_b, scan_with_witness, source_witness, ScanOptions, ScanPoint};
use edgewit::maps::{witness_to_map, ChoiMap};
use edgewit::operator::{ppt_check, DensityMatrix, HermitianOperator};
use edgewit::product_search::range_product_minimum;
use edgewit::sample::derive_seed;
use edgewit::witness::{
    construct_edge_witness, default_certificate_candidates, nondecomposability_certificate, optimize_witness,
    OptimizeOptions, WitnessReport,
};
use edgewit::{tol, Error};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_NO_EDGE: i32 = 4;

/// Random PPT states tried when looking for a nondecomposability certificate.
const CERTIFICATE_SAMPLES: usize = 1000;

/// A failure together with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn parse(message: impl Into<String>) -> Self {
        Self { code: EXIT_PARSE, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidDims { .. }
            | Error::InvalidOperator(_)
            | Error::DimensionMismatch { .. }
            | Error::NotHermitian(_)
            | Error::NotDensity(_)
            | Error::Parameter(_)
            | Error::Json(_) => EXIT_PARSE,
            _ => EXIT_PRECONDITION,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "edgewit", version, about = "Edge states, entanglement witnesses and positive maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// PPT test, edge test and edge decomposition of a state.
    Analyze {
        /// Operator JSON file.
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Witness (and optionally its positive map) for the edge part of a state.
    Witness {
        input: PathBuf,
        /// Sharpen the witness by subtracting decomposable operators.
        #[arg(long)]
        optimize: bool,
        /// Also emit the associated positive map.
        #[arg(long)]
        to_map: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Detection scan of the 2×4 family with a witness built from one member.
    Scan {
        #[arg(long, default_value_t = 0.5)]
        b_source: f64,
        #[arg(long, default_value_t = 39)]
        grid_steps: usize,
        #[arg(long)]
        optimize: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Writes a member of the 2×4 family as operator JSON.
    RhoB {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = tol::RANK_TOL)]
    pub rank_tol: f64,
    #[arg(long, default_value_t = tol::ZERO_TOL)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = edgewit::witness::DEFAULT_SAFETY)]
    pub safety: f64,
    /// Output file; stdout when omitted (required for `scan`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub zero_tol: f64,
    pub psd_floor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub restarts: usize,
    pub tolerances: Tolerances,
    pub safety: f64,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(a: &CommonArgs) -> CliResult<Self> {
        let cfg = Self {
            seed: a.seed,
            restarts: a.restarts,
            tolerances: Tolerances {
                rank_tol: a.rank_tol,
                zero_tol: a.zero_tol,
                psd_floor: tol::PSD_FLOOR,
            },
            safety: a.safety,
            output_path: a.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let t = &self.tolerances;
        if [t.rank_tol, t.zero_tol, t.psd_floor].iter().any(|x| !(*x > 0.0)) {
            return Err(CliError::parse("tolerances must be positive"));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(CliError::parse(format!("safety {} outside (0, 1]", self.safety)));
        }
        if self.restarts == 0 {
            return Err(CliError::parse("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError { code: 1, message: format!("{}: {e}", path.display()) };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

pub fn read_operator(path: &Path) -> CliResult<HermitianOperator> {
    let text = fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    Ok(HermitianOperator::from_json(&text)?)
}

pub fn read_state(path: &Path) -> CliResult<DensityMatrix> {
    Ok(DensityMatrix::new(read_operator(path)?)?)
}

#[derive(Debug, Serialize)]
pub struct DecompositionSummary {
    pub p: f64,
    pub components: usize,
    pub steps: usize,
    pub edge_rank: Option<usize>,
    pub edge_rank_pt: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub dims: [usize; 2],
    pub is_ppt: bool,
    pub min_pt_eigenvalue: f64,
    pub rank: usize,
    pub rank_pt: usize,
    /// `None` when the state is not PPT (edge machinery skipped).
    pub is_edge: Option<bool>,
    pub range_minimum: Option<f64>,
    pub decomposition: Option<DecompositionSummary>,
    pub config: RunConfig,
}

pub fn analyze(rho: &DensityMatrix, cfg: &RunConfig) -> CliResult<Analysis> {
    let ppt = ppt_check(rho);
    let dims = rho.dims();
    let rank_tol = cfg.tolerances.rank_tol;
    let mut out = Analysis {
        dims: [dims.d_a, dims.d_b],
        is_ppt: ppt.is_ppt,
        min_pt_eigenvalue: ppt.min_pt_eigenvalue,
        rank: rho.spectral_split(rank_tol).rank,
        rank_pt: rho.pt().spectral_split(rank_tol).rank,
        is_edge: None,
        range_minimum: None,
        decomposition: None,
        config: cfg.clone(),
    };
    if !ppt.is_ppt {
        return Ok(out);
    }
    let search = range_product_minimum(rho, cfg.restarts, derive_seed(cfg.seed, 1))?;
    out.range_minimum = Some(search.value);
    out.is_edge = Some(!dims.ppt_is_sufficient() && search.value > cfg.tolerances.zero_tol);
    let dec = decompose_edge(rho, cfg.restarts, derive_seed(cfg.seed, 2))?;
    out.decomposition = Some(DecompositionSummary {
        p: dec.p,
        components: dec.separable_part.len(),
        steps: dec.steps.len(),
        edge_rank: dec.edge_part.as_ref().map(|d| d.spectral_split(rank_tol).rank),
        edge_rank_pt: dec.edge_part.as_ref().map(|d| d.pt().spectral_split(rank_tol).rank),
    });
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct WitnessOutput {
    pub p: f64,
    pub epsilon: f64,
    pub epsilon_used: f64,
    pub c: f64,
    pub report: WitnessReport,
    pub map: Option<ChoiMap>,
    pub config: RunConfig,
}

pub fn witness(rho: &DensityMatrix, optimize: bool, to_map: bool, cfg: &RunConfig) -> CliResult<WitnessOutput> {
    let ppt = ppt_check(rho);
    if !ppt.is_ppt {
        return Err(CliError {
            code: EXIT_PRECONDITION,
            message: format!("state is not PPT (min PT eigenvalue {:e})", ppt.min_pt_eigenvalue),
        });
    }
    let dec = decompose_edge(rho, cfg.restarts, derive_seed(cfg.seed, 2))?;
    let no_edge = || CliError { code: EXIT_NO_EDGE, message: "no edge component".into() };
    let delta = match &dec.edge_part {
        Some(d) if !rho.dims().ppt_is_sufficient() => d.clone(),
        _ => return Err(no_edge()),
    };
    let c = HermitianOperator::identity(rho.dims());
    let construction = match construct_edge_witness(&delta, &c, cfg.safety, cfg.restarts, derive_seed(cfg.seed, 3)) {
        Err(Error::Precondition(_)) | Err(Error::DegenerateEdge(_)) => return Err(no_edge()),
        other => other?,
    };
    let opts = OptimizeOptions {
        // zero iterations still collects the zero sets of the unoptimized witness
        max_iters: if optimize { 2 * rho.dims().total() } else { 0 },
        restarts: cfg.restarts,
        seed: derive_seed(cfg.seed, 4),
        ..OptimizeOptions::default()
    };
    let mut report = optimize_witness(&construction.w, &opts)?;
    report.nd_certificate = match nondecomposability_certificate(&report.witness, &[rho.clone(), delta]) {
        Some(c) => Some(c),
        None => {
            let fallback = default_certificate_candidates(rho.dims(), CERTIFICATE_SAMPLES, derive_seed(cfg.seed, 5))?;
            nondecomposability_certificate(&report.witness, &fallback)
        }
    };
    let map = to_map.then(|| witness_to_map(&report.witness));
    Ok(WitnessOutput {
        p: dec.p,
        epsilon: construction.epsilon,
        epsilon_used: construction.epsilon_used,
        c: construction.c,
        report,
        map,
        config: cfg.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct ScanHeader {
    pub b_source: f64,
    pub grid_steps: usize,
    pub optimize: bool,
    pub epsilon: f64,
    pub epsilon_used: f64,
    pub optimal_certificate: Option<edgewit::witness::OptimalityCertificate>,
    pub iterations: Option<usize>,
    pub b_detected_max_witness: Option<f64>,
    pub b_detected_max_map: Option<f64>,
    pub config: RunConfig,
}

pub struct ScanOutput {
    pub header: ScanHeader,
    pub points: Vec<ScanPoint>,
}

pub fn scan(b_source: f64, grid_steps: usize, optimize: bool, cfg: &RunConfig) -> CliResult<ScanOutput> {
    if !(b_source > 0.0 && b_source < 1.0) {
        return Err(CliError::parse(format!("b-source {b_source} must lie in (0, 1)")));
    }
    if grid_steps == 0 {
        return Err(CliError::parse("grid-steps must be positive"));
    }
    let opts = ScanOptions {
        optimize,
        restarts: cfg.restarts,
        seed: cfg.seed,
        safety: cfg.safety,
        max_iters: 16,
    };
    let (construction, report) = source_witness(b_source, &opts)?;
    let w = report.as_ref().map_or(&construction.w, |r| &r.witness);
    let row = scan_with_witness(b_source, optimize, w, &default_grid(grid_steps))?;
    Ok(ScanOutput {
        header: ScanHeader {
            b_source,
            grid_steps,
            optimize,
            epsilon: construction.epsilon,
            epsilon_used: construction.epsilon_used,
            optimal_certificate: report.as_ref().map(|r| r.optimal_certificate),
            iterations: report.as_ref().map(|r| r.steps.len()),
            b_detected_max_witness: row.b_detected_max_witness,
            b_detected_max_map: row.b_detected_max_map,
            config: cfg.clone(),
        },
        points: row.points,
    })
}

pub fn scan_csv(points: &[ScanPoint]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).map_err(|e| CliError { code: 1, message: e.to_string() })?;
    }
    w.into_inner().map_err(|e| CliError { code: 1, message: e.to_string() })
}

/// Sidecar path for the scan header: `<out>.json`.
pub fn header_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Runs a parsed command; returns the exit code.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze { input, common } => {
            let cfg = RunConfig::from_args(&common)?;
            let rho = read_state(&input)?;
            emit(cfg.output_path.as_deref(), &to_json(&analyze(&rho, &cfg)?))
        }
        Command::Witness { input, optimize, to_map, common } => {
            let cfg = RunConfig::from_args(&common)?;
            let rho = read_state(&input)?;
            emit(cfg.output_path.as_deref(), &to_json(&witness(&rho, optimize, to_map, &cfg)?))
        }
        Command::Scan { b_source, grid_steps, optimize, common } => {
            let cfg = RunConfig::from_args(&common)?;
            let out = cfg.output_path.clone().ok_or_else(|| CliError::parse("scan needs --out"))?;
            let result = scan(b_source, grid_steps, optimize, &cfg)?;
            write_atomic(&out, &scan_csv(&result.points)?)?;
            write_atomic(&header_path(&out), to_json(&result.header).as_bytes())
        }
        Command::RhoB { b, out } => emit(out.as_deref(), &rho_b(b)?.as_operator().to_json()),
    }
}
