//! Command-line front end: `generate`, `segment`, `unmix`, `evaluate`.
//!
//! Every command returns a process exit code: 0 on success, 1 for I/O
//! failures, 2 for usage or validation errors and 3 for numerical failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{extract_vca, unmix_fcls, unmix_scls};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics;
use crate::mua_sv::{run_mua_sv, MuaSvParams};
use crate::superpixel::slic_segment;
use crate::synthgen::{self, builtin_library, Protocol};
use crate::types::{AbundanceMatrix, Domain, EndmemberField, EndmemberSet, HsiCube, MetricsReport, ScalingField};

#[derive(Debug, Parser)]
#[command(name = "muasv", version, about = "Multiscale hyperspectral unmixing with spectral variability")]
pub struct Cli {
    /// Worker threads (defaults to the hardware parallelism).
    #[arg(long, global = true, env = "MUASV_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with ground truth.
    Generate(GenerateArgs),
    /// Unmix a cube with FCLS, SCLS or MUA-SV.
    Unmix(UnmixArgs),
    /// Score an unmixing result against a ground-truth scene.
    Evaluate(EvaluateArgs),
    /// Compute a SLIC superpixel label map.
    Segment(SegmentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Dc1,
    Dc2,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub protocol: ProtocolArg,
    /// Observation SNR in dB; `inf` for a noiseless cube.
    #[arg(long)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Endmember library CSV (bands × 3), or `builtin`.
    #[arg(long)]
    pub library: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Fcls,
    Scls,
    MuaSv,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Cube header or payload path (or their common base).
    #[arg(long)]
    pub input: PathBuf,
    /// Reference endmember CSV (bands × P).
    #[arg(long, conflicts_with = "vca", required_unless_present = "vca")]
    pub endmembers: Option<PathBuf>,
    /// Extract this many reference endmembers with VCA instead.
    #[arg(long)]
    pub vca: Option<usize>,
    /// Seed of the VCA projections.
    #[arg(long, default_value_t = 0)]
    pub vca_seed: u64,
    /// MUA-SV parameters as a flat JSON object; missing keys take defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `unmix`.
    #[arg(long)]
    pub est: PathBuf,
    /// Scene directory written by `generate`.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Target superpixel side length in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub size: f64,
    /// Compactness (spatial against spectral weight).
    #[arg(long, default_value_t = 0.001)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Run summary written next to the unmixing outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnmixSummary {
    pub algo: String,
    pub endmembers: usize,
    pub endmember_source: String,
    pub rows: usize,
    pub cols: usize,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub superpixels: Option<usize>,
    pub wall_time_s: f64,
}

/// Dispatches a parsed command line and maps errors to exit codes.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Unmix(a) => cmd_unmix(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Segment(a) => cmd_segment(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_library(source: &str) -> Result<EndmemberSet> {
    if source == "builtin" {
        Ok(builtin_library())
    } else {
        EndmemberSet::new(io::read_csv_matrix(Path::new(source))?)
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if args.snr.is_nan() {
        return Err(Error::InvalidInput("--snr must be a number or inf".into()));
    }
    let library = load_library(&args.library)?;
    let scene = match args.protocol {
        ProtocolArg::Dc1 => synthgen::generate_dc1(args.seed, args.snr, &library)?,
        ProtocolArg::Dc2 => synthgen::generate_dc2(args.seed, args.snr, &library)?,
    };
    synthgen::write_scene(&scene, &args.out)?;
    let name = match scene.protocol {
        Protocol::Dc1 => "dc1",
        Protocol::Dc2 => "dc2",
    };
    println!(
        "{name}: {}x{}x{} cube, seed {}, snr {} dB -> {}",
        scene.cube.rows(),
        scene.cube.cols(),
        scene.cube.bands(),
        args.seed,
        args.snr,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<()> {
    let cube = io::read_cube(&args.input)?;
    let map = slic_segment(&cube, args.size, args.gamma, args.seed)?;
    io::write_labels_csv(map.labels(), cube.rows(), cube.cols(), &args.out)?;
    println!("{}", map.superpixel_count());
    Ok(())
}

fn abundance_cube(a: &AbundanceMatrix, rows: usize, cols: usize) -> Result<HsiCube> {
    HsiCube::new(a.data().clone(), rows, cols)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::Format(format!("json encode: {e}")))?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct BaselineDiagnostics {
    algo: Algo,
    wall_time_s: f64,
}

pub fn cmd_unmix(args: &UnmixArgs) -> Result<()> {
    if args.params.is_some() && args.algo != Algo::MuaSv {
        return Err(Error::InvalidInput("--params only applies to --algo mua-sv".into()));
    }
    let params = match &args.params {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let p: MuaSvParams = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            p.validate()?;
            p
        }
        None => MuaSvParams::default(),
    };
    let cube = io::read_cube(&args.input)?;
    let (m0, source) = match (&args.endmembers, args.vca) {
        (Some(path), None) => (
            EndmemberSet::new(io::read_csv_matrix(path)?)?,
            path.display().to_string(),
        ),
        (None, Some(p)) => (extract_vca(&cube, p, args.vca_seed)?, format!("vca:{p}")),
        _ => return Err(Error::InvalidInput("give exactly one of --endmembers or --vca".into())),
    };
    if m0.bands() != cube.bands() {
        return Err(Error::Shape(format!(
            "cube has {} bands, endmembers have {}",
            cube.bands(),
            m0.bands()
        )));
    }
    create_dir(&args.out)?;
    let (rows, cols) = (cube.rows(), cube.cols());
    let start = std::time::Instant::now();

    let mut summary = UnmixSummary {
        algo: match args.algo {
            Algo::Fcls => "fcls",
            Algo::Scls => "scls",
            Algo::MuaSv => "mua-sv",
        }
        .into(),
        endmembers: m0.endmembers(),
        endmember_source: source,
        rows,
        cols,
        iterations: None,
        converged: None,
        superpixels: None,
        wall_time_s: 0.0,
    };
    let abundances = match args.algo {
        Algo::Fcls => {
            let a = unmix_fcls(&cube, &m0)?;
            summary.wall_time_s = start.elapsed().as_secs_f64();
            let diag = BaselineDiagnostics { algo: args.algo, wall_time_s: summary.wall_time_s };
            write_jsonl(&args.out.join("diagnostics.jsonl"), &[diag])?;
            a
        }
        Algo::Scls => {
            let (a, psi) = unmix_scls(&cube, &m0)?;
            summary.wall_time_s = start.elapsed().as_secs_f64();
            let diag = BaselineDiagnostics { algo: args.algo, wall_time_s: summary.wall_time_s };
            write_jsonl(&args.out.join("diagnostics.jsonl"), &[diag])?;
            io::write_csv_matrix(&DMatrix::from_column_slice(psi.len(), 1, psi.as_slice()), &args.out.join("scaling.csv"))?;
            a
        }
        Algo::MuaSv => {
            let (init, _) = unmix_scls(&cube, &m0)?;
            let out = run_mua_sv(&cube, &m0, &init, &params)?;
            summary.wall_time_s = start.elapsed().as_secs_f64();
            summary.iterations = Some(out.iterations);
            summary.converged = Some(out.converged);
            summary.superpixels = Some(out.transform.superpixels());
            write_jsonl(&args.out.join("diagnostics.jsonl"), &out.diagnostics)?;
            io::write_field(&out.field, rows, cols, &args.out.join("field"))?;
            io::write_csv_matrix(&out.scaling.data().transpose(), &args.out.join("scaling.csv"))?;
            out.abundances
        }
    };

    io::write_cube(&abundance_cube(&abundances, rows, cols)?, &args.out.join("abundances"))?;
    io::write_csv_matrix(m0.data(), &args.out.join("endmembers.csv"))?;
    for k in 0..abundances.endmembers() {
        let values: Vec<f64> = abundances.data().row(k).iter().copied().collect();
        io::write_pgm(&values, rows, cols, &args.out.join(format!("abundance_{}.pgm", k + 1)))?;
    }
    io::write_json(&args.out.join("summary.json"), &summary)?;
    println!(
        "{}: {} endmembers, {}x{} pixels, {:.3} s -> {}",
        summary.algo,
        summary.endmembers,
        rows,
        cols,
        summary.wall_time_s,
        args.out.display()
    );
    Ok(())
}

fn exists(dir: &Path, base: &str) -> bool {
    io::pair_paths(&dir.join(base)).0.is_file()
}

fn read_abundances(dir: &Path) -> Result<AbundanceMatrix> {
    let cube = io::read_cube(&dir.join("abundances"))?;
    Ok(AbundanceMatrix::from_raw(cube.into_data(), Domain::Original))
}

/// Endmember field behind an estimate: the stored field when present,
/// otherwise the reference endmembers, scaled per pixel for SCLS.
fn estimated_field(dir: &Path, pixels: usize) -> Result<Option<EndmemberField>> {
    if exists(dir, "field") {
        return Ok(Some(io::read_field(&dir.join("field"))?.0));
    }
    let m0_path = dir.join("endmembers.csv");
    if !m0_path.is_file() {
        return Ok(None);
    }
    let m0 = EndmemberSet::new(io::read_csv_matrix(&m0_path)?)?;
    let scaling_path = dir.join("scaling.csv");
    if scaling_path.is_file() {
        let s = io::read_csv_matrix(&scaling_path)?;
        if s.nrows() != pixels {
            return Err(Error::Shape("scaling.csv rows differ from the pixel count".into()));
        }
        let psi = DMatrix::from_fn(m0.endmembers(), pixels, |k, n| s[(n, if s.ncols() == 1 { 0 } else { k })]);
        return Ok(Some(EndmemberField::from_scaling(&m0, &ScalingField::new(psi)?)?));
    }
    Ok(Some(EndmemberField::constant(&m0, pixels)))
}

fn read_wall_time(dir: &Path) -> f64 {
    fs::read(dir.join("summary.json"))
        .ok()
        .and_then(|b| serde_json::from_slice::<UnmixSummary>(&b).ok())
        .map_or(0.0, |s| s.wall_time_s)
}

/// Computes every metric the two directories support.
pub fn evaluate_dirs(est: &Path, truth: &Path) -> Result<MetricsReport> {
    let est_a = read_abundances(est)?;
    let truth_a = read_abundances(truth)?;
    let mut report = MetricsReport {
        mse_a: metrics::mse_abundance(&truth_a, &est_a)?,
        wall_time_s: read_wall_time(est),
        ..Default::default()
    };
    let est_field = estimated_field(est, est_a.columns())?;
    if exists(truth, "field") {
        if let (Some(ef), true) = (&est_field, exists(est, "field")) {
            let (tf, _, _) = io::read_field(&truth.join("field"))?;
            report.mse_m = Some(metrics::mse_endmembers(&tf, ef)?);
            report.sam_m = Some(metrics::sam_endmembers(&tf, ef)?);
        }
    }
    if let (Some(ef), true) = (&est_field, exists(truth, "cube")) {
        let cube = io::read_cube(&truth.join("cube"))?;
        report.mse_y = Some(metrics::mse_reconstruction(&cube, ef, &est_a)?);
    }
    Ok(report)
}

/// Aligned two-column table of the metrics present in `report`.
pub fn format_report(report: &MetricsReport) -> String {
    let rows: Vec<(&str, Option<f64>)> = vec![
        ("mse_a", Some(report.mse_a)),
        ("mse_m", report.mse_m),
        ("mse_y", report.mse_y),
        ("sam_m", report.sam_m),
        ("wall_time_s", Some(report.wall_time_s)),
    ];
    let mut out = format!("{:<12} {:>14}\n", "metric", "value");
    for (name, v) in rows {
        if let Some(v) = v {
            out.push_str(&format!("{name:<12} {v:>14.6e}\n"));
        }
    }
    out
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = evaluate_dirs(&args.est, &args.truth)?;
    io::write_json(&args.out, &report)?;
    print!("{}", format_report(&report));
    Ok(())
}
