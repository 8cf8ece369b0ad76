//! Synthetic benchmark scenes with ground truth.
//!
//! DC1: 50×50, smooth random abundance fields, per-endmember smooth scaling
//! clipped to [0.75, 1.25] and 25 dB noise on the scaled signatures.
//! DC2: 70×70, square patches over a fixed background mixture, per-pixel
//! piecewise-linear band scaling in [0.8, 1.2].

mod library;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::types::{
    AbundanceMatrix, Domain, EndmemberField, EndmemberSet, Grid, HsiCube, ScalingField,
};

pub use library::{builtin_library, wavelength, LIBRARY_BANDS};

pub const DC1_SIZE: usize = 50;
pub const DC1_ABUNDANCE_SIGMA: f64 = 5.0;
pub const DC1_SCALING_SIGMA: f64 = 8.0;
pub const DC1_SCALING_AMPLITUDE: f64 = 0.15;
pub const DC1_SCALING_RANGE: (f64, f64) = (0.75, 1.25);
pub const DC1_ENDMEMBER_SNR_DB: f64 = 25.0;

pub const DC2_SIZE: usize = 70;
pub const DC2_BACKGROUND: [f64; 3] = [0.2744, 0.1055, 0.62];
pub const DC2_SQUARE: usize = 4;
pub const DC2_SQUARE_COLS: [usize; 5] = [5, 18, 31, 44, 57];
pub const DC2_SQUARE_ROWS: [usize; 3] = [9, 31, 53];
pub const DC2_SCALING_RANGE: (f64, f64) = (0.8, 1.2);
pub const DC2_BREAKPOINTS: usize = 5;

/// Abundances of the DC2 squares, one row of five per mixture class.
pub const DC2_SQUARES: [[[f64; 3]; 5]; 3] = {
    const T: f64 = 1.0 / 3.0;
    [
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
        [[T, T, T], [T, T, T], [T, T, T], [T, T, T], [T, T, T]],
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dc1,
    Dc2,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub protocol: Protocol,
    pub cube: HsiCube,
    pub library: EndmemberSet,
    pub truth_abundances: AbundanceMatrix,
    pub truth_field: EndmemberField,
    pub truth_scaling: Option<ScalingField>,
    pub snr_db: f64,
    pub seed: u64,
    /// `‖Σ_n M_n a_n‖²` before observation noise.
    pub signal_energy: f64,
    /// Energy of the added observation noise.
    pub noise_energy: f64,
}

/// Independent stream for one purpose within a seeded scene.
fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma < 1e-3 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with replicated borders; `x` is row-major.
fn blur(x: &[f64], grid: Grid, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; x.len()];
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            tmp[grid.index(row, col)] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * x[grid.index(row, clamp(col as i64 + i as i64 - r, grid.cols))])
                .sum();
        }
    }
    let mut out = vec![0.0; x.len()];
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            out[grid.index(row, col)] = k
                .iter()
                .enumerate()
                .map(|(i, w)| w * tmp[grid.index(clamp(row as i64 + i as i64 - r, grid.rows), col)])
                .sum();
        }
    }
    out
}

fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Smooth abundance maps: blurred white noise per endmember, shifted to a
/// zero minimum and normalized per pixel onto the simplex.
pub fn gaussian_random_field_abundances(
    rows: usize,
    cols: usize,
    p: usize,
    correlation_length: f64,
    seed: u64,
) -> Result<AbundanceMatrix> {
    if rows == 0 || cols == 0 || p == 0 {
        return Err(Error::InvalidInput("field dimensions must be positive".into()));
    }
    if !(correlation_length >= 0.0) || !correlation_length.is_finite() {
        return Err(Error::InvalidInput("correlation length must be nonnegative".into()));
    }
    let grid = Grid::new(rows, cols);
    let n = grid.len();
    if p == 1 {
        return AbundanceMatrix::new(DMatrix::from_element(1, n, 1.0), Domain::Original);
    }
    let mut rng = stream(seed, 1);
    let mut a = DMatrix::zeros(p, n);
    for k in 0..p {
        let f = blur(&white_noise(&mut rng, n), grid, correlation_length);
        let min = f.iter().copied().fold(f64::INFINITY, f64::min);
        for j in 0..n {
            a[(k, j)] = f[j] - min;
        }
    }
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / p as f64);
        }
    }
    AbundanceMatrix::new(a, Domain::Original)
}

/// Adds i.i.d. Gaussian noise at `snr_db` relative to the mean signal power.
/// An infinite SNR returns the input unchanged.
pub fn add_noise(cube: &HsiCube, snr_db: f64, seed: u64) -> Result<HsiCube> {
    Ok(add_noise_with_energy(cube, snr_db, seed)?.0)
}

fn add_noise_with_energy(cube: &HsiCube, snr_db: f64, seed: u64) -> Result<(HsiCube, f64)> {
    if snr_db.is_nan() {
        return Err(Error::InvalidInput("SNR must be a number".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok((cube.clone(), 0.0));
    }
    let y = cube.data();
    let sigma = (y.norm_squared() / y.len() as f64 / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = stream(seed, 2);
    let noise = DMatrix::from_fn(y.nrows(), y.ncols(), |_, _| {
        sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let energy = noise.norm_squared();
    Ok((HsiCube::new(y + noise, cube.rows(), cube.cols())?, energy))
}

fn check_library(library: &EndmemberSet) -> Result<()> {
    if library.endmembers() != 3 {
        return Err(Error::InvalidInput(format!(
            "library must have 3 endmembers, got {}",
            library.endmembers()
        )));
    }
    if library.bands() != LIBRARY_BANDS {
        return Err(Error::InvalidInput(format!(
            "library must have {LIBRARY_BANDS} bands, got {}",
            library.bands()
        )));
    }
    Ok(())
}

fn mix(field: &EndmemberField, a: &AbundanceMatrix, grid: Grid) -> Result<HsiCube> {
    let cols: Vec<DVector<f64>> = (0..grid.len())
        .map(|n| field.get(n) * a.data().column(n))
        .collect();
    HsiCube::new(DMatrix::from_columns(&cols), grid.rows, grid.cols)
}

fn finish(
    protocol: Protocol,
    library: &EndmemberSet,
    a: AbundanceMatrix,
    field: EndmemberField,
    scaling: Option<ScalingField>,
    grid: Grid,
    snr_db: f64,
    seed: u64,
) -> Result<SyntheticScene> {
    let clean = mix(&field, &a, grid)?;
    let signal_energy = clean.data().norm_squared();
    let (cube, noise_energy) = add_noise_with_energy(&clean, snr_db, seed)?;
    Ok(SyntheticScene {
        protocol,
        cube,
        library: library.clone(),
        truth_abundances: a,
        truth_field: field,
        truth_scaling: scaling,
        snr_db,
        seed,
        signal_energy,
        noise_energy,
    })
}

/// Generator constants of the DC1 protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dc1Config {
    pub abundance_correlation_length: f64,
    pub scaling_correlation_length: f64,
    pub scaling_amplitude: f64,
    pub endmember_snr_db: f64,
}

impl Default for Dc1Config {
    fn default() -> Self {
        Self {
            abundance_correlation_length: DC1_ABUNDANCE_SIGMA,
            scaling_correlation_length: DC1_SCALING_SIGMA,
            scaling_amplitude: DC1_SCALING_AMPLITUDE,
            endmember_snr_db: DC1_ENDMEMBER_SNR_DB,
        }
    }
}

pub fn generate_dc1(seed: u64, snr_db: f64, library: &EndmemberSet) -> Result<SyntheticScene> {
    generate_dc1_with(seed, snr_db, library, &Dc1Config::default())
}

pub fn generate_dc1_with(
    seed: u64,
    snr_db: f64,
    library: &EndmemberSet,
    config: &Dc1Config,
) -> Result<SyntheticScene> {
    check_library(library)?;
    let grid = Grid::new(DC1_SIZE, DC1_SIZE);
    let n = grid.len();
    let p = library.endmembers();
    let a = gaussian_random_field_abundances(grid.rows, grid.cols, p, config.abundance_correlation_length, seed)?;

    let mut rng = stream(seed, 3);
    let (lo, hi) = DC1_SCALING_RANGE;
    let mut psi = DMatrix::zeros(p, n);
    for k in 0..p {
        let f = blur(&white_noise(&mut rng, n), grid, config.scaling_correlation_length);
        let mean = f.iter().sum::<f64>() / n as f64;
        let sd = (f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for j in 0..n {
            psi[(k, j)] = (1.0 + config.scaling_amplitude * (f[j] - mean) / sd).clamp(lo, hi);
        }
    }
    let scaling = ScalingField::new(psi)?;

    let mut rng = stream(seed, 4);
    let scaled = EndmemberField::from_scaling(library, &scaling)?;
    let denom = (library.bands() * p) as f64 * 10f64.powf(config.endmember_snr_db / 10.0);
    let mats = scaled
        .into_mats()
        .into_iter()
        .map(|m| {
            let sigma = (m.norm_squared() / denom).sqrt();
            m.map(|v| (v + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).max(0.0))
        })
        .collect();
    let field = EndmemberField::new(mats)?;
    finish(Protocol::Dc1, library, a, field, Some(scaling), grid, snr_db, seed)
}

/// Ground-truth DC2 abundance layout.
pub fn dc2_abundances() -> AbundanceMatrix {
    let grid = Grid::new(DC2_SIZE, DC2_SIZE);
    let mut a = DMatrix::from_fn(3, grid.len(), |k, _| DC2_BACKGROUND[k]);
    for (i, &r0) in DC2_SQUARE_ROWS.iter().enumerate() {
        for (j, &c0) in DC2_SQUARE_COLS.iter().enumerate() {
            for r in r0..r0 + DC2_SQUARE {
                for c in c0..c0 + DC2_SQUARE {
                    let n = grid.index(r, c);
                    for k in 0..3 {
                        a[(k, n)] = DC2_SQUARES[i][j][k];
                    }
                }
            }
        }
    }
    // background sums to 0.9999; renormalize so the simplex holds exactly
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    AbundanceMatrix::new(a, Domain::Original).expect("layout is on the simplex")
}

/// Piecewise-linear curve over `bands` through `knots` uniformly spaced values.
fn piecewise_linear(knots: &[f64], bands: usize) -> impl Iterator<Item = f64> + '_ {
    let segs = (knots.len() - 1) as f64;
    (0..bands).map(move |b| {
        let t = if bands == 1 { 0.0 } else { b as f64 / (bands - 1) as f64 * segs };
        let i = (t.floor() as usize).min(knots.len() - 2);
        let f = t - i as f64;
        knots[i] * (1.0 - f) + knots[i + 1] * f
    })
}

pub fn generate_dc2(seed: u64, snr_db: f64, library: &EndmemberSet) -> Result<SyntheticScene> {
    check_library(library)?;
    let grid = Grid::new(DC2_SIZE, DC2_SIZE);
    let (l, p) = (library.bands(), library.endmembers());
    let (lo, hi) = DC2_SCALING_RANGE;
    let mut rng = stream(seed, 5);
    let mats = (0..grid.len())
        .map(|_| {
            let mut m = library.data().clone();
            for k in 0..p {
                let knots: Vec<f64> = (0..DC2_BREAKPOINTS).map(|_| rng.random_range(lo..=hi)).collect();
                for (b, s) in piecewise_linear(&knots, l).enumerate() {
                    m[(b, k)] *= s;
                }
            }
            m
        })
        .collect();
    let field = EndmemberField::new(mats)?;
    finish(Protocol::Dc2, library, dc2_abundances(), field, None, grid, snr_db, seed)
}

#[derive(Serialize)]
struct Manifest<'a> {
    protocol: Protocol,
    seed: u64,
    snr_db: Option<f64>,
    rows: usize,
    cols: usize,
    bands: usize,
    endmembers: usize,
    conventions: serde_json::Value,
    files: &'a [&'a str],
}

/// Writes a scene directory: observed cube, truth abundances, truth field,
/// reference endmembers, truth scaling (DC1) and a manifest.
pub fn write_scene(scene: &SyntheticScene, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (rows, cols) = (scene.cube.rows(), scene.cube.cols());
    io::write_cube(&scene.cube, &dir.join("cube"))?;
    let ab = HsiCube::new(scene.truth_abundances.data().clone(), rows, cols)?;
    io::write_cube(&ab, &dir.join("abundances"))?;
    io::write_field(&scene.truth_field, rows, cols, &dir.join("field"))?;
    io::write_csv_matrix(scene.library.data(), &dir.join("endmembers.csv"))?;
    let mut files = vec![
        "cube.json", "cube.raw", "abundances.json", "abundances.raw", "field.json", "field.raw",
        "endmembers.csv",
    ];
    if let Some(s) = &scene.truth_scaling {
        io::write_csv_matrix(&s.data().transpose(), &dir.join("scaling.csv"))?;
        files.push("scaling.csv");
    }
    let conventions = match scene.protocol {
        Protocol::Dc1 => serde_json::json!({
            "abundance_correlation_length": DC1_ABUNDANCE_SIGMA,
            "scaling_correlation_length": DC1_SCALING_SIGMA,
            "scaling_amplitude": DC1_SCALING_AMPLITUDE,
            "scaling_range": [DC1_SCALING_RANGE.0, DC1_SCALING_RANGE.1],
            "endmember_snr_db": DC1_ENDMEMBER_SNR_DB,
        }),
        Protocol::Dc2 => serde_json::json!({
            "background": DC2_BACKGROUND,
            "square_size": DC2_SQUARE,
            "square_rows": DC2_SQUARE_ROWS,
            "square_cols": DC2_SQUARE_COLS,
            "square_abundances": DC2_SQUARES,
            "scaling_range": [DC2_SCALING_RANGE.0, DC2_SCALING_RANGE.1],
            "breakpoints": DC2_BREAKPOINTS,
        }),
    };
    let manifest = Manifest {
        protocol: scene.protocol,
        seed: scene.seed,
        snr_db: scene.snr_db.is_finite().then_some(scene.snr_db),
        rows,
        cols,
        bands: scene.cube.bands(),
        endmembers: scene.library.endmembers(),
        conventions,
        files: &files,
    };
    io::write_json(&dir.join("manifest.json"), &manifest)
}
